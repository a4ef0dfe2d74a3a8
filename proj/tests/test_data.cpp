#include <doctest.h>

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "projectedex/data.hpp"
#include "projectedex/nifti.hpp"
#include "testutil.hpp"

using namespace projectedex;
namespace fs = std::filesystem;

namespace {

// Independent Table-style lookup: the five grade-group rows, keyed on the
// ordered pair where order matters and the total otherwise.
int lookup_isup(int p, int s) {
  const int total = p + s;
  if (total == 6) return 1;
  if (p == 3 && s == 4) return 2;
  if (p == 4 && s == 3) return 3;
  if (total == 8) return 4;
  return 5;
}

fs::path temp_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / "projectedex-tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("isup mapping follows the grade-group table exactly") {
  // spec'd examples
  CHECK(map_isup_to_risk({3, 3}).isup_group == 1);
  CHECK(map_isup_to_risk({3, 3}).value == Risk::LOW);
  CHECK(map_isup_to_risk({4, 3}).isup_group == 3);
  CHECK(map_isup_to_risk({4, 3}).value == Risk::HIGH);
  CHECK(map_isup_to_risk({5, 5}).isup_group == 5);
  CHECK(map_isup_to_risk({5, 5}).value == Risk::HIGH);

  // exhaustive over the 9 valid pairs
  for (int p = 3; p <= 5; ++p)
    for (int s = 3; s <= 5; ++s) {
      RiskLabel r = map_isup_to_risk({p, s});
      CHECK(r.isup_group == lookup_isup(p, s));
      CHECK((r.value == Risk::HIGH) == (r.isup_group > 2));
    }

  CHECK_THROWS_AS(map_isup_to_risk({2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(map_isup_to_risk({3, 6}), std::invalid_argument);
}

TEST_CASE("crop_centered window arithmetic") {
  const int h0 = 256, w0 = 256;
  Tensor src({h0, w0});
  for (int r = 0; r < h0; ++r)
    for (int c = 0; c < w0; ++c)
      src[r * w0 + c] = static_cast<float>(r * 1000 + c);

  SUBCASE("interior centroid") {
    Tensor out = crop_centered(src, {100, 100}, 64);
    CHECK(out.dim(0) == 64);
    CHECK(out[0] == doctest::Approx(68 * 1000 + 68));           // rows 68..131
    CHECK(out[63 * 64 + 63] == doctest::Approx(131 * 1000 + 131));
  }
  SUBCASE("border centroid translates, never pads") {
    Tensor out = crop_centered(src, {10, 128}, 64);
    CHECK(out[0] == doctest::Approx(0 * 1000 + 96));            // rows 0..63, cols 96..159
    CHECK(out[63 * 64 + 63] == doctest::Approx(63 * 1000 + 159));
  }
  SUBCASE("identity crop") {
    Tensor small({64, 64});
    for (std::int64_t i = 0; i < small.numel(); ++i) small[i] = static_cast<float>(i);
    Tensor out = crop_centered(small, {32, 32}, 64);
    CHECK(tensors_equal(out, small));
  }
  SUBCASE("per-pixel equality against direct slicing on random inputs") {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
      Tensor rsrc = Tensor::randn({40, 52}, rng);
      const int row = rng.uniform_int(0, 39), col = rng.uniform_int(0, 51);
      Tensor out = crop_centered(rsrc, {row, col}, 16);
      const int r0 = std::max(0, std::min(row - 8, 40 - 16));
      const int c0 = std::max(0, std::min(col - 8, 52 - 16));
      for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c)
          CHECK(out[r * 16 + c] == rsrc[(r0 + r) * 52 + (c0 + c)]);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(crop_centered(src, {10, 10}, 63), std::invalid_argument);
    Tensor tiny({32, 32});
    CHECK_THROWS_AS(crop_centered(tiny, {16, 16}, 64), std::invalid_argument);
  }
}

TEST_CASE("assemble_sample normalization") {
  SUBCASE("constant channels map to zeros") {
    Tensor c = Tensor::full({8, 8}, 3.5f);
    ImageSample s = assemble_sample(c, c, c, {Risk::LOW, 1});
    for (std::int64_t i = 0; i < s.pixels.numel(); ++i)
      CHECK(s.pixels[i] == 0.0f);
  }
  SUBCASE("min-max arithmetic") {
    Tensor ch({2, 2}, {0.0f, 200.0f, 50.0f, 100.0f});
    ImageSample s = assemble_sample(ch, ch, ch, {Risk::LOW, 1});
    CHECK(s.pixels[0] == doctest::Approx(-1.0));
    CHECK(s.pixels[1] == doctest::Approx(1.0));
    CHECK(s.pixels[2] == doctest::Approx(-0.5));  // 2*(50/200)-1
  }
  SUBCASE("label passthrough") {
    Rng rng(2);
    Tensor a = Tensor::randn({4, 4}, rng), b = Tensor::randn({4, 4}, rng),
           c = Tensor::randn({4, 4}, rng);
    ImageSample s = assemble_sample(a, b, c, {Risk::HIGH, 4}, "case-1");
    CHECK(s.label.value == Risk::HIGH);
    CHECK(s.label.isup_group == 4);
    CHECK(s.source_id == "case-1");
  }
  SUBCASE("idempotent in range: re-normalizing leaves values unchanged") {
    Rng rng(3);
    Tensor a = Tensor::randn({6, 6}, rng), b = Tensor::randn({6, 6}, rng),
           c = Tensor::randn({6, 6}, rng);
    ImageSample s1 = assemble_sample(a, b, c, {Risk::LOW, 2});
    Tensor chans[3];
    for (int ch = 0; ch < 3; ++ch) {
      chans[ch] = Tensor({6, 6});
      std::memcpy(chans[ch].data(), s1.pixels.data() + ch * 36, 36 * 4);
    }
    ImageSample s2 = assemble_sample(chans[0], chans[1], chans[2], s1.label);
    for (std::int64_t i = 0; i < s1.pixels.numel(); ++i)
      CHECK(s2.pixels[i] == doctest::Approx(s1.pixels[i]).epsilon(1e-6));
  }
  SUBCASE("errors") {
    Tensor a({4, 4}), b({4, 5}), inf_t({4, 4});
    inf_t[3] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(assemble_sample(a, b, a, {Risk::LOW, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(assemble_sample(a, inf_t, a, {Risk::LOW, 1}),
                    std::invalid_argument);
  }
}

TEST_CASE("synthetic dataset: determinism, balance, planted factor") {
  auto d1 = make_synthetic_dataset(100, 7);
  auto d2 = make_synthetic_dataset(100, 7);
  REQUIRE(d1.size() == 100);
  for (std::size_t i = 0; i < d1.size(); ++i) {
    CHECK(tensors_equal(d1[i].pixels, d2[i].pixels));
    CHECK(d1[i].source_id == d2[i].source_id);
  }

  int low = 0, high = 0;
  for (const auto& s : d1) (s.label.value == Risk::LOW ? low : high)++;
  CHECK(low == 50);
  CHECK(high == 50);

  // planted factor forces the channel-1 (DWI) mean apart
  double mean_low = 0, mean_high = 0;
  for (const auto& s : d1) {
    double m = 0;
    const float* p = s.pixels.data() + 64 * 64;  // channel index 1
    for (int i = 0; i < 64 * 64; ++i) m += p[i];
    m /= 64 * 64;
    (s.label.value == Risk::LOW ? mean_low : mean_high) += m / 50.0;
  }
  CHECK(mean_high - mean_low > 0.0);

  CHECK_THROWS_AS(make_synthetic_dataset(99, 7), std::invalid_argument);
  CHECK_THROWS_AS(make_synthetic_dataset(0, 7), std::invalid_argument);
}

TEST_CASE("split_dataset: sizes, stratification, determinism, partition") {
  SUBCASE("10 samples at 0.8 -> 8/2") {
    auto d = make_synthetic_dataset(10, 3);
    auto sp = split_dataset(d, 0.8, 1);
    CHECK(sp.train.size() == 8);
    CHECK(sp.test.size() == 2);
  }
  SUBCASE("stratification: 100 balanced -> 40 of each class in train") {
    auto d = make_synthetic_dataset(100, 3);
    auto sp = split_dataset(d, 0.8, 9);
    int lo = 0, hi = 0;
    for (const auto& s : sp.train) (s.label.value == Risk::LOW ? lo : hi)++;
    CHECK(lo == 40);
    CHECK(hi == 40);
  }
  SUBCASE("same seed twice -> identical membership and order") {
    auto d = make_synthetic_dataset(20, 4);
    auto a = split_dataset(d, 0.7, 5);
    auto b = split_dataset(d, 0.7, 5);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i)
      CHECK(a.train[i].source_id == b.train[i].source_id);
    for (std::size_t i = 0; i < a.test.size(); ++i)
      CHECK(a.test[i].source_id == b.test[i].source_id);
  }
  SUBCASE("union equals input, intersection empty") {
    auto d = make_synthetic_dataset(30, 6);
    std::set<std::string> all;
    for (const auto& s : d) all.insert(s.source_id);
    auto sp = split_dataset(d, 0.8, 2);
    std::set<std::string> seen;
    for (const auto* grp : {&sp.train, &sp.test})
      for (const auto& s : *grp)
        CHECK(seen.insert(s.source_id).second);  // no duplicates across splits
    CHECK(seen == all);
  }
  SUBCASE("errors") {
    auto d = make_synthetic_dataset(2, 1);  // one per class
    CHECK_THROWS_AS(split_dataset(d, 0.5, 1), std::invalid_argument);
    auto d2 = make_synthetic_dataset(10, 1);
    CHECK_THROWS_AS(split_dataset(d2, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(d2, 1.0, 1), std::invalid_argument);
  }
}

TEST_CASE("dataset directory round trip is byte-stable") {
  fs::path dir = temp_dir("dataset");
  auto sp = split_dataset(make_synthetic_dataset(12, 8), 0.75, 3);
  save_dataset(dir.string(), sp);
  DatasetSplit loaded = load_dataset(dir.string());
  REQUIRE(loaded.train.size() == sp.train.size());
  REQUIRE(loaded.test.size() == sp.test.size());
  for (std::size_t i = 0; i < sp.train.size(); ++i) {
    CHECK(loaded.train[i].source_id == sp.train[i].source_id);
    CHECK(tensors_equal(loaded.train[i].pixels, sp.train[i].pixels));
    CHECK(loaded.train[i].label.isup_group == sp.train[i].label.isup_group);
  }

  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  const std::string index_before = slurp(dir / "index.json");
  save_dataset(dir.string(), sp);  // idempotent rewrite
  CHECK(slurp(dir / "index.json") == index_before);
}

namespace {

// Tiny NIfTI-1 writer for fixture volumes (int16 + scaling by default).
void write_test_nifti(const fs::path& path, int nx, int ny, int nz,
                      const std::vector<float>& vals, bool gz,
                      std::int16_t datatype = 4, float slope = 0.5f,
                      float inter = 10.0f) {
  std::vector<unsigned char> hdr(352, 0);
  auto put = [&](std::size_t off, auto v) { std::memcpy(hdr.data() + off, &v, sizeof(v)); };
  put(0, std::int32_t{348});
  put(40, std::int16_t{3});
  put(42, static_cast<std::int16_t>(nx));
  put(44, static_cast<std::int16_t>(ny));
  put(46, static_cast<std::int16_t>(nz));
  put(70, datatype);
  put(72, static_cast<std::int16_t>(datatype == 4 ? 16 : 32));
  put(108, 352.0f);  // vox_offset
  put(112, slope);
  put(116, inter);
  hdr[344] = 'n'; hdr[345] = '+'; hdr[346] = '1'; hdr[347] = '\0';

  std::vector<unsigned char> body;
  for (float v : vals) {
    if (datatype == 4) {
      auto raw = static_cast<std::int16_t>(v);
      const unsigned char* b = reinterpret_cast<const unsigned char*>(&raw);
      body.insert(body.end(), b, b + 2);
    } else {
      const unsigned char* b = reinterpret_cast<const unsigned char*>(&v);
      body.insert(body.end(), b, b + 4);
    }
  }
  if (gz) {
    gzFile f = gzopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    gzwrite(f, hdr.data(), static_cast<unsigned>(hdr.size()));
    gzwrite(f, body.data(), static_cast<unsigned>(body.size()));
    gzclose(f);
  } else {
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(hdr.data()), static_cast<std::streamsize>(hdr.size()));
    os.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  }
}

}  // namespace

TEST_CASE("nifti reader handles plain, gzipped and scaled volumes") {
  fs::path dir = temp_dir("nifti");
  std::vector<float> vals;
  for (int i = 0; i < 4 * 3 * 2; ++i) vals.push_back(static_cast<float>(i));

  write_test_nifti(dir / "a.nii", 4, 3, 2, vals, false);
  NiftiVolume v = read_nifti((dir / "a.nii").string());
  CHECK(v.nx == 4);
  CHECK(v.ny == 3);
  CHECK(v.nz == 2);
  // slope 0.5, inter 10
  CHECK(v.data[0] == doctest::Approx(10.0));
  CHECK(v.data[5] == doctest::Approx(12.5));

  write_test_nifti(dir / "b.nii.gz", 4, 3, 2, vals, true);
  NiftiVolume vg = read_nifti((dir / "b.nii.gz").string());
  for (std::size_t i = 0; i < v.data.size(); ++i)
    CHECK(vg.data[i] == v.data[i]);

  Tensor slice = nifti_slice(v, 1);
  CHECK(slice.dim(0) == 3);
  CHECK(slice.dim(1) == 4);
  CHECK(slice[0] == doctest::Approx(10.0f + 0.5f * 12));
  CHECK_THROWS_AS(nifti_slice(v, 2), std::out_of_range);

  // float32 without scaling
  write_test_nifti(dir / "c.nii", 2, 2, 1, {1, 2, 3, 4}, false, 16, 1.0f, 0.0f);
  NiftiVolume vf = read_nifti((dir / "c.nii").string());
  CHECK(vf.data[3] == doctest::Approx(4.0));

  std::ofstream bad(dir / "bad.nii", std::ios::binary);
  bad << "not a nifti file at all";
  bad.close();
  CHECK_THROWS(read_nifti((dir / "bad.nii").string()));
}

TEST_CASE("manifest parsing and nifti case assembly") {
  fs::path dir = temp_dir("manifest");
  {
    std::ofstream os(dir / "manifest.csv");
    os << "case_id,gleason_primary,gleason_secondary,centroid_row,centroid_col,slice_index\n";
    os << "case7, 4, 3, 8, 8, 0\n";
  }
  auto rows = read_manifest_csv((dir / "manifest.csv").string());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].case_id == "case7");
  CHECK(rows[0].gleason.primary == 4);
  CHECK(rows[0].slice_index == 0);

  std::vector<float> vals(16 * 16, 0.0f);
  for (int i = 0; i < 256; ++i) vals[static_cast<std::size_t>(i)] = static_cast<float>(i % 31);
  for (const char* sfx : {"t2w", "dwi", "adc"})
    write_test_nifti(dir / ("case7_" + std::string(sfx) + ".nii"), 16, 16, 1,
                     vals, false, 16, 1.0f, 0.0f);

  auto samples = load_nifti_cases(dir.string(), rows, 8);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].label.value == Risk::HIGH);  // 4+3 -> group 3
  CHECK(samples[0].pixels.shape() == std::vector<int>{3, 8, 8});
  CHECK(samples[0].source_id == "case7");

  {
    std::ofstream os(dir / "short.csv");
    os << "case_id,gleason_primary\n";
    os << "x,3\n";
  }
  CHECK_THROWS(read_manifest_csv((dir / "short.csv").string()));
}

TEST_CASE("stack_samples batches in order") {
  auto d = make_synthetic_dataset(4, 5, SyntheticConfig{.image_size = 16});
  std::vector<const ImageSample*> ptrs{&d[2], &d[0]};
  Tensor batch = stack_samples(ptrs);
  CHECK(batch.shape() == std::vector<int>{2, 3, 16, 16});
  CHECK(batch[0] == d[2].pixels[0]);
  CHECK(batch[batch.numel() - 1] == d[0].pixels[d[0].pixels.numel() - 1]);
}
