// Copyright 2026 The ProjectedEx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "projectedex/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "projectedex/nifti.hpp"

namespace projectedex {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Risk r) { return r == Risk::LOW ? "LOW" : "HIGH"; }

Risk risk_from_string(const std::string& s) {
  if (s == "LOW") return Risk::LOW;
  if (s == "HIGH") return Risk::HIGH;
  throw std::invalid_argument("unknown risk label '" + s + "'");
}

RiskLabel map_isup_to_risk(const GleasonScore& score) {
  if (score.primary < 3 || score.primary > 5 || score.secondary < 3 ||
      score.secondary > 5)
    throw std::invalid_argument("Gleason component grades must be in [3,5]");
  const int total = score.primary + score.secondary;
  int group;
  if (total <= 6)
    group = 1;
  else if (score.primary == 3 && score.secondary == 4)
    group = 2;
  else if (score.primary == 4 && score.secondary == 3)
    group = 3;
  else if (total == 8)
    group = 4;
  else
    group = 5;  // total 9 or 10
  return {group <= 2 ? Risk::LOW : Risk::HIGH, group};
}

Tensor crop_centered(const Tensor& slice, std::pair<int, int> centroid,
                     int size) {
  if (slice.ndim() != 2)
    throw std::invalid_argument("crop_centered: expected a 2-d slice");
  const int h = slice.dim(0), w = slice.dim(1);
  if (size % 2 != 0) throw std::invalid_argument("crop_centered: size must be even");
  if (size > std::min(h, w))
    throw std::invalid_argument("crop_centered: size exceeds source extent");

  auto clamp_start = [size](int c, int extent) {
    int start = c - size / 2;
    start = std::max(0, std::min(start, extent - size));
    return start;
  };
  const int r0 = clamp_start(centroid.first, h);
  const int c0 = clamp_start(centroid.second, w);

  Tensor out({size, size});
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      out[r * size + c] = slice[(r0 + r) * w + (c0 + c)];
  return out;
}

namespace {

// In-place min-max to [-1,1]; constant input maps to zeros.
void normalize_channel(float* p, std::int64_t n) {
  float lo = p[0], hi = p[0];
  for (std::int64_t i = 0; i < n; ++i) {
    lo = std::min(lo, p[i]);
    hi = std::max(hi, p[i]);
  }
  if (hi == lo) {
    for (std::int64_t i = 0; i < n; ++i) p[i] = 0.0f;
    return;
  }
  const float scale = 2.0f / (hi - lo);
  for (std::int64_t i = 0; i < n; ++i) p[i] = (p[i] - lo) * scale - 1.0f;
}

}  // namespace

ImageSample assemble_sample(const Tensor& t2, const Tensor& dwi,
                            const Tensor& adc, const RiskLabel& label,
                            std::string source_id,
                            std::pair<int, int> centroid) {
  if (!t2.same_shape(dwi) || !t2.same_shape(adc))
    throw std::invalid_argument("assemble_sample: channel shape mismatch");
  if (t2.ndim() != 2)
    throw std::invalid_argument("assemble_sample: channels must be 2-d");
  if (!t2.all_finite() || !dwi.all_finite() || !adc.all_finite())
    throw std::invalid_argument("assemble_sample: non-finite input");

  const int h = t2.dim(0), w = t2.dim(1);
  Tensor pixels({3, h, w});
  const Tensor* chans[3] = {&t2, &dwi, &adc};
  for (int c = 0; c < 3; ++c) {
    float* dst = pixels.data() + static_cast<std::int64_t>(c) * h * w;
    const float* src = chans[c]->data();
    std::copy(src, src + h * w, dst);
    normalize_channel(dst, static_cast<std::int64_t>(h) * w);
  }
  return {std::move(pixels), label, std::move(source_id), centroid};
}

std::vector<ImageSample> make_synthetic_dataset(int n, std::uint64_t seed,
                                                const SyntheticConfig& cfg) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("make_synthetic_dataset: n must be even and >= 2");
  const int s = cfg.image_size;

  auto add_gaussian = [s](Tensor& ch, double cy, double cx, double amp,
                          double sigma) {
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    float* p = ch.data();
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        p[r * s + c] += static_cast<float>(amp * std::exp(-d2 * inv2s2));
      }
  };
  const double centre = (s - 1) / 2.0;

  std::vector<ImageSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(i)));
    const bool high = i >= n / 2;

    Tensor chans[3] = {Tensor({s, s}), Tensor({s, s}), Tensor({s, s})};
    for (auto& ch : chans) {
      // fixed synthetic anatomy
      add_gaussian(ch, centre, centre, cfg.gland_intensity, cfg.gland_sigma);
      add_gaussian(ch, centre, centre, cfg.core_intensity, cfg.core_sigma);
      // smooth random texture (class-independent nuisance)
      for (int k = 0; k < cfg.texture_components; ++k) {
        const double fr = rng.uniform(1.0, 4.0) / s;
        const double fc = rng.uniform(1.0, 4.0) / s;
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double amp = cfg.texture_amplitude * rng.uniform(0.3, 1.0);
        float* p = ch.data();
        for (int r = 0; r < s; ++r)
          for (int c = 0; c < s; ++c)
            p[r * s + c] += static_cast<float>(
                amp * std::sin(2.0 * M_PI * (fr * r + fc * c) + phase));
      }
    }

    // blob position jitter is drawn for every sample so the two classes
    // differ only in the planted factor itself
    const double offset =
        rng.uniform(cfg.blob_offset_min, cfg.blob_offset_max);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    if (high) {
      add_gaussian(chans[1],  // DWI channel
                   centre + offset * std::sin(angle),
                   centre + offset * std::cos(angle), cfg.blob_intensity,
                   cfg.blob_sigma);
    }

    std::ostringstream id;
    id << "syn-" << std::setw(5) << std::setfill('0') << i;
    RiskLabel label = high ? RiskLabel{Risk::HIGH, 3} : RiskLabel{Risk::LOW, 1};
    out.push_back(assemble_sample(chans[0], chans[1], chans[2], label,
                                  id.str(), {s / 2, s / 2}));
  }
  return out;
}

DatasetSplit split_dataset(std::vector<ImageSample> samples, double ratio,
                           std::uint64_t seed) {
  if (ratio <= 0.0 || ratio >= 1.0)
    throw std::invalid_argument("split_dataset: ratio must be in (0,1)");

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_class[samples[i].label.value == Risk::HIGH ? 1 : 0].push_back(i);
  for (const auto& idx : by_class)
    if (idx.size() < 2)
      throw std::invalid_argument(
          "split_dataset: need at least 2 samples per class");

  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  for (int cls = 0; cls < 2; ++cls) {
    auto& idx = by_class[cls];
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(cls)));
    // Fisher-Yates
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1],
                idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(idx.size())));
    n_train = std::max<std::size_t>(1, std::min(n_train, idx.size() - 1));
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_train ? split.train : split.test)
          .push_back(std::move(samples[idx[i]]));
  }
  return split;
}

namespace {

constexpr char kSampleMagic[8] = {'P', 'X', 'S', 'A', 'M', 'P', '0', '1'};

void write_sample_bin(const fs::path& path, const Tensor& pixels) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kSampleMagic, 8);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(pixels.dim(0)),
                                 static_cast<std::uint32_t>(pixels.dim(1)),
                                 static_cast<std::uint32_t>(pixels.dim(2))};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.numel() * 4));
}

Tensor read_sample_bin(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (std::string(magic, 8) != std::string(kSampleMagic, 8))
    throw std::runtime_error("bad sample file " + path.string());
  std::uint32_t dims[3];
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  Tensor t({static_cast<int>(dims[0]), static_cast<int>(dims[1]),
            static_cast<int>(dims[2])});
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * 4));
  if (!is) throw std::runtime_error("truncated sample file " + path.string());
  return t;
}

json sample_index_entry(const ImageSample& s, const std::string& split_name) {
  return json{{"id", s.source_id},
              {"label", to_string(s.label.value)},
              {"isup", s.label.isup_group},
              {"split", split_name},
              {"file", "samples/" + s.source_id + ".bin"},
              {"centroid", {s.centroid.first, s.centroid.second}}};
}

}  // namespace

void save_dataset(const std::string& dir, const DatasetSplit& split) {
  fs::create_directories(fs::path(dir) / "samples");
  json index;
  index["format"] = "projectedex-dataset";
  index["version"] = 1;
  index["seed"] = split.seed;
  index["ratio"] = split.ratio;
  index["samples"] = json::array();
  for (const auto* group : {&split.train, &split.test}) {
    const std::string name = group == &split.train ? "train" : "test";
    for (const auto& s : *group) {
      write_sample_bin(fs::path(dir) / "samples" / (s.source_id + ".bin"),
                       s.pixels);
      index["samples"].push_back(sample_index_entry(s, name));
    }
  }
  std::ofstream os(fs::path(dir) / "index.json", std::ios::trunc);
  os << index.dump(2) << "\n";
}

DatasetSplit load_dataset(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "index.json");
  if (!is)
    throw std::runtime_error("load_dataset: missing index.json in " + dir);
  json index = json::parse(is);
  if (index.value("format", "") != "projectedex-dataset")
    throw std::runtime_error("load_dataset: not a dataset directory: " + dir);

  DatasetSplit split;
  split.seed = index.value("seed", 0ULL);
  split.ratio = index.value("ratio", 0.8);
  for (const auto& e : index.at("samples")) {
    ImageSample s;
    s.source_id = e.at("id").get<std::string>();
    s.label.value = risk_from_string(e.at("label").get<std::string>());
    s.label.isup_group = e.at("isup").get<int>();
    s.centroid = {e.at("centroid")[0].get<int>(), e.at("centroid")[1].get<int>()};
    s.pixels = read_sample_bin(fs::path(dir) / e.at("file").get<std::string>());
    (e.at("split").get<std::string>() == "train" ? split.train : split.test)
        .push_back(std::move(s));
  }
  return split;
}

std::vector<ManifestRow> read_manifest_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest " + path);

  auto split_line = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) {
      // trim
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return cells;
  };

  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("manifest is empty: " + path);
  const std::vector<std::string> header = split_line(line);
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("manifest missing column '" + name + "'");
  };
  const std::size_t c_id = col("case_id");
  const std::size_t c_gp = col("gleason_primary");
  const std::size_t c_gs = col("gleason_secondary");
  const std::size_t c_cr = col("centroid_row");
  const std::size_t c_cc = col("centroid_col");
  const std::size_t c_si = col("slice_index");

  std::vector<ManifestRow> rows;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line);
    ManifestRow r;
    r.case_id = cells.at(c_id);
    r.gleason.primary = std::stoi(cells.at(c_gp));
    r.gleason.secondary = std::stoi(cells.at(c_gs));
    r.centroid_row = std::stoi(cells.at(c_cr));
    r.centroid_col = std::stoi(cells.at(c_cc));
    r.slice_index = std::stoi(cells.at(c_si));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ImageSample> load_nifti_cases(const std::string& data_dir,
                                          const std::vector<ManifestRow>& rows,
                                          int crop_size) {
  auto find_volume = [&](const std::string& case_id, const char* suffix) {
    for (const char* ext : {".nii", ".nii.gz"}) {
      fs::path p = fs::path(data_dir) / (case_id + "_" + suffix + ext);
      if (fs::exists(p)) return p;
    }
    throw std::runtime_error("missing " + std::string(suffix) +
                             " volume for case " + case_id + " in " + data_dir);
  };

  std::vector<ImageSample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    const RiskLabel label = map_isup_to_risk(r.gleason);
    Tensor mods[3];
    const char* suffixes[3] = {"t2w", "dwi", "adc"};
    for (int m = 0; m < 3; ++m) {
      NiftiVolume vol = read_nifti(find_volume(r.case_id, suffixes[m]).string());
      Tensor slice = nifti_slice(vol, r.slice_index);
      mods[m] = crop_centered(slice, {r.centroid_row, r.centroid_col}, crop_size);
    }
    out.push_back(assemble_sample(mods[0], mods[1], mods[2], label, r.case_id,
                                  {r.centroid_row, r.centroid_col}));
  }
  return out;
}

Tensor stack_samples(const std::vector<const ImageSample*>& samples) {
  if (samples.empty())
    throw std::invalid_argument("stack_samples: empty batch");
  const auto& shape = samples[0]->pixels.shape();
  Tensor out({static_cast<int>(samples.size()), shape[0], shape[1], shape[2]});
  const std::int64_t per = samples[0]->pixels.numel();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i]->pixels.shape() != shape)
      throw std::invalid_argument("stack_samples: inconsistent sample shapes");
    std::copy(samples[i]->pixels.data(), samples[i]->pixels.data() + per,
              out.data() + static_cast<std::int64_t>(i) * per);
  }
  return out;
}

}  // namespace projectedex
