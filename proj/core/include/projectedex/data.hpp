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

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "projectedex/tensor.hpp"

namespace projectedex {

// Gleason pattern grades, each in [3,5].
struct GleasonScore {
  int primary = 3;
  int secondary = 3;
};

enum class Risk { LOW, HIGH };

std::string to_string(Risk r);
Risk risk_from_string(const std::string& s);

struct RiskLabel {
  Risk value = Risk::LOW;
  int isup_group = 1;  // 1..5
};

// ISUP Grade Group from the Gleason pair: 3+3 -> 1, 3+4 -> 2, 4+3 -> 3,
// total 8 -> 4, total 9 or 10 -> 5. Groups <= 2 are low risk.
RiskLabel map_isup_to_risk(const GleasonScore& score);

// One training sample: channels ordered (T2WI, DWI, ADC), values in [-1,1].
struct ImageSample {
  Tensor pixels;  // [3, S, S]
  RiskLabel label;
  std::string source_id;
  std::pair<int, int> centroid{0, 0};  // (row, col) in source coordinates
};

// Square window of `size` around the centroid, translated (never padded) to
// stay inside the source.
Tensor crop_centered(const Tensor& slice, std::pair<int, int> centroid,
                     int size);

// Stacks the three modality crops, min-max normalizing each channel to
// [-1,1]; a constant channel becomes all zeros.
ImageSample assemble_sample(const Tensor& t2, const Tensor& dwi,
                            const Tensor& adc, const RiskLabel& label,
                            std::string source_id = {},
                            std::pair<int, int> centroid = {0, 0});

// Planted-attribute benchmark. Every sample shares a fixed synthetic anatomy
// (a broad gland plus a small bright core whose peak pins the channel maximum
// for both classes, so per-sample min-max normalization keeps the classes
// comparable) and smooth random background texture. HIGH additionally
// carries a bright Gaussian blob in the DWI channel at a jittered offset
// from the centre. Deterministic in (n, seed).
struct SyntheticConfig {
  int image_size = 64;
  float blob_intensity = 1.3f;   // amplitude of the planted factor
  float blob_sigma = 14.0f;      // pixels
  float blob_offset_min = 10.0f; // blob-centre distance from the image centre
  float blob_offset_max = 18.0f;
  int texture_components = 6;    // background sinusoids per channel
  float texture_amplitude = 0.15f;
  float gland_intensity = 2.0f;  // shared anatomy
  float gland_sigma = 18.0f;
  float core_intensity = 3.5f;   // bright anchor; must stay above blob peaks
  float core_sigma = 2.5f;
};

std::vector<ImageSample> make_synthetic_dataset(int n, std::uint64_t seed,
                                                const SyntheticConfig& cfg = {});

struct DatasetSplit {
  std::vector<ImageSample> train;
  std::vector<ImageSample> test;
  std::uint64_t seed = 0;
  double ratio = 0.8;
};

// Seeded shuffle, then a stratified partition per label.
DatasetSplit split_dataset(std::vector<ImageSample> samples, double ratio,
                           std::uint64_t seed);

// Dataset directory: samples/<id>.bin arrays plus an index.json with
// (id, label, isup, split, centroid). Rewriting is byte-identical.
void save_dataset(const std::string& dir, const DatasetSplit& split);
DatasetSplit load_dataset(const std::string& dir);

// Real-data ingestion: per-case NIfTI volumes named
// <case_id>_{t2w,dwi,adc}.nii[.gz] next to a CSV manifest.
struct ManifestRow {
  std::string case_id;
  GleasonScore gleason;
  int centroid_row = 0;
  int centroid_col = 0;
  int slice_index = 0;
};

std::vector<ManifestRow> read_manifest_csv(const std::string& path);
std::vector<ImageSample> load_nifti_cases(const std::string& data_dir,
                                          const std::vector<ManifestRow>& rows,
                                          int crop_size);

// [N,3,S,S] batch from sample pointers, in the given order.
Tensor stack_samples(const std::vector<const ImageSample*>& samples);

}  // namespace projectedex
