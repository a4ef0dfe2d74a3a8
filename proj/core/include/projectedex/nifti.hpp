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

#include <string>
#include <vector>

#include "projectedex/tensor.hpp"

namespace projectedex {

// Minimal NIfTI-1 volume. Data is converted to float with scl_slope/inter
// applied; x varies fastest, as stored on disk.
struct NiftiVolume {
  int nx = 0, ny = 0, nz = 0;
  std::vector<float> data;
};

// Reads single-file .nii or .nii.gz (zlib handles both transparently).
// Supports little-endian files with datatypes u8, i16, u16, i32, f32, f64.
NiftiVolume read_nifti(const std::string& path);

// Axial slice z as a [ny, nx] matrix (row index = y).
Tensor nifti_slice(const NiftiVolume& vol, int z);

}  // namespace projectedex
