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

#include "projectedex/nifti.hpp"

#include <zlib.h>

#include <cstring>
#include <stdexcept>

namespace projectedex {

namespace {

// NIfTI-1 datatype codes
enum : std::int16_t {
  kDtUint8 = 2,
  kDtInt16 = 4,
  kDtInt32 = 8,
  kDtFloat32 = 16,
  kDtFloat64 = 64,
  kDtUint16 = 512,
};

std::vector<unsigned char> read_all(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("nifti: cannot open " + path);
  std::vector<unsigned char> buf;
  unsigned char chunk[1 << 16];
  int n;
  while ((n = gzread(f, chunk, sizeof(chunk))) > 0)
    buf.insert(buf.end(), chunk, chunk + n);
  const bool bad = n < 0;
  gzclose(f);
  if (bad) throw std::runtime_error("nifti: decompression failed for " + path);
  return buf;
}

template <typename T>
T at(const std::vector<unsigned char>& b, std::size_t offset) {
  T v;
  std::memcpy(&v, b.data() + offset, sizeof(T));
  return v;
}

}  // namespace

NiftiVolume read_nifti(const std::string& path) {
  const std::vector<unsigned char> raw = read_all(path);
  if (raw.size() < 352) throw std::runtime_error("nifti: truncated header in " + path);

  const std::int32_t sizeof_hdr = at<std::int32_t>(raw, 0);
  if (sizeof_hdr != 348)
    throw std::runtime_error(
        "nifti: unsupported header (expect little-endian NIfTI-1) in " + path);
  const char* magic = reinterpret_cast<const char*>(raw.data() + 344);
  if (std::strncmp(magic, "n+1", 3) != 0)
    throw std::runtime_error("nifti: only single-file n+1 volumes supported: " +
                             path);

  const std::int16_t ndim = at<std::int16_t>(raw, 40);
  if (ndim < 2 || ndim > 4)
    throw std::runtime_error("nifti: expected a 2-d..4-d volume in " + path);
  NiftiVolume vol;
  vol.nx = at<std::int16_t>(raw, 42);
  vol.ny = at<std::int16_t>(raw, 44);
  vol.nz = ndim >= 3 ? at<std::int16_t>(raw, 46) : 1;

  const std::int16_t datatype = at<std::int16_t>(raw, 70);
  float scl_slope = at<float>(raw, 112);
  const float scl_inter = at<float>(raw, 116);
  if (scl_slope == 0.0f) scl_slope = 1.0f;
  const auto vox_offset = static_cast<std::size_t>(at<float>(raw, 108));

  const std::size_t n =
      static_cast<std::size_t>(vol.nx) * vol.ny * vol.nz;
  vol.data.resize(n);

  auto require = [&](std::size_t bytes) {
    if (raw.size() < vox_offset + bytes)
      throw std::runtime_error("nifti: truncated voxel data in " + path);
  };
  const unsigned char* src = raw.data() + vox_offset;
  switch (datatype) {
    case kDtUint8:
      require(n);
      for (std::size_t i = 0; i < n; ++i) vol.data[i] = src[i];
      break;
    case kDtInt16:
      require(n * 2);
      for (std::size_t i = 0; i < n; ++i)
        vol.data[i] = at<std::int16_t>(raw, vox_offset + 2 * i);
      break;
    case kDtUint16:
      require(n * 2);
      for (std::size_t i = 0; i < n; ++i)
        vol.data[i] = at<std::uint16_t>(raw, vox_offset + 2 * i);
      break;
    case kDtInt32:
      require(n * 4);
      for (std::size_t i = 0; i < n; ++i)
        vol.data[i] = static_cast<float>(at<std::int32_t>(raw, vox_offset + 4 * i));
      break;
    case kDtFloat32:
      require(n * 4);
      for (std::size_t i = 0; i < n; ++i)
        vol.data[i] = at<float>(raw, vox_offset + 4 * i);
      break;
    case kDtFloat64:
      require(n * 8);
      for (std::size_t i = 0; i < n; ++i)
        vol.data[i] = static_cast<float>(at<double>(raw, vox_offset + 8 * i));
      break;
    default:
      throw std::runtime_error("nifti: unsupported datatype " +
                               std::to_string(datatype) + " in " + path);
  }
  if (scl_slope != 1.0f || scl_inter != 0.0f)
    for (auto& v : vol.data) v = v * scl_slope + scl_inter;
  return vol;
}

Tensor nifti_slice(const NiftiVolume& vol, int z) {
  if (z < 0 || z >= vol.nz)
    throw std::out_of_range("nifti_slice: slice " + std::to_string(z) +
                            " outside [0," + std::to_string(vol.nz) + ")");
  Tensor out({vol.ny, vol.nx});
  const std::size_t base =
      static_cast<std::size_t>(z) * vol.nx * vol.ny;
  for (int y = 0; y < vol.ny; ++y)
    for (int x = 0; x < vol.nx; ++x)
      out[y * vol.nx + x] = vol.data[base + static_cast<std::size_t>(y) * vol.nx + x];
  return out;
}

}  // namespace projectedex
