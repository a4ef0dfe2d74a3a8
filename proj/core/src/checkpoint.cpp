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

#include "projectedex/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace projectedex {

namespace {

constexpr char kMagic[8] = {'P', 'X', 'A', 'R', 'C', 'H', '0', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);  // little-endian hosts only
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

}  // namespace

const Tensor& Archive::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw std::runtime_error("Archive: missing tensor '" + name + "'");
  return it->second;
}

void Archive::save(const std::string& path) const {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("Archive: cannot open " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, static_cast<std::uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
      write_str(os, k);
      write_str(os, v);
    }
    write_u32(os, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& [name, t] : tensors_) {
      write_str(os, name);
      write_u32(os, static_cast<std::uint32_t>(t.ndim()));
      for (int i = 0; i < t.ndim(); ++i)
        write_u32(os, static_cast<std::uint32_t>(t.dim(i)));
      os.write(reinterpret_cast<const char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * 4));
    }
    if (!os) throw std::runtime_error("Archive: write failed for " + path);
  }
  fs::rename(tmp, target);
}

Archive Archive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("Archive: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    throw std::runtime_error("Archive: bad magic in " + path);

  Archive a;
  const std::uint32_t nmeta = read_u32(is);
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = read_str(is);
    a.meta[k] = read_str(is);
  }
  const std::uint32_t ntensor = read_u32(is);
  for (std::uint32_t i = 0; i < ntensor; ++i) {
    std::string name = read_str(is);
    const std::uint32_t ndim = read_u32(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(is));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * 4));
    a.tensors_[name] = std::move(t);
  }
  if (!is) throw std::runtime_error("Archive: truncated file " + path);
  return a;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace projectedex
