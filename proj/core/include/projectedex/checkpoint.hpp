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
#include <map>
#include <string>

#include "projectedex/tensor.hpp"

namespace projectedex {

// Single-file archive of named float32 arrays plus a string metadata header.
// The layout is fully determined by content (entries sorted by name, no
// timestamps), so save -> load -> save round-trips byte-identically.
class Archive {
 public:
  std::map<std::string, std::string> meta;

  void put(const std::string& name, Tensor t) { tensors_[name] = std::move(t); }
  bool has(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  std::string meta_or(const std::string& key, const std::string& fallback) const {
    auto it = meta.find(key);
    return it == meta.end() ? fallback : it->second;
  }

  // Writes to a temporary file in the same directory, then renames.
  void save(const std::string& path) const;
  static Archive load(const std::string& path);

 private:
  std::map<std::string, Tensor> tensors_;
};

// FNV-1a over a string; stable across platforms (used for config hashes).
std::uint64_t fnv1a64(const std::string& s);

}  // namespace projectedex
