// Copyright 2026 The lfm-forge Authors
// SPDX-License-Identifier: Apache-2.0
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

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lfm/tensor.hpp"

namespace lfm {

// Named tensors. Ordered by name, which is also the on-disk order.
using Checkpoint = std::map<std::string, Tensor, std::less<>>;

// LFT1 container, little-endian:
//   "LFT1" | u32 count | per tensor: u16 name_len, name bytes, u8 dtype (0 = f32),
//   u8 ndim, ndim x u64 dims, raw f32 data.
void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::size_t element_count(const Checkpoint& ckpt);

// Names whose presence or shape differs between two checkpoints, sorted.
std::vector<std::string> incompatible_names(const Checkpoint& a,
                                            const Checkpoint& b);

// Throws CompatibilityError listing up to `max_listed` offenders when any
// checkpoint disagrees with the first one.
void require_compatible(const std::vector<std::reference_wrapper<const Checkpoint>>& ckpts,
                        std::size_t max_listed = 10);

}  // namespace lfm
