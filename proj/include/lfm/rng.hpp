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

#include <cstdint>
#include <random>
#include <string_view>

namespace lfm {

struct RngSeed {
  std::uint64_t value = 0;
};

// SplitMix64 finalizer, used to decorrelate derived stream seeds.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a over the bytes of a name. Stable across platforms, unlike std::hash.
std::uint64_t name_hash(std::string_view name);

// Independent generator for a named stream (tensor name, model index).
std::mt19937_64 stream_for(RngSeed seed, std::string_view name,
                           std::uint64_t index = 0);

// Uniform double in [0, 1) built from the top 53 bits.
double uniform01(std::mt19937_64& gen);

// Standard normal via Box-Muller on uniform01, so streams do not depend on
// the standard library's distribution implementation.
double standard_normal(std::mt19937_64& gen);

}  // namespace lfm
