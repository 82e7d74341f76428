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

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "lfm/distill.hpp"
#include "lfm/error.hpp"

namespace lfm {
namespace {

constexpr std::array<char, 4> kMagic{'T', 'K', 'D', '1'};

template <typename T>
void put_le(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  U bits = std::bit_cast<U>(value);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = char((bits >> (8 * i)) & 0xFFu);
  os.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw FormatError("Top-K file truncated");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= U(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

// Layout: magic, u32 vocab, u16 K, u64 record count, then per record
// K u32 indices, K f32 logits, one f32 tail log-sum-exp.
void write_topk_file(std::ostream& os, const TopKFile& file) {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, file.vocab_size);
  put_le<std::uint16_t>(os, file.k);
  put_le<std::uint64_t>(os, file.records.size());
  for (const auto& r : file.records) {
    if (r.k() != file.k || r.vocab_size != file.vocab_size) {
      throw InputError("Top-K record does not match file header");
    }
    r.validate();
    for (auto idx : r.indices) put_le<std::uint32_t>(os, idx);
    for (float v : r.teacher_logits) put_le<float>(os, v);
    put_le<float>(os, r.tail_logsumexp);
  }
  if (!os) throw FormatError("failed to write Top-K file");
}

TopKFile read_topk_file(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("not a Top-K file (bad magic)");
  }
  TopKFile file;
  file.vocab_size = get_le<std::uint32_t>(is);
  file.k = get_le<std::uint16_t>(is);
  const auto count = get_le<std::uint64_t>(is);
  if (file.k == 0 || file.k > file.vocab_size) {
    throw FormatError("Top-K file header has invalid K");
  }
  for (std::uint64_t n = 0; n < count; ++n) {
    TopKRecord r;
    r.vocab_size = file.vocab_size;
    r.indices.resize(file.k);
    r.teacher_logits.resize(file.k);
    for (auto& idx : r.indices) idx = get_le<std::uint32_t>(is);
    for (auto& v : r.teacher_logits) v = get_le<float>(is);
    r.tail_logsumexp = get_le<float>(is);
    try {
      r.validate();
    } catch (const InputError& e) {
      throw FormatError("record " + std::to_string(n) + ": " + e.what());
    }
    file.records.push_back(std::move(r));
  }
  return file;
}

}  // namespace lfm
