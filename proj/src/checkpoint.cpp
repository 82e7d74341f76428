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

#include "lfm/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "lfm/error.hpp"

namespace lfm {
namespace {

constexpr std::array<char, 4> kMagic = {'L', 'F', 'T', '1'};
constexpr std::uint8_t kDtypeF32 = 0;

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = char((value >> (8 * i)) & 0xff);
  }
  os.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& is, const char* what) {
  std::array<unsigned char, sizeof(T)> buf;
  if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
    throw FormatError(std::string("LFT1: truncated while reading ") + what);
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= T(buf[i]) << (8 * i);
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os.write(kMagic.data(), kMagic.size());
  if (ckpt.size() > 0xffffffffULL) throw FormatError("LFT1: too many tensors");
  put_le<std::uint32_t>(os, std::uint32_t(ckpt.size()));
  for (const auto& [name, t] : ckpt) {
    if (name.size() > 0xffff) {
      throw FormatError("LFT1: tensor name longer than 65535 bytes: " +
                        name.substr(0, 32) + "...");
    }
    if (t.rank() > 0xff) throw FormatError("LFT1: rank above 255 for " + name);
    put_le<std::uint16_t>(os, std::uint16_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    put_le<std::uint8_t>(os, kDtypeF32);
    put_le<std::uint8_t>(os, std::uint8_t(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(os, d);
    for (float v : t.data()) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
  }
  if (!os) throw FormatError("LFT1: write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("LFT1: bad magic");
  }
  const auto count = get_le<std::uint32_t>(is, "tensor count");
  Checkpoint ckpt;
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto name_len = get_le<std::uint16_t>(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw FormatError("LFT1: truncated name");
    const auto dtype = get_le<std::uint8_t>(is, "dtype");
    if (dtype != kDtypeF32) {
      throw FormatError("LFT1: unsupported dtype " + std::to_string(dtype) +
                        " for " + name);
    }
    const auto ndim = get_le<std::uint8_t>(is, "ndim");
    Shape shape(ndim);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      const auto v = get_le<std::uint64_t>(is, "dims");
      if (v == 0) throw FormatError("LFT1: zero dimension in " + name);
      if (total > (std::uint64_t(1) << 40) / v) {
        throw FormatError("LFT1: implausible tensor size for " + name);
      }
      total *= v;
      d = std::size_t(v);
    }
    std::vector<float> data(total);
    for (auto& v : data) v = std::bit_cast<float>(get_le<std::uint32_t>(is, "data"));
    if (!ckpt.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
      throw FormatError("LFT1: duplicate tensor name " + name);
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_checkpoint(is);
}

std::size_t element_count(const Checkpoint& ckpt) {
  std::size_t n = 0;
  for (const auto& [name, t] : ckpt) n += t.size();
  return n;
}

std::vector<std::string> incompatible_names(const Checkpoint& a,
                                            const Checkpoint& b) {
  std::set<std::string> bad;
  for (const auto& [name, t] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second.shape() != t.shape()) bad.insert(name);
  }
  for (const auto& [name, t] : b) {
    if (!a.contains(name)) bad.insert(name);
  }
  return {bad.begin(), bad.end()};
}

void require_compatible(const std::vector<std::reference_wrapper<const Checkpoint>>& ckpts,
                        std::size_t max_listed) {
  if (ckpts.empty()) return;
  std::set<std::string> bad;
  for (std::size_t i = 1; i < ckpts.size(); ++i) {
    for (auto& n : incompatible_names(ckpts[0], ckpts[i])) bad.insert(n);
  }
  if (bad.empty()) return;
  std::string msg = "incompatible checkpoints: " + std::to_string(bad.size()) +
                    " tensor(s) differ in name or shape:";
  std::size_t listed = 0;
  for (const auto& n : bad) {
    if (listed++ == max_listed) {
      msg += " ...";
      break;
    }
    msg += " " + n;
  }
  throw CompatibilityError(msg);
}

}  // namespace lfm
