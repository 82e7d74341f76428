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

#include "lfm/tokenizer.hpp"

namespace lfm {

std::vector<TokenId> byte_tokenize(std::string_view text) {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(TokenId(c));
  return ids;
}

std::string byte_detokenize(const std::vector<TokenId>& ids) {
  std::string out;
  for (TokenId id : ids) {
    if (id < 256) out.push_back(char(id));
  }
  return out;
}

}  // namespace lfm
