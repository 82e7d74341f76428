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

#include <stdexcept>
#include <string>

namespace lfm {

// Base class for every error raised by the library. The concrete subclasses
// mirror the error kinds named in the operation contracts.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Inconsistent hyperparameters (model geometry, merge ranges, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A numeric evaluation produced NaN or Inf.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Caller-supplied data is malformed (bad ids, empty batches, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Context or cache capacity exceeded.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Checkpoints whose names or shapes disagree.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

// Binary container could not be decoded.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace lfm
