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
#include <functional>
#include <span>

#include "lfm/tensor.hpp"

namespace lfm {

// Thread cap for parallel kernels, read once from LFM_FORGE_THREADS.
int kernel_threads();

// out[.., j] = x[.., j] / sqrt(mean(x^2) + eps) * gain[j]
Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps);
void rms_norm_row(std::span<const float> x, std::span<const float> gain,
                  float eps, std::span<float> out);

// z[t, c] = bias[c] + sum_i weights[c, i] * y[t - i, c], zero for t - i < 0.
Tensor depthwise_causal_conv(const Tensor& y, const Tensor& weights,
                             const Tensor& bias);

// Rotary embedding over adjacent pairs (2j, 2j+1) of each head, with angle
// pos * base^(-2j / head_size). Positions start at first_position.
Tensor rope_rotate(const Tensor& q_or_k, float base,
                   std::size_t first_position = 0);
void rope_rotate_row(std::span<float> head, std::size_t position, float base);

// Softmax over the last axis. A non-empty mask (same size as x, nonzero =
// keep) zeroes masked entries; a fully masked row is a domain error.
Tensor softmax_last(const Tensor& x, std::span<const std::uint8_t> mask = {});

float silu(float u);

// x[.., in] * w[in, out] -> [.., out]
Tensor matmul(const Tensor& x, const Tensor& w);
// out[out_cols] = x[in] * w[in, out_cols]; overwrites out.
void matvec(std::span<const float> x, const Tensor& w, std::span<float> out);

// (silu(x W_gate) * (x W_up)) W_down
Tensor swiglu(const Tensor& x, const Tensor& w_gate, const Tensor& w_up,
              const Tensor& w_down);

double logsumexp(std::span<const float> x);

using ScalarFn = std::function<double(const Tensor&)>;

// Central differences with the step measured on the perturbed float32
// coordinates, so rounding of x +/- h does not bias the quotient.
Tensor fd_gradient(const ScalarFn& f, const Tensor& x, double h = 1e-3);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(std::span<const float> a, std::span<const float> b,
                          double floor = 1e-8);

}  // namespace lfm
