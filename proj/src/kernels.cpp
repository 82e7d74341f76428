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

#include "lfm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "lfm/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lfm {

int kernel_threads() {
  static const int threads = [] {
    int n = 1;
#ifdef _OPENMP
    n = omp_get_max_threads();
#endif
    if (const char* env = std::getenv("LFM_FORGE_THREADS")) {
      int cap = std::atoi(env);
      if (cap > 0) n = std::min(n, cap);
    }
    return std::max(n, 1);
  }();
  return threads;
}

static void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

void rms_norm_row(std::span<const float> x, std::span<const float> gain,
                  float eps, std::span<float> out) {
  double ss = 0.0;
  for (float v : x) ss += double(v) * double(v);
  const float inv = float(1.0 / std::sqrt(ss / double(x.size()) + double(eps)));
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] * inv * gain[j];
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps) {
  if (!(eps > 0.0f)) throw DomainError("rms_norm: eps must be positive");
  require(gain.rank() == 1 && x.rank() >= 1 && x.cols() == gain.size(),
          "rms_norm: last axis " + shape_string(x.shape()) +
              " does not match gain " + shape_string(gain.shape()));
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    rms_norm_row(x.row(r), gain.data(), eps, out.row(r));
  }
  return out;
}

Tensor depthwise_causal_conv(const Tensor& y, const Tensor& weights,
                             const Tensor& bias) {
  require(y.rank() == 2, "depthwise_causal_conv: y must be [L, d]");
  const std::size_t len = y.dim(0), d = y.dim(1);
  require(weights.rank() == 2 && weights.dim(0) == d,
          "depthwise_causal_conv: weights must be [d, k]");
  require(bias.rank() == 1 && bias.size() == d,
          "depthwise_causal_conv: bias must be [d]");
  const std::size_t k = weights.dim(1);
  Tensor z(y.shape());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < d; ++c) {
      float acc = bias[c];
      for (std::size_t i = 0; i < k && i <= t; ++i) {
        acc += weights.at(c, i) * y.at(t - i, c);
      }
      z.at(t, c) = acc;
    }
  }
  return z;
}

void rope_rotate_row(std::span<float> head, std::size_t position, float base) {
  const std::size_t s = head.size();
  for (std::size_t j = 0; j < s / 2; ++j) {
    const double angle =
        double(position) * std::pow(double(base), -2.0 * double(j) / double(s));
    const float c = float(std::cos(angle));
    const float sn = float(std::sin(angle));
    const float a = head[2 * j];
    const float b = head[2 * j + 1];
    head[2 * j] = a * c - b * sn;
    head[2 * j + 1] = a * sn + b * c;
  }
}

Tensor rope_rotate(const Tensor& q_or_k, float base, std::size_t first_position) {
  require(q_or_k.rank() == 3, "rope_rotate: expected [L, H, s]");
  const std::size_t s = q_or_k.dim(2);
  if (s % 2 != 0) {
    throw ConfigError("rope_rotate: head size " + std::to_string(s) +
                      " is odd");
  }
  Tensor out = q_or_k;
  const std::size_t heads = q_or_k.dim(1);
  for (std::size_t t = 0; t < q_or_k.dim(0); ++t) {
    for (std::size_t h = 0; h < heads; ++h) {
      rope_rotate_row(out.data().subspan((t * heads + h) * s, s),
                      first_position + t, base);
    }
  }
  return out;
}

Tensor softmax_last(const Tensor& x, std::span<const std::uint8_t> mask) {
  require(mask.empty() || mask.size() == x.size(),
          "softmax_last: mask size does not match input");
  Tensor out(x.shape());
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    auto keep = [&](std::size_t j) { return mask.empty() || mask[r * n + j]; };
    float mx = -std::numeric_limits<float>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (keep(j)) {
        mx = std::max(mx, in[j]);
        any = true;
      }
    }
    if (!any) {
      throw DomainError("softmax_last: row " + std::to_string(r) +
                        " is fully masked");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double e = keep(j) ? std::exp(double(in[j]) - double(mx)) : 0.0;
      o[j] = float(e);
      sum += e;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (keep(j)) {
        o[j] = float(std::exp(double(in[j]) - double(mx)) / sum);
      }
    }
  }
  return out;
}

float silu(float u) { return u / (1.0f + std::exp(-u)); }

void matvec(std::span<const float> x, const Tensor& w, std::span<float> out) {
  const std::size_t n_in = w.dim(0), n_out = w.dim(1);
  std::fill(out.begin(), out.end(), 0.0f);
  const float* wp = w.data().data();
  float* op = out.data();
  for (std::size_t k = 0; k < n_in; ++k) {
    const float xk = x[k];
    const float* wr = wp + k * n_out;
    for (std::size_t j = 0; j < n_out; ++j) op[j] += xk * wr[j];
  }
}

Tensor matmul(const Tensor& x, const Tensor& w) {
  require(w.rank() == 2 && x.rank() >= 1 && x.cols() == w.dim(0),
          "matmul: " + shape_string(x.shape()) + " x " +
              shape_string(w.shape()));
  Shape shape = x.shape();
  shape.back() = w.dim(1);
  Tensor out(shape);
  const long n_rows = long(x.rows());
#pragma omp parallel for num_threads(kernel_threads()) if (n_rows > 16)
  for (long r = 0; r < n_rows; ++r) {
    matvec(x.row(std::size_t(r)), w, out.row(std::size_t(r)));
  }
  return out;
}

Tensor swiglu(const Tensor& x, const Tensor& w_gate, const Tensor& w_up,
              const Tensor& w_down) {
  require(w_gate.rank() == 2 && w_up.shape() == w_gate.shape() &&
              w_down.rank() == 2 && w_down.dim(0) == w_gate.dim(1) &&
              w_down.dim(1) == w_gate.dim(0),
          "swiglu: inconsistent weight shapes");
  Tensor gate = matmul(x, w_gate);
  Tensor up = matmul(x, w_up);
  for (std::size_t i = 0; i < gate.size(); ++i) gate[i] = silu(gate[i]) * up[i];
  return matmul(gate, w_down);
}

double logsumexp(std::span<const float> x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (float v : x) mx = std::max(mx, double(v));
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (float v : x) sum += std::exp(double(v) - mx);
  return mx + std::log(sum);
}

Tensor fd_gradient(const ScalarFn& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw DomainError("fd_gradient: step must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float plus = float(double(x[i]) + h);
    const float minus = float(double(x[i]) - h);
    probe[i] = plus;
    const double fp = f(probe);
    probe[i] = minus;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("fd_gradient: non-finite evaluation at index " +
                             std::to_string(i),
                         i);
    }
    grad[i] = float((fp - fm) / (double(plus) - double(minus)));
  }
  return grad;
}

double max_relative_error(std::span<const float> a, std::span<const float> b,
                          double floor) {
  if (a.size() != b.size()) {
    throw DimensionError("max_relative_error: length mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    const double denom = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

}  // namespace lfm
