// Copyright 2026 The dlslab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Synthetic per-iteration cost generators (the DIST loop family) and the
// floating-point busy kernel used to realize those costs in live runs.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dlslab/core.hpp"

namespace dlslab {

// ---------------------------------------------------------------------------
// Random numbers
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard.
// Stream s of seed x is seeded with std::seed_seq{lo32(x), hi32(x), lo32(s), hi32(s)},
// which is also fully specified. Variates are drawn with the transforms below rather
// than <random> distributions, whose algorithms differ between standard libraries.

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t bound) { return bound == 0 ? 0 : next_u64() % bound; }

  /// Box-Muller, one variate per call.
  double normal(double mean, double stddev) {
    const double u1 = uniform_open0();
    const double u2 = uniform();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

  /// Marsaglia-Tsang; shapes below 1 use the u^(1/shape) boost.
  double gamma(double shape, double scale) {
    if (shape < 1.0) return gamma(shape + 1.0, scale) * std::pow(uniform_open0(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = 0.0;
      double v = 0.0;
      do {
        x = normal(0.0, 1.0);
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open0();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Distributions

enum class DistributionKind { Constant, Uniform, Normal, Exponential, Gamma };

constexpr std::string_view name(DistributionKind k) noexcept {
  switch (k) {
    case DistributionKind::Constant: return "constant";
    case DistributionKind::Uniform: return "uniform";
    case DistributionKind::Normal: return "normal";
    case DistributionKind::Exponential: return "exponential";
    case DistributionKind::Gamma: return "gamma";
  }
  return "?";
}

inline DistributionKind parse_distribution(std::string_view text) {
  for (auto k : {DistributionKind::Constant, DistributionKind::Uniform, DistributionKind::Normal,
                 DistributionKind::Exponential, DistributionKind::Gamma})
    if (name(k) == text) return k;
  throw Error(Errc::InvalidParameters,
              "unknown distribution '" + std::string(text) +
                  "' (valid: constant, uniform, normal, exponential, gamma)");
}

/// Per-iteration cost distribution. Units are FLOP (or any abstract unit).
/// Only the parameters relevant to `kind` are read.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::Constant;
  double value = 2.3e8;   // constant
  double mean = 9.5e8;    // normal
  double stddev = 7e7;    // normal
  double rate = 1.0 / 3e8;  // exponential
  double shape = 2.0;     // gamma
  double scale = 1e8;     // gamma
  double lo = 2.3e8;
  double hi = 2.3e8;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  /// The DIST loops L0..L4 with their published parameters and clip ranges.
  static DistributionSpec dist(DistributionKind kind, std::uint64_t seed = 0) {
    DistributionSpec s;
    s.kind = kind;
    s.seed = seed;
    switch (kind) {
      case DistributionKind::Constant: s.lo = s.hi = s.value; break;
      case DistributionKind::Uniform: s.lo = 1e3; s.hi = 7e8; break;
      case DistributionKind::Normal: s.lo = 6e8; s.hi = 1.3e9; break;
      case DistributionKind::Exponential: s.lo = 948.0; s.hi = 4.5e9; break;
      case DistributionKind::Gamma: s.lo = 4.1e6; s.hi = 2.7e9; break;
    }
    return s;
  }

  void validate() const {
    const auto fail = [](const std::string& what) { throw Error(Errc::InvalidParameters, what); };
    if (!(lo >= 0.0) || !(hi >= lo) || !std::isfinite(hi)) fail("clip range needs 0 <= lo <= hi < inf");
    switch (kind) {
      case DistributionKind::Constant:
        if (!(value >= lo && value <= hi)) fail("constant value lies outside the clip range");
        break;
      case DistributionKind::Uniform: break;
      case DistributionKind::Normal:
        if (!(stddev >= 0.0) || !std::isfinite(mean)) fail("normal needs finite mean and stddev >= 0");
        if (stddev == 0.0 && (mean < lo || mean > hi)) fail("degenerate normal lies outside the clip range");
        break;
      case DistributionKind::Exponential:
        if (!(rate > 0.0)) fail("exponential needs rate > 0");
        break;
      case DistributionKind::Gamma:
        if (!(shape > 0.0) || !(scale > 0.0)) fail("gamma needs shape > 0 and scale > 0");
        break;
    }
  }
};

struct CostVector {
  std::vector<double> costs;
  std::uint64_t seed = 0;

  std::span<const double> view() const { return costs; }
  std::size_t size() const { return costs.size(); }
};

/// Draws n per-iteration costs. Normal, exponential and gamma samples falling outside
/// [lo, hi] are redrawn; uniform samples are drawn from [lo, hi] directly.
inline CostVector generate_costs(const DistributionSpec& spec, Index n) {
  spec.validate();
  if (n < 1) throw Error(Errc::InvalidParameters, "n must be >= 1");
  Rng rng(spec.seed, spec.stream);
  CostVector out;
  out.seed = spec.seed;
  out.costs.reserve(static_cast<std::size_t>(n));

  constexpr int kMaxRedraws = 100000;
  const auto clipped = [&](auto draw) {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      const double x = draw();
      if (x >= spec.lo && x <= spec.hi) return x;
    }
    throw Error(Errc::InvalidParameters, "clip range holds negligible probability mass");
  };

  for (Index i = 0; i < n; ++i) {
    double x = 0.0;
    switch (spec.kind) {
      case DistributionKind::Constant: x = spec.value; break;
      case DistributionKind::Uniform: x = rng.uniform(spec.lo, spec.hi); break;
      case DistributionKind::Normal:
        x = clipped([&] { return rng.normal(spec.mean, spec.stddev); });
        break;
      case DistributionKind::Exponential:
        x = clipped([&] { return rng.exponential(spec.rate); });
        break;
      case DistributionKind::Gamma:
        x = clipped([&] { return rng.gamma(spec.shape, spec.scale); });
        break;
    }
    out.costs.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Live busy kernel

/// Executes roughly `flops` floating-point operations (one multiply and one add per
/// step) and returns a value that depends on all of them.
inline double flop_kernel(double flops) {
  const auto steps = static_cast<std::int64_t>(flops / 2.0);
  // The start value is opaque to the optimizer; 1.0 is a fixed point it can fold.
  volatile double seed = 0.5;
  double x = seed;
  for (std::int64_t i = 0; i < steps; ++i) x = x * 0.999999999 + 1e-9;
  return x;
}

/// FLOP/s of `flop_kernel` on this machine, measured over roughly `budget_seconds`.
inline double calibrate_flop_rate(double budget_seconds = 0.05) {
  using clock = std::chrono::steady_clock;
  double flops = 1e5;
  volatile double sink = 0.0;
  for (;;) {
    const auto t0 = clock::now();
    sink = sink + flop_kernel(flops);
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    if (secs >= budget_seconds || flops > 1e12) return flops / std::max(secs, 1e-9);
    flops *= 4.0;
  }
}

}  // namespace dlslab
