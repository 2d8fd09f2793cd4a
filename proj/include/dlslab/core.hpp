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

// Domain types shared by the schedulers, the runtime and the simulator.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlslab/error.hpp"

namespace dlslab {

/// Loop iteration index / iteration count.
using Index = std::int64_t;

/// Largest iteration count the runtime can reserve with a single packed atomic word.
inline constexpr Index kMaxIterations = std::numeric_limits<std::uint32_t>::max();

// ---------------------------------------------------------------------------
// Techniques

enum class Technique {
  Static,
  SS,
  GSS,
  TSS,
  FSC,
  FAC,
  MFAC,
  FAC2,
  TAP,
  WF2,
  BOLD,
  AWF,
  AWF_B,
  AWF_C,
  AWF_D,
  AWF_E,
  AF,
  MAF,
};

inline constexpr std::array<Technique, 18> kAllTechniques = {
    Technique::Static, Technique::SS,    Technique::GSS,   Technique::TSS,   Technique::FSC,
    Technique::FAC,    Technique::MFAC,  Technique::FAC2,  Technique::TAP,   Technique::WF2,
    Technique::BOLD,   Technique::AWF,   Technique::AWF_B, Technique::AWF_C, Technique::AWF_D,
    Technique::AWF_E,  Technique::AF,    Technique::MAF,
};

constexpr std::string_view name(Technique t) noexcept {
  switch (t) {
    case Technique::Static: return "static";
    case Technique::SS: return "ss";
    case Technique::GSS: return "gss";
    case Technique::TSS: return "tss";
    case Technique::FSC: return "fsc";
    case Technique::FAC: return "fac";
    case Technique::MFAC: return "mfac";
    case Technique::FAC2: return "fac2";
    case Technique::TAP: return "tap";
    case Technique::WF2: return "wf2";
    case Technique::BOLD: return "bold";
    case Technique::AWF: return "awf";
    case Technique::AWF_B: return "awf-b";
    case Technique::AWF_C: return "awf-c";
    case Technique::AWF_D: return "awf-d";
    case Technique::AWF_E: return "awf-e";
    case Technique::AF: return "af";
    case Technique::MAF: return "maf";
  }
  return "?";
}

inline std::string technique_names(std::string_view sep = ", ") {
  std::string out;
  for (auto t : kAllTechniques) {
    if (!out.empty()) out += sep;
    out += name(t);
  }
  return out;
}

/// Case-insensitive lookup of a technique name; nullopt when unknown.
inline std::optional<Technique> find_technique(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto t : kAllTechniques) {
    if (name(t) == lower) return t;
  }
  return std::nullopt;
}

inline Technique parse_technique(std::string_view text) {
  if (auto t = find_technique(text)) return *t;
  throw Error(Errc::UnknownTechnique,
              "'" + std::string(text) + "' (valid: " + technique_names() + ")");
}

/// Techniques that read a WorkloadProfile (mu, sigma, h).
constexpr bool requires_profile(Technique t) noexcept {
  return t == Technique::FSC || t == Technique::FAC || t == Technique::MFAC ||
         t == Technique::TAP || t == Technique::BOLD;
}

constexpr bool is_awf(Technique t) noexcept {
  return t == Technique::AWF || t == Technique::AWF_B || t == Technique::AWF_C ||
         t == Technique::AWF_D || t == Technique::AWF_E;
}

constexpr bool is_af(Technique t) noexcept { return t == Technique::AF || t == Technique::MAF; }

/// Techniques that hand out chunks in batches of p.
constexpr bool is_batched(Technique t) noexcept {
  return t == Technique::FAC || t == Technique::MFAC || t == Technique::FAC2 ||
         t == Technique::WF2 || is_awf(t);
}

/// Techniques whose chunk parameter is the exact chunk size rather than a lower bound.
constexpr bool is_fixed_size(Technique t) noexcept {
  return t == Technique::Static || t == Technique::SS;
}

// ---------------------------------------------------------------------------
// Loop and execution description

struct LoopDescriptor {
  std::string loop_id = "loop";
  Index n = 1;
  Index time_steps = 1;

  void validate() const {
    if (n < 1) throw Error(Errc::InvalidParameters, "iteration count n must be >= 1");
    if (n > kMaxIterations)
      throw Error(Errc::InvalidParameters, "iteration count exceeds 2^32-1");
    if (time_steps < 1) throw Error(Errc::InvalidParameters, "time_steps must be >= 1");
  }
};

struct TechniqueOptions {
  /// TAP confidence factor; 1.3 corresponds to roughly 90% balancing probability.
  double tap_alpha = 1.3;
  /// Fixed WF2 weights; empty means uniform. Normalized to sum to p at init.
  std::vector<double> wf_weights;
};

struct ExecutionContext {
  std::size_t p = 1;
  Index chunk_param = 1;
  Technique technique = Technique::Static;
  TechniqueOptions options{};

  void validate(Index n) const {
    if (p < 1) throw Error(Errc::InvalidParameters, "thread count p must be >= 1");
    if (chunk_param < 1 || chunk_param > n)
      throw Error(Errc::InvalidParameters,
                  "chunk parameter must satisfy 1 <= k <= n (k=" + std::to_string(chunk_param) +
                      ", n=" + std::to_string(n) + ")");
    if (!options.wf_weights.empty() && options.wf_weights.size() != p)
      throw Error(Errc::InvalidParameters, "wf_weights must have exactly p entries");
    for (double w : options.wf_weights)
      if (!(w > 0.0)) throw Error(Errc::InvalidParameters, "wf_weights must be positive");
    if (!(options.tap_alpha >= 0.0)) throw Error(Errc::InvalidParameters, "tap_alpha must be >= 0");
  }
};

/// Per-iteration timing statistics of a loop plus the per-round scheduling overhead.
struct WorkloadProfile {
  double mu = 1.0;
  double sigma = 0.0;
  double h = 0.0;

  double cov() const { return sigma / mu; }

  void validate() const {
    if (!(mu > 0.0) || !(sigma >= 0.0) || !(h >= 0.0) || !std::isfinite(mu) ||
        !std::isfinite(sigma) || !std::isfinite(h))
      throw Error(Errc::InvalidParameters, "profile requires mu > 0, sigma >= 0, h >= 0");
  }

  friend bool operator==(const WorkloadProfile&, const WorkloadProfile&) = default;
};

/// A contiguous slice [start, start+size) handed to one thread in one scheduling round.
struct Chunk {
  Index start = 0;
  Index size = 0;
  std::uint32_t thread = 0;
  std::optional<Index> batch;

  Index end() const { return start + size; }
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// Per-thread relative speeds; always normalized so that the weights sum to p.
class ThreadWeights {
 public:
  ThreadWeights() = default;
  explicit ThreadWeights(std::size_t p) : w_(p, 1.0) {}
  explicit ThreadWeights(std::vector<double> raw) : w_(std::move(raw)) { normalize(); }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t t) const { return w_[t]; }
  std::span<const double> values() const { return w_; }
  double sum() const { return std::accumulate(w_.begin(), w_.end(), 0.0); }

 private:
  void normalize() {
    for (double w : w_)
      if (!(w > 0.0) || !std::isfinite(w))
        throw Error(Errc::InvalidParameters, "thread weights must be positive and finite");
    const double total = sum();
    const double scale = static_cast<double>(w_.size()) / total;
    for (double& w : w_) w *= scale;
  }

  std::vector<double> w_;
};

struct ThreadRecord {
  Index iterations_done = 0;
  double busy_time = 0.0;
  double sched_time = 0.0;
  double mu_est = 0.0;
  double sigma_est = 0.0;
};

using ThreadStats = std::vector<ThreadRecord>;

/// Welford running mean / population variance.
struct RunningStats {
  Index count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  double variance() const { return count > 0 ? m2 / static_cast<double>(count) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
};

// ---------------------------------------------------------------------------

constexpr Index ceil_div(Index a, Index b) noexcept { return a / b + (a % b != 0 ? 1 : 0); }

/// Raises a computed chunk to the chunk parameter k and clamps it to what is left.
constexpr Index apply_chunk_threshold(Index computed, Index remaining, Index k) noexcept {
  return std::min(remaining, std::max(computed, k));
}

/// Ceiling of a non-negative real chunk size, saturating instead of overflowing.
inline Index ceil_to_index(double x) {
  if (!(x > 0.0)) return 0;
  if (x >= static_cast<double>(kMaxIterations)) return kMaxIterations;
  return static_cast<Index>(std::ceil(x));
}

/// Sum of costs over a chunk, accumulated front to back. Both the simulator and the
/// virtual-clock runtime use this so their timings agree bit for bit.
inline double chunk_cost(std::span<const double> costs, Index start, Index size) {
  double total = 0.0;
  for (Index i = start; i < start + size; ++i) total += costs[static_cast<std::size_t>(i)];
  return total;
}

}  // namespace dlslab
