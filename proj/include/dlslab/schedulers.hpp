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

// Chunk-size calculation for every self-scheduling technique.
//
// Everything in this header is pure: functions take a snapshot of the scheduling
// state (remaining iterations R, the global chunk index, the requesting thread and,
// for adaptive techniques, per-thread weights or timing estimates) and return a
// chunk size. Who owns the state and how it is synchronized is up to the caller:
// the runtime keeps it in atomics, the simulator in plain serial variables.
//
// Rounding order for every formula: ceiling to an integer, then the chunk
// parameter threshold, then the clamp to the remaining iterations.

#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "dlslab/core.hpp"

namespace dlslab::sched {

/// Warm-up chunk handed to a thread before AF/mAF has any timing for it.
inline constexpr Index kAfWarmupChunk = 10;

// ---------------------------------------------------------------------------
// Non-adaptive techniques

/// STATIC. With the default chunk parameter (1) the loop is cut into p contiguous
/// blocks of ceil(n/p); with k > 1 thread t receives chunks t, t+p, t+2p, ... of size k.
/// `round` is how many chunks this thread has already received.
inline std::optional<Chunk> static_chunk(Index n, std::size_t p, Index k, std::size_t thread,
                                         Index round) {
  const auto np = static_cast<Index>(p);
  const auto t = static_cast<Index>(thread);
  Index start = 0;
  Index size = 0;
  if (k <= 1) {
    if (round > 0) return std::nullopt;
    size = ceil_div(n, np);
    start = t * size;
  } else {
    size = k;
    start = (round * np + t) * k;
  }
  if (start >= n) return std::nullopt;
  return Chunk{start, std::min(size, n - start), static_cast<std::uint32_t>(thread), std::nullopt};
}

inline Index ss_size(Index remaining, Index k) { return std::min(remaining, std::max<Index>(k, 1)); }

inline Index gss_size(Index remaining, std::size_t p, Index k) {
  return apply_chunk_threshold(ceil_div(remaining, static_cast<Index>(p)), remaining, k);
}

/// TSS: chunk sizes fall linearly from f = ceil(n/(2p)) to l = k over C = ceil(2n/(f+l))
/// chunks. Sizes are computed in integer arithmetic: size(c) = f - ceil(c (f-l) / (C-1)).
class TssPlan {
 public:
  TssPlan() = default;
  TssPlan(Index n, std::size_t p, Index k) {
    last_ = std::max<Index>(k, 1);
    first_ = std::max(ceil_div(n, 2 * static_cast<Index>(p)), last_);
    count_ = ceil_div(2 * n, first_ + last_);
  }

  Index first() const { return first_; }
  Index last() const { return last_; }
  Index count() const { return count_; }
  double delta() const {
    return count_ > 1 ? static_cast<double>(first_ - last_) / static_cast<double>(count_ - 1) : 0.0;
  }

  /// Unclamped size of the chunk with global index `c`.
  Index size(Index c) const {
    if (count_ <= 1) return first_;
    if (c >= count_ - 1) return last_;
    const Index drop = ceil_div(c * (first_ - last_), count_ - 1);
    return std::max(last_, first_ - drop);
  }

 private:
  Index first_ = 1;
  Index last_ = 1;
  Index count_ = 1;
};

/// FSC constant chunk (before threshold). Falls back to ceil(n/p) when sigma = 0 or p = 1.
inline Index fsc_chunk(Index n, std::size_t p, const WorkloadProfile& profile) {
  if (p <= 1 || profile.sigma <= 0.0) return ceil_div(n, static_cast<Index>(p));
  const double dp = static_cast<double>(p);
  const double ratio = (std::numbers::sqrt2 * static_cast<double>(n) * profile.h) /
                       (profile.sigma * dp * std::sqrt(std::log2(dp)));
  return ceil_to_index(std::pow(ratio, 2.0 / 3.0));
}

/// FAC batch chunk for R remaining iterations (before threshold):
///   b = p / (2 sqrt(R)) * sigma/mu,  x = 1 + b^2 + b sqrt(b^2 + 2),  chunk = ceil(R / (x p)).
inline Index fac_batch_chunk(Index remaining, std::size_t p, double cov) {
  const Index np = static_cast<Index>(p);
  if (p <= 1) return ceil_div(remaining, np);
  const double dr = static_cast<double>(remaining);
  const double dp = static_cast<double>(p);
  const double b = dp / (2.0 * std::sqrt(dr)) * cov;
  const double x = 1.0 + b * b + b * std::sqrt(b * b + 2.0);
  return ceil_to_index(dr / (x * dp));
}

/// The whole FAC batch sequence for a loop of n iterations, threshold applied. Batch j
/// depends only on the iterations left when it starts, so it is a pure function of j.
inline std::vector<Index> factoring_batches(Index n, std::size_t p, Index k, double cov) {
  std::vector<Index> batches;
  Index remaining = n;
  while (remaining > 0) {
    const Index chunk = std::max(fac_batch_chunk(remaining, p, cov), k);
    batches.push_back(chunk);
    remaining -= chunk * static_cast<Index>(p);
  }
  return batches;
}

/// FAC2 batch j: ceil(n / (2^(j+1) p)).
inline Index fac2_chunk(Index n, std::size_t p, Index batch) {
  if (batch + 1 >= 40) return 1;
  const Index denom = (Index{1} << (batch + 1)) * static_cast<Index>(p);
  return ceil_div(n, denom);
}

/// TAP: with v = alpha sigma/mu, s = ceil(R/p + v^2/2 - v sqrt(2R/p + v^2/4)).
inline Index tap_size(Index remaining, std::size_t p, double cov, double alpha) {
  const double share = static_cast<double>(remaining) / static_cast<double>(p);
  const double v = alpha * cov;
  return ceil_to_index(share + v * v / 2.0 - v * std::sqrt(2.0 * share + v * v / 4.0));
}

/// Batch chunk scaled by a relative thread weight (WF2 / AWF family).
inline Index weighted_chunk(Index batch_chunk, double weight) {
  return ceil_to_index(static_cast<double>(batch_chunk) * weight);
}

/// BOLD. Starts from the GSS share R/p and adds the iterations whose execution time
/// matches the scheduling overhead a thread would still pay over its remaining
/// ~log2(R/p) rounds: bonus = h/(mu ln 2) * ln(R/p). The bonus is damped by the
/// relative variance, 1 + 2(sigma/mu)^2, which bounds the risk of an overlong chunk.
/// The result never falls below the GSS share and shrinks monotonically with R.
inline Index bold_size(Index remaining, std::size_t p, const WorkloadProfile& profile) {
  const double share = static_cast<double>(remaining) / static_cast<double>(p);
  if (profile.h <= 0.0) return ceil_div(remaining, static_cast<Index>(p));
  const double c1 = profile.h / (profile.mu * std::numbers::ln2);
  const double cov = profile.sigma / profile.mu;
  const double bonus = c1 * std::log(std::max(1.0, share)) / (1.0 + 2.0 * cov * cov);
  return std::max(ceil_to_index(share + bonus), ceil_div(remaining, static_cast<Index>(p)));
}

// ---------------------------------------------------------------------------
// Adaptive techniques

enum class AwfVariant { AWF, B, C, D, E };

constexpr AwfVariant awf_variant(Technique t) noexcept {
  switch (t) {
    case Technique::AWF_B: return AwfVariant::B;
    case Technique::AWF_C: return AwfVariant::C;
    case Technique::AWF_D: return AwfVariant::D;
    case Technique::AWF_E: return AwfVariant::E;
    default: return AwfVariant::AWF;
  }
}

/// D and E also charge each thread for the time it spent scheduling.
constexpr bool awf_counts_sched_time(AwfVariant v) noexcept {
  return v == AwfVariant::D || v == AwfVariant::E;
}

/// B and D update at every batch boundary.
constexpr bool awf_updates_per_batch(AwfVariant v) noexcept {
  return v == AwfVariant::B || v == AwfVariant::D;
}

/// C and E update after every completed chunk.
constexpr bool awf_updates_per_chunk(AwfVariant v) noexcept {
  return v == AwfVariant::C || v == AwfVariant::E;
}

/// New AWF weights from cumulative per-thread statistics.
///
/// Rate r_t = iterations_t / time_t; weights w_t = p r_t / sum(r). A thread with no
/// finished iteration or no measured time yet keeps its previous weight; the other
/// threads share the rest of the budget p in proportion to their rates.
inline ThreadWeights awf_update_weights(std::span<const ThreadRecord> stats,
                                        std::span<const double> previous, AwfVariant variant) {
  const std::size_t p = stats.size();
  std::vector<double> next(previous.begin(), previous.end());
  std::vector<double> rate(p, 0.0);
  double carried = 0.0;
  double rate_sum = 0.0;
  for (std::size_t t = 0; t < p; ++t) {
    const auto& s = stats[t];
    const double time = s.busy_time + (awf_counts_sched_time(variant) ? s.sched_time : 0.0);
    if (s.iterations_done > 0 && time > 0.0) {
      rate[t] = static_cast<double>(s.iterations_done) / time;
      rate_sum += rate[t];
    } else {
      carried += previous[t];
    }
  }
  if (rate_sum > 0.0 && std::isfinite(rate_sum)) {
    const double budget = static_cast<double>(p) - carried;
    for (std::size_t t = 0; t < p; ++t)
      if (rate[t] > 0.0) next[t] = budget * rate[t] / rate_sum;
  }
  return ThreadWeights(std::move(next));
}

/// Convenience overload: the previous weights are uniform.
inline ThreadWeights awf_update_weights(std::span<const ThreadRecord> stats, AwfVariant variant) {
  const std::vector<double> uniform(stats.size(), 1.0);
  return awf_update_weights(stats, uniform, variant);
}

/// What AF knows about one thread: number of timed chunks plus mean and standard
/// deviation of its per-iteration time.
struct ThreadEstimate {
  Index count = 0;
  double mu = 0.0;
  double sigma = 0.0;
};

/// AF chunk for `thread` (before threshold), from per-thread estimates:
///   D = sum sigma_t^2/mu_t,  E = 1/sum(1/mu_t),
///   s = (D + 2ER - sqrt(D^2 + 4DER)) / (2 mu_thread)
/// evaluated in the cancellation-free form 4E^2R^2 / ((D + 2ER + sqrt(D^2 + 4DER)) 2 mu).
/// Threads without timings yet are represented by the mean of the known estimates.
/// Falls back to ceil(R/p) if the requesting thread has no positive estimate.
template <std::invocable<std::size_t> EstimateFn>
Index af_chunk(Index remaining, std::size_t p, std::size_t thread, EstimateFn&& estimate) {
  double known_mu = 0.0;
  double known_sigma = 0.0;
  std::size_t known = 0;
  for (std::size_t t = 0; t < p; ++t) {
    const ThreadEstimate e = estimate(t);
    if (e.count > 0) {
      known_mu += e.mu;
      known_sigma += e.sigma;
      ++known;
    }
  }
  const ThreadEstimate self = estimate(thread);
  if (known == 0 || self.count == 0 || !(self.mu > 0.0))
    return ceil_div(remaining, static_cast<Index>(p));
  known_mu /= static_cast<double>(known);
  known_sigma /= static_cast<double>(known);

  double d = 0.0;
  double inv_sum = 0.0;
  for (std::size_t t = 0; t < p; ++t) {
    ThreadEstimate e = estimate(t);
    if (e.count == 0) e = {1, known_mu, known_sigma};
    if (!(e.mu > 0.0)) return ceil_div(remaining, static_cast<Index>(p));
    d += e.sigma * e.sigma / e.mu;
    inv_sum += 1.0 / e.mu;
  }
  const double e = 1.0 / inv_sum;
  const double r = static_cast<double>(remaining);
  const double two_er = 2.0 * e * r;
  const double denom = (d + two_er + std::sqrt(d * d + 4.0 * d * e * r)) * 2.0 * self.mu;
  return ceil_to_index(two_er * two_er / denom);
}

// ---------------------------------------------------------------------------

/// Anything that can hand per-thread adaptive state to the calculator.
template <class V>
concept AdaptiveView = requires(const V& v, std::size_t t) {
  { v.weight(t) } -> std::convertible_to<double>;
  { v.estimate(t) } -> std::convertible_to<ThreadEstimate>;
};

/// For techniques that need neither weights nor estimates.
struct NoAdaptiveState {
  double weight(std::size_t) const { return 1.0; }
  ThreadEstimate estimate(std::size_t) const { return {}; }
};

/// Per-loop-instance chunk calculator. Holds what a technique precomputes at init
/// (FSC's constant chunk, the TSS line, the mFAC batch table, WF2's weights) and maps
/// a state snapshot to the next chunk size.
class ChunkCalculator {
 public:
  ChunkCalculator(Index n, const ExecutionContext& ctx, std::optional<WorkloadProfile> profile)
      : n_(n), p_(ctx.p), k_(ctx.chunk_param), technique_(ctx.technique), alpha_(ctx.options.tap_alpha) {
    if (requires_profile(technique_)) {
      if (!profile)
        throw Error(Errc::ProfileMissing,
                    std::string(name(technique_)) + " needs a workload profile (mu, sigma, h)");
      profile->validate();
      profile_ = *profile;
    }
    switch (technique_) {
      case Technique::TSS: tss_ = TssPlan(n_, p_, k_); break;
      case Technique::FSC: fsc_ = fsc_chunk(n_, p_, profile_); break;
      case Technique::MFAC: mfac_ = factoring_batches(n_, p_, k_, profile_.cov()); break;
      case Technique::WF2:
        wf_ = ctx.options.wf_weights.empty() ? ThreadWeights(p_) : ThreadWeights(ctx.options.wf_weights);
        break;
      default: break;
    }
  }

  Technique technique() const { return technique_; }
  std::size_t threads() const { return p_; }
  Index n() const { return n_; }
  Index chunk_param() const { return k_; }
  const WorkloadProfile& profile() const { return profile_; }
  const TssPlan& tss() const { return tss_; }
  Index fsc() const { return fsc_; }
  std::span<const Index> mfac_batches() const { return mfac_; }
  const ThreadWeights& wf_weights() const { return wf_; }

  std::optional<Chunk> static_chunk(std::size_t thread, Index round) const {
    return sched::static_chunk(n_, p_, k_, thread, round);
  }

  /// FAC batch chunk for the batch that starts with `remaining` iterations left.
  Index fac_batch(Index remaining) const {
    return std::max(fac_batch_chunk(remaining, p_, profile_.cov()), k_);
  }

  /// Batch index of a chunk for the counter-batched techniques (not FAC, whose
  /// batches are tracked by its owner under a lock).
  std::optional<Index> batch_of(Index chunk_index) const {
    if (technique_ == Technique::MFAC || technique_ == Technique::FAC2 ||
        technique_ == Technique::WF2 || is_awf(technique_))
      return chunk_index / static_cast<Index>(p_);
    return std::nullopt;
  }

  /// Size of the next chunk for every technique except STATIC and FAC, given R >= 1
  /// unassigned iterations and the global index of the chunk being handed out.
  template <AdaptiveView View = NoAdaptiveState>
  Index size(Index remaining, Index chunk_index, std::size_t thread, const View& view = {}) const {
    const auto threshold = [&](Index computed) { return apply_chunk_threshold(computed, remaining, k_); };
    const Index batch = chunk_index / static_cast<Index>(p_);
    switch (technique_) {
      case Technique::SS: return ss_size(remaining, k_);
      case Technique::GSS: return gss_size(remaining, p_, k_);
      case Technique::TSS: return threshold(tss_.size(chunk_index));
      case Technique::FSC: return threshold(fsc_);
      case Technique::MFAC: {
        const auto j = static_cast<std::size_t>(batch);
        return threshold(j < mfac_.size() ? mfac_[j] : k_);
      }
      case Technique::FAC2: return threshold(fac2_chunk(n_, p_, batch));
      case Technique::TAP: return threshold(tap_size(remaining, p_, profile_.cov(), alpha_));
      case Technique::WF2: return threshold(weighted_chunk(fac2_chunk(n_, p_, batch), wf_[thread]));
      case Technique::BOLD: return threshold(bold_size(remaining, p_, profile_));
      case Technique::AWF:
      case Technique::AWF_B:
      case Technique::AWF_C:
      case Technique::AWF_D:
      case Technique::AWF_E:
        return threshold(weighted_chunk(fac2_chunk(n_, p_, batch), view.weight(thread)));
      case Technique::AF:
      case Technique::MAF: {
        if (view.estimate(thread).count == 0) return std::min(kAfWarmupChunk, remaining);
        return threshold(
            af_chunk(remaining, p_, thread, [&](std::size_t t) { return ThreadEstimate(view.estimate(t)); }));
      }
      case Technique::Static:
      case Technique::FAC:
        break;
    }
    throw Error(Errc::InvalidParameters,
                std::string(name(technique_)) + " is not computed from the shared counter");
  }

 private:
  Index n_;
  std::size_t p_;
  Index k_;
  Technique technique_;
  double alpha_;
  WorkloadProfile profile_{};
  TssPlan tss_{};
  Index fsc_ = 1;
  std::vector<Index> mfac_;
  ThreadWeights wf_;
};

}  // namespace dlslab::sched
