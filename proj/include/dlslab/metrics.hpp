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

// Load-imbalance metrics over per-thread finishing times.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "dlslab/core.hpp"

namespace dlslab {

namespace detail {
inline double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}
}  // namespace detail

/// Coefficient of variation sigma/mu of thread times (population standard deviation).
inline double compute_cov(std::span<const double> thread_times) {
  if (thread_times.empty()) throw Error(Errc::EmptyInput, "no thread times");
  const double mu = detail::mean_of(thread_times);
  if (!(mu > 0.0)) throw Error(Errc::ZeroMean, "thread times have zero mean");
  // The rounded mean of equal values need not equal them.
  if (std::adjacent_find(thread_times.begin(), thread_times.end(), std::not_equal_to<>()) == thread_times.end())
    return 0.0;
  double ss = 0.0;
  for (double t : thread_times) ss += (t - mu) * (t - mu);
  return std::sqrt(ss / static_cast<double>(thread_times.size())) / mu;
}

struct PercentImbalance {
  double percent = 0.0;
  /// Set when p = 1; the metric is undefined there and `percent` is 0.
  bool single_thread = false;
};

/// Percent imbalance (T_par - mu) / T_par * P/(P-1) * 100, T_par = max thread time.
inline PercentImbalance compute_pi(std::span<const double> thread_times, std::size_t p) {
  if (thread_times.empty()) throw Error(Errc::EmptyInput, "no thread times");
  if (thread_times.size() != p)
    throw Error(Errc::InvalidParameters, "expected one time per thread");
  if (p == 1) return {0.0, true};
  const double t_par = *std::max_element(thread_times.begin(), thread_times.end());
  if (!(t_par > 0.0)) throw Error(Errc::ZeroMean, "parallel time is zero");
  // T_par - mu as the mean gap to the slowest thread: no cancellation, and exactly 0
  // when all times are equal.
  double gap = 0.0;
  for (double t : thread_times) gap += t_par - t;
  return {gap / (t_par * static_cast<double>(p - 1)) * 100.0, false};
}

struct ImbalanceReport {
  std::vector<double> thread_times;
  double t_par = 0.0;
  double cov = 0.0;
  double pi = 0.0;
  double makespan = 0.0;
  Index chunk_count = 0;
};

/// Builds a report; a set of all-zero thread times counts as perfectly balanced.
inline ImbalanceReport make_imbalance_report(std::vector<double> thread_times, double makespan,
                                             Index chunk_count) {
  ImbalanceReport r;
  r.thread_times = std::move(thread_times);
  r.makespan = makespan;
  r.chunk_count = chunk_count;
  if (r.thread_times.empty()) return r;
  r.t_par = *std::max_element(r.thread_times.begin(), r.thread_times.end());
  if (r.t_par > 0.0) {
    r.cov = compute_cov(r.thread_times);
    r.pi = compute_pi(r.thread_times, r.thread_times.size()).percent;
  }
  return r;
}

}  // namespace dlslab
