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

// Deterministic serial replay of a self-scheduled loop.
//
// p virtual workers share one iteration space. Whenever a worker becomes free it first
// reports the chunk it just finished (timings feed the adaptive techniques) and then
// requests the next one. Workers are processed in order of the time they become free;
// equal times go to the lowest worker id. Each scheduling round costs the overhead
// model's round cost, each chunk the sum of its iteration costs.
//
// The scheduling state here is plain serial bookkeeping, kept separate from the
// runtime's atomic implementation; both call the same pure chunk calculators.

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "dlslab/core.hpp"
#include "dlslab/metrics.hpp"
#include "dlslab/schedulers.hpp"
#include "dlslab/trace.hpp"

namespace dlslab {

/// Scheduling-overhead model: every round costs h_assign plus the technique's
/// chunk-calculation cost plus a synchronization surcharge (mutex for FAC,
/// atomic for the other dynamic techniques, none for STATIC).
struct OverheadModel {
  double h_assign = 0.0;
  std::array<double, kAllTechniques.size()> h_calc{};
  double sync_mutex = 0.0;
  double sync_atomic = 0.0;

  double calc(Technique t) const { return h_calc[static_cast<std::size_t>(t)]; }
  void set_calc(Technique t, double cost) { h_calc[static_cast<std::size_t>(t)] = cost; }

  double sync(Technique t) const {
    if (t == Technique::Static) return 0.0;
    return t == Technique::FAC ? sync_mutex : sync_atomic;
  }

  double round_cost(Technique t) const { return h_assign + calc(t) + sync(t); }

  void validate() const {
    bool ok = h_assign >= 0.0 && sync_mutex >= 0.0 && sync_atomic >= 0.0;
    for (double c : h_calc) ok = ok && c >= 0.0;
    if (!ok) throw Error(Errc::InvalidParameters, "overhead model costs must be >= 0");
  }
};

/// Multiplies the cost of every chunk that `worker` receives once `after_chunk`
/// chunks have been handed out in the instance.
struct Slowdown {
  std::size_t worker = 0;
  double factor = 1.0;
  Index after_chunk = 0;
};

struct SimOptions {
  /// Overrides the self-profile (mean and population deviation of the costs, h = round cost).
  std::optional<WorkloadProfile> profile;
  std::vector<Slowdown> slowdowns;
  bool record_trace = false;
};

struct SimInstance {
  std::vector<Chunk> chunks;  // emission order
  std::vector<double> busy;
  std::vector<double> overhead;
  std::vector<Index> iterations;
  ImbalanceReport imbalance;
  Index o_sr = 0;
  double o_cs = 0.0;
  double o_sync = 0.0;
  double overhead_total = 0.0;
};

struct SimReport {
  std::string loop_id;
  Technique technique = Technique::Static;
  std::size_t p = 1;
  Index chunk_param = 1;
  std::vector<SimInstance> instances;
  std::vector<TraceRecord> trace;
  WorkloadProfile profile{};

  double makespan = 0.0;  // sum over time-steps
  Index o_sr = 0;
  double o_cs = 0.0;
  double o_sync = 0.0;
  double overhead_total = 0.0;
  std::vector<double> busy;      // per worker, all time-steps
  std::vector<double> overhead;  // per worker, all time-steps
  std::vector<Index> iterations;

  /// Chunk sequence of the first time-step.
  const std::vector<Chunk>& chunks() const { return instances.front().chunks; }
  const ImbalanceReport& imbalance() const { return instances.front().imbalance; }
};

/// Mean and population standard deviation of a cost vector.
inline WorkloadProfile profile_costs(std::span<const double> costs, double h) {
  RunningStats s;
  for (double c : costs) s.add(c);
  return {s.mean, s.stddev(), h};
}

namespace detail {

/// Adaptive state that survives from one time-step to the next.
struct SerialLearned {
  std::vector<double> weights;
  ThreadStats stats;
  std::vector<RunningStats> estimates;

  explicit SerialLearned(std::size_t p)
      : weights(p, 1.0), stats(p), estimates(p) {}

  double weight(std::size_t t) const { return weights[t]; }
  sched::ThreadEstimate estimate(std::size_t t) const {
    const auto& e = estimates[t];
    return {e.count, e.mean, e.stddev()};
  }

  void update_weights(sched::AwfVariant variant) {
    const auto next = sched::awf_update_weights(stats, weights, variant);
    weights.assign(next.values().begin(), next.values().end());
  }
};

class SerialState {
 public:
  SerialState(Index n, const ExecutionContext& ctx, const WorkloadProfile* profile,
              SerialLearned& learned)
      : n_(n),
        p_(ctx.p),
        calc_(n, ctx, profile ? std::optional(*profile) : std::nullopt),
        learned_(learned),
        static_rounds_(ctx.p, 0) {}

  Index remaining() const { return n_ - scheduled_; }
  Index emitted() const { return chunk_index_; }

  std::optional<Chunk> next(std::size_t worker) {
    const Technique tech = calc_.technique();
    if (tech == Technique::Static) {
      auto c = calc_.static_chunk(worker, static_rounds_[worker]);
      if (c) {
        ++static_rounds_[worker];
        scheduled_ += c->size;
        ++chunk_index_;
      }
      return c;
    }
    if (remaining() == 0) return std::nullopt;
    if (tech == Technique::FAC) {
      if (fac_left_ == 0) {
        fac_chunk_ = calc_.fac_batch(remaining());
        ++fac_batch_;
        fac_left_ = static_cast<Index>(p_);
      }
      --fac_left_;
      return emit(worker, std::min(fac_chunk_, remaining()), fac_batch_);
    }
    if (is_awf(tech) && sched::awf_updates_per_batch(sched::awf_variant(tech))) {
      const Index batch = chunk_index_ / static_cast<Index>(p_);
      if (batch > weights_batch_) {
        learned_.update_weights(sched::awf_variant(tech));
        weights_batch_ = batch;
      }
    }
    const Index size = calc_.size(remaining(), chunk_index_, worker, learned_);
    return emit(worker, size, calc_.batch_of(chunk_index_));
  }

  void complete(std::size_t worker, const Chunk& c, double busy, double sched_time) {
    auto& s = learned_.stats[worker];
    s.iterations_done += c.size;
    s.busy_time += busy;
    s.sched_time += sched_time;
    const Technique tech = calc_.technique();
    if (tech == Technique::AF)
      learned_.estimates[worker].add(busy / static_cast<double>(c.size));
    else if (tech == Technique::MAF)
      learned_.estimates[worker].add((busy + sched_time) / static_cast<double>(c.size));
    if (is_awf(tech) && sched::awf_updates_per_chunk(sched::awf_variant(tech)))
      learned_.update_weights(sched::awf_variant(tech));
  }

  void finish() {
    if (calc_.technique() == Technique::AWF) learned_.update_weights(sched::AwfVariant::AWF);
  }

 private:
  Chunk emit(std::size_t worker, Index size, std::optional<Index> batch) {
    Chunk c{scheduled_, size, static_cast<std::uint32_t>(worker), batch};
    scheduled_ += size;
    ++chunk_index_;
    return c;
  }

  Index n_;
  std::size_t p_;
  sched::ChunkCalculator calc_;
  SerialLearned& learned_;
  Index scheduled_ = 0;
  Index chunk_index_ = 0;
  std::vector<Index> static_rounds_;
  Index fac_batch_ = -1;
  Index fac_chunk_ = 0;
  Index fac_left_ = 0;
  Index weights_batch_ = 0;
};

}  // namespace detail

/// Replays `descriptor.time_steps` instances of the loop. Learned adaptive state
/// (AWF weights, AF estimates) carries over between time-steps.
inline SimReport simulate(const LoopDescriptor& descriptor, const ExecutionContext& context,
                          std::span<const double> costs, const OverheadModel& overhead,
                          const SimOptions& options = {}) {
  descriptor.validate();
  context.validate(descriptor.n);
  overhead.validate();
  if (static_cast<Index>(costs.size()) != descriptor.n)
    throw Error(Errc::InvalidParameters, "cost vector length must equal n");
  for (double c : costs)
    if (!(c >= 0.0) || !std::isfinite(c)) throw Error(Errc::InvalidParameters, "costs must be finite and >= 0");

  const Technique tech = context.technique;
  const std::size_t p = context.p;
  const double round_cost = overhead.round_cost(tech);

  SimReport report;
  report.loop_id = descriptor.loop_id;
  report.technique = tech;
  report.p = p;
  report.chunk_param = context.chunk_param;
  report.busy.assign(p, 0.0);
  report.overhead.assign(p, 0.0);
  report.iterations.assign(p, 0);

  std::optional<WorkloadProfile> profile = options.profile;
  if (!profile && requires_profile(tech)) {
    profile = profile_costs(costs, round_cost);
    if (!(profile->mu > 0.0))
      throw Error(Errc::ProfileMissing, "cannot self-profile a loop whose costs are all zero");
  }
  if (profile) report.profile = *profile;

  detail::SerialLearned learned(p);

  for (Index step = 0; step < descriptor.time_steps; ++step) {
    detail::SerialState state(descriptor.n, context, profile ? &*profile : nullptr, learned);
    SimInstance inst;
    inst.busy.assign(p, 0.0);
    inst.overhead.assign(p, 0.0);
    inst.iterations.assign(p, 0);
    std::vector<double> finish(p, 0.0);
    std::vector<std::optional<Chunk>> running(p);
    std::vector<double> running_busy(p, 0.0);

    using Event = std::pair<double, std::size_t>;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> ready;
    for (std::size_t w = 0; w < p; ++w) ready.emplace(0.0, w);

    while (!ready.empty()) {
      const auto [now, w] = ready.top();
      ready.pop();
      if (running[w]) {
        state.complete(w, *running[w], running_busy[w], round_cost);
        running[w].reset();
      }
      const Index seq = state.emitted();
      auto chunk = state.next(w);
      if (!chunk) {
        finish[w] = now;
        continue;
      }
      double busy = chunk_cost(costs, chunk->start, chunk->size);
      for (const auto& s : options.slowdowns)
        if (s.worker == w && seq >= s.after_chunk) busy *= s.factor;

      inst.chunks.push_back(*chunk);
      inst.busy[w] += busy;
      inst.overhead[w] += round_cost;
      inst.iterations[w] += chunk->size;
      ++inst.o_sr;
      inst.o_cs += overhead.calc(tech);
      inst.o_sync += overhead.sync(tech);
      inst.overhead_total += round_cost;
      if (options.record_trace)
        report.trace.push_back({descriptor.loop_id, step, static_cast<std::uint32_t>(w), chunk->start,
                                chunk->size, now, now + round_cost, now + round_cost + busy});

      running[w] = chunk;
      running_busy[w] = busy;
      ready.emplace(now + round_cost + busy, w);
    }
    state.finish();

    const double makespan = *std::max_element(finish.begin(), finish.end());
    inst.imbalance = make_imbalance_report(finish, makespan, inst.o_sr);

    report.makespan += makespan;
    report.o_sr += inst.o_sr;
    report.o_cs += inst.o_cs;
    report.o_sync += inst.o_sync;
    report.overhead_total += inst.overhead_total;
    for (std::size_t w = 0; w < p; ++w) {
      report.busy[w] += inst.busy[w];
      report.overhead[w] += inst.overhead[w];
      report.iterations[w] += inst.iterations[w];
    }
    report.instances.push_back(std::move(inst));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Best combination

struct LoopChoice {
  std::string loop;
  std::string technique;
  double time = 0.0;
};

struct Selection {
  std::vector<LoopChoice> per_loop;
  double best_total = 0.0;
  /// Total over all loops for every technique measured on every loop.
  std::map<std::string, double> technique_total;
  /// (technique_total - best_total) / best_total * 100.
  std::map<std::string, double> degradation_percent;
};

/// times[loop][technique] = parallel loop time. Per loop picks the fastest technique
/// (ties go to the lexicographically smallest name) and sums the winners.
inline Selection best_combination(const std::map<std::string, std::map<std::string, double>>& times) {
  if (times.empty()) throw Error(Errc::EmptyInput, "no loops to select from");
  Selection sel;
  std::map<std::string, std::size_t> seen;
  for (const auto& [loop, by_tech] : times) {
    if (by_tech.empty()) throw Error(Errc::EmptyInput, "loop '" + loop + "' has no techniques");
    LoopChoice best{loop, by_tech.begin()->first, by_tech.begin()->second};
    for (const auto& [tech, t] : by_tech) {
      if (t < best.time) best = {loop, tech, t};
      sel.technique_total[tech] += t;
      ++seen[tech];
    }
    sel.best_total += best.time;
    sel.per_loop.push_back(best);
  }
  for (auto it = sel.technique_total.begin(); it != sel.technique_total.end();) {
    if (seen[it->first] != times.size()) {
      it = sel.technique_total.erase(it);
      continue;
    }
    sel.degradation_percent[it->first] =
        sel.best_total > 0.0 ? (it->second - sel.best_total) / sel.best_total * 100.0 : 0.0;
    ++it;
  }
  return sel;
}

}  // namespace dlslab
