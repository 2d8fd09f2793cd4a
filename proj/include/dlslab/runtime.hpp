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

// Self-scheduling parallel-for runtime.
//
// A loop instance goes through init (LoopInstance construction), next (every
// thread calls next_chunk until it returns empty, reporting each finished chunk via
// complete) and finish (after all threads have quiesced).
//
// Reservation: one 64-bit atomic cursor packs (iterations scheduled, chunks handed
// out); a thread reads it, computes its chunk size from that snapshot and publishes
// the new cursor with a compare-and-swap. FAC alone builds its batches inside a mutex.
// STATIC never touches shared state: each thread walks its own block(s).

#pragma once

#include <atomic>
#include <chrono>
#include <concepts>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dlslab/core.hpp"
#include "dlslab/metrics.hpp"
#include "dlslab/schedulers.hpp"
#include "dlslab/simulator.hpp"
#include "dlslab/trace.hpp"

namespace dlslab {

// ---------------------------------------------------------------------------
// Thread pool

/// Fixed set of workers running fork-join jobs: run(job) calls job(t) once on every
/// worker t and returns when all calls have returned.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t threads) {
    if (threads < 1) throw Error(Errc::InvalidParameters, "thread pool needs at least one worker");
    workers_.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) workers_.emplace_back([this, t] { work(t); });
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& w : workers_) w.join();
  }

  std::size_t size() const { return workers_.size(); }

  void run(const std::function<void(std::size_t)>& job) {
    std::unique_lock lock(mutex_);
    job_ = &job;
    error_ = nullptr;
    pending_ = workers_.size();
    ++generation_;
    wake_.notify_all();
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void work(std::size_t t) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t)>* job = nullptr;
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
      }
      std::exception_ptr err;
      try {
        (*job)(t);
      } catch (...) {
        err = std::current_exception();
      }
      std::lock_guard lock(mutex_);
      if (err && !error_) error_ = err;
      if (--pending_ == 0) done_.notify_one();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::exception_ptr error_;
  std::uint64_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stop_ = false;
};

// ---------------------------------------------------------------------------
// Clocks

/// Times rounds with std::chrono::steady_clock. Durations in seconds.
class SteadyClock {
 public:
  void begin_instance(std::size_t) { origin_ = std::chrono::steady_clock::now(); }

  double now(std::size_t) const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
  }
  double charge_sched(std::size_t t, double since, Technique, bool) const { return now(t) - since; }
  double charge_body(std::size_t t, double since, const Chunk&) const { return now(t) - since; }

  /// Trace timestamps are written in nanoseconds.
  static constexpr double trace_scale() { return 1e9; }

 private:
  std::chrono::steady_clock::time_point origin_ = std::chrono::steady_clock::now();
};

/// Charges declared costs instead of measuring: a granted round costs the overhead
/// model's round cost and a chunk the sum of its iteration costs. Each thread owns
/// its own virtual time. With p = 1 the runtime then replays exactly what the
/// simulator computes.
class VirtualClock {
 public:
  VirtualClock(std::span<const double> costs, OverheadModel overhead)
      : costs_(costs), overhead_(overhead) {}

  void begin_instance(std::size_t p) { time_.assign(p, 0.0); }

  double now(std::size_t t) const { return time_[t]; }
  double charge_sched(std::size_t t, double, Technique tech, bool granted) {
    const double d = granted ? overhead_.round_cost(tech) : 0.0;
    time_[t] += d;
    return d;
  }
  double charge_body(std::size_t t, double, const Chunk& c) {
    const double d = chunk_cost(costs_, c.start, c.size);
    time_[t] += d;
    return d;
  }

  static constexpr double trace_scale() { return 1.0; }

 private:
  std::span<const double> costs_;
  OverheadModel overhead_;
  std::vector<double> time_;
};

template <class C>
concept LoopClock = requires(C& c, const C& cc, std::size_t t, double d, Technique tech, const Chunk& ch) {
  c.begin_instance(t);
  { cc.now(t) } -> std::convertible_to<double>;
  { c.charge_sched(t, d, tech, true) } -> std::convertible_to<double>;
  { c.charge_body(t, d, ch) } -> std::convertible_to<double>;
  { C::trace_scale() } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Learned adaptive state

/// AWF weights, cumulative per-thread statistics and AF estimates. Persists across
/// the time-steps of a loop; dropped when the loop switches technique.
class LearnedState {
 public:
  explicit LearnedState(std::size_t p) : slots_(p) {}

  std::size_t threads() const { return slots_.size(); }

  double weight(std::size_t t) const { return slots_[t].weight.load(std::memory_order_relaxed); }

  sched::ThreadEstimate estimate(std::size_t t) const {
    const auto& s = slots_[t];
    const Index count = s.est_count.load(std::memory_order_acquire);
    if (count == 0) return {};
    const double m2 = s.est_m2.load(std::memory_order_relaxed);
    return {count, s.est_mean.load(std::memory_order_relaxed),
            std::sqrt(std::max(0.0, m2) / static_cast<double>(count))};
  }

  ThreadStats snapshot() const {
    ThreadStats out(slots_.size());
    for (std::size_t t = 0; t < slots_.size(); ++t) {
      const auto& s = slots_[t];
      out[t].iterations_done = s.iterations.load(std::memory_order_relaxed);
      out[t].busy_time = s.busy.load(std::memory_order_relaxed);
      out[t].sched_time = s.sched.load(std::memory_order_relaxed);
      const auto e = estimate(t);
      out[t].mu_est = e.mu;
      out[t].sigma_est = e.sigma;
    }
    return out;
  }

  std::vector<double> weights() const {
    std::vector<double> w(slots_.size());
    for (std::size_t t = 0; t < w.size(); ++t) w[t] = weight(t);
    return w;
  }

  /// Owner-thread only.
  void record(std::size_t t, Index iterations, double busy, double sched) {
    auto& s = slots_[t];
    s.iterations.store(s.iterations.load(std::memory_order_relaxed) + iterations, std::memory_order_relaxed);
    s.busy.store(s.busy.load(std::memory_order_relaxed) + busy, std::memory_order_relaxed);
    s.sched.store(s.sched.load(std::memory_order_relaxed) + sched, std::memory_order_relaxed);
  }

  /// Owner-thread only: adds one per-iteration time sample to thread t's estimate.
  void add_sample(std::size_t t, double x) {
    auto& s = slots_[t];
    RunningStats r{s.est_count.load(std::memory_order_relaxed), s.est_mean.load(std::memory_order_relaxed),
                   s.est_m2.load(std::memory_order_relaxed)};
    r.add(x);
    s.est_mean.store(r.mean, std::memory_order_relaxed);
    s.est_m2.store(r.m2, std::memory_order_relaxed);
    s.est_count.store(r.count, std::memory_order_release);
  }

  void update_weights(sched::AwfVariant variant) {
    std::lock_guard lock(weights_mutex_);
    const ThreadStats stats = snapshot();
    const std::vector<double> previous = weights();
    const auto next = sched::awf_update_weights(stats, previous, variant);
    for (std::size_t t = 0; t < slots_.size(); ++t) slots_[t].weight.store(next[t], std::memory_order_relaxed);
  }

 private:
  struct alignas(64) Slot {
    std::atomic<Index> iterations{0};
    std::atomic<double> busy{0.0};
    std::atomic<double> sched{0.0};
    std::atomic<Index> est_count{0};
    std::atomic<double> est_mean{0.0};
    std::atomic<double> est_m2{0.0};
    std::atomic<double> weight{1.0};
  };

  std::vector<Slot> slots_;
  std::mutex weights_mutex_;
};

// ---------------------------------------------------------------------------
// Loop instance (shared scheduler state)

class LoopInstance {
 public:
  LoopInstance(Index n, const ExecutionContext& ctx, std::optional<WorkloadProfile> profile,
               LearnedState& learned)
      : n_(n), p_(ctx.p), calc_(n, ctx, profile), learned_(learned), static_rounds_(ctx.p) {
    if (learned.threads() != ctx.p)
      throw Error(Errc::InvalidParameters, "learned state was built for a different thread count");
  }

  LoopInstance(const LoopInstance&) = delete;
  LoopInstance& operator=(const LoopInstance&) = delete;

  Technique technique() const { return calc_.technique(); }
  const sched::ChunkCalculator& calculator() const { return calc_; }

  Index scheduled() const {
    if (technique() == Technique::Static) return static_scheduled_.load(std::memory_order_acquire);
    if (technique() == Technique::FAC) {
      std::lock_guard lock(fac_mutex_);
      return fac_scheduled_;
    }
    return static_cast<Index>(cursor_.load(std::memory_order_acquire) & kLowMask);
  }
  Index remaining() const { return n_ - scheduled(); }

  /// Reserves the next chunk for `thread`, or returns empty once the loop is exhausted
  /// (or aborted). Safe to call concurrently from distinct threads.
  std::optional<Chunk> next_chunk(std::size_t thread) {
    if (thread >= p_) throw Error(Errc::InvalidParameters, "thread id out of range");
    if (aborted_.load(std::memory_order_relaxed)) return std::nullopt;
    switch (technique()) {
      case Technique::Static: return next_static(thread);
      case Technique::FAC: return next_fac(thread);
      default: return next_counter(thread);
    }
  }

  /// Reports a finished chunk. Must be called by the thread that executed it.
  void complete(std::size_t thread, const Chunk& c, double busy, double sched_time) {
    learned_.record(thread, c.size, busy, sched_time);
    const Technique tech = technique();
    if (tech == Technique::AF)
      learned_.add_sample(thread, busy / static_cast<double>(c.size));
    else if (tech == Technique::MAF)
      learned_.add_sample(thread, (busy + sched_time) / static_cast<double>(c.size));
    if (is_awf(tech) && sched::awf_updates_per_chunk(sched::awf_variant(tech)))
      learned_.update_weights(sched::awf_variant(tech));
  }

  /// Time-step end. Call once after every thread has stopped requesting chunks.
  void finish() {
    if (technique() == Technique::AWF) learned_.update_weights(sched::AwfVariant::AWF);
  }

  /// Makes every later next_chunk return empty.
  void abort() { aborted_.store(true, std::memory_order_relaxed); }
  bool aborted() const { return aborted_.load(std::memory_order_relaxed); }

 private:
  static constexpr std::uint64_t kLowMask = 0xffffffffULL;

  std::optional<Chunk> next_static(std::size_t thread) {
    auto& round = static_rounds_[thread].value;
    auto c = calc_.static_chunk(thread, round);
    if (c) {
      ++round;
      static_scheduled_.fetch_add(c->size, std::memory_order_acq_rel);
    }
    return c;
  }

  std::optional<Chunk> next_fac(std::size_t thread) {
    std::lock_guard lock(fac_mutex_);
    const Index remaining = n_ - fac_scheduled_;
    if (remaining == 0) return std::nullopt;
    if (fac_left_ == 0) {
      fac_chunk_ = calc_.fac_batch(remaining);
      ++fac_batch_;
      fac_left_ = static_cast<Index>(p_);
    }
    --fac_left_;
    Chunk c{fac_scheduled_, std::min(fac_chunk_, remaining), static_cast<std::uint32_t>(thread), fac_batch_};
    fac_scheduled_ += c.size;
    return c;
  }

  std::optional<Chunk> next_counter(std::size_t thread) {
    const Technique tech = technique();
    const bool batch_updates = is_awf(tech) && sched::awf_updates_per_batch(sched::awf_variant(tech));
    std::uint64_t cur = cursor_.load(std::memory_order_acquire);
    for (;;) {
      const auto scheduled = static_cast<Index>(cur & kLowMask);
      const auto index = static_cast<Index>(cur >> 32);
      const Index remaining = n_ - scheduled;
      if (remaining == 0) return std::nullopt;
      if (batch_updates) maybe_update_batch_weights(index);
      const Index size = calc_.size(remaining, index, thread, learned_);
      const std::uint64_t next = (static_cast<std::uint64_t>(index + 1) << 32) |
                                 static_cast<std::uint64_t>(scheduled + size);
      if (cursor_.compare_exchange_weak(cur, next, std::memory_order_acq_rel, std::memory_order_acquire))
        return Chunk{scheduled, size, static_cast<std::uint32_t>(thread), calc_.batch_of(index)};
    }
  }

  void maybe_update_batch_weights(Index chunk_index) {
    const Index batch = chunk_index / static_cast<Index>(p_);
    Index seen = weights_batch_.load(std::memory_order_acquire);
    while (batch > seen) {
      if (weights_batch_.compare_exchange_weak(seen, batch, std::memory_order_acq_rel)) {
        learned_.update_weights(sched::awf_variant(technique()));
        return;
      }
    }
  }

  struct alignas(64) PaddedIndex {
    Index value = 0;
  };

  Index n_;
  std::size_t p_;
  sched::ChunkCalculator calc_;
  LearnedState& learned_;
  std::atomic<bool> aborted_{false};

  std::atomic<std::uint64_t> cursor_{0};
  std::atomic<Index> weights_batch_{0};

  std::vector<PaddedIndex> static_rounds_;
  std::atomic<Index> static_scheduled_{0};

  mutable std::mutex fac_mutex_;
  Index fac_scheduled_ = 0;
  Index fac_batch_ = -1;
  Index fac_chunk_ = 0;
  Index fac_left_ = 0;
};

// ---------------------------------------------------------------------------
// Reports, observers, options

struct InstanceReport {
  std::string loop_id;
  Index instance = 0;
  Technique technique = Technique::Static;
  std::size_t p = 1;
  Index chunk_param = 1;
  ImbalanceReport imbalance;
  ThreadStats threads;                // this instance only
  std::vector<Chunk> chunks;          // sorted by start, when recorded
  std::vector<TraceRecord> trace;     // sorted by start, when traced
  double wall_time = 0.0;
};

/// Receives each finished instance (after quiescence, on the calling thread).
class InstanceObserver {
 public:
  virtual ~InstanceObserver() = default;
  virtual void on_instance(const InstanceReport& report) = 0;
  /// Whether the runtime should collect trace records for this observer.
  virtual bool wants_trace() const { return false; }
};

struct RunOptions {
  std::optional<WorkloadProfile> profile;
  /// Consulted when the technique needs a profile and none was given.
  std::function<std::optional<WorkloadProfile>(const LoopDescriptor&)> profile_source;
  bool record_chunks = false;
  bool trace = false;
  std::vector<InstanceObserver*> observers;
};

/// Thrown when a loop body throws. The instance stops handing out chunks, waits for
/// the other threads, and reports what had finished.
class KernelPanic : public Error {
 public:
  KernelPanic(const std::string& what, Index failed_iteration, std::vector<std::pair<Index, Index>> completed)
      : Error(Errc::KernelPanic, what), failed_iteration_(failed_iteration), completed_(std::move(completed)) {}

  Index failed_iteration() const { return failed_iteration_; }
  /// Merged half-open ranges [begin, end) of iterations whose body returned normally.
  const std::vector<std::pair<Index, Index>>& completed() const { return completed_; }
  Index completed_count() const {
    Index total = 0;
    for (auto [b, e] : completed_) total += e - b;
    return total;
  }

 private:
  Index failed_iteration_;
  std::vector<std::pair<Index, Index>> completed_;
};

/// Returns a copy of `context` running `technique` with chunk parameter `chunk_param`.
inline ExecutionContext set_schedule(ExecutionContext context, std::string_view technique, Index chunk_param) {
  context.technique = parse_technique(technique);
  if (chunk_param < 1) throw Error(Errc::InvalidParameters, "chunk parameter must be >= 1");
  context.chunk_param = chunk_param;
  return context;
}

/// Parses "<technique>[,<chunk_param>]" (the DLSLAB_SCHEDULE format).
inline std::pair<Technique, Index> parse_schedule(std::string_view text) {
  const auto comma = text.find(',');
  const Technique t = parse_technique(text.substr(0, comma));
  Index k = 1;
  if (comma != std::string_view::npos) {
    const std::string num(text.substr(comma + 1));
    std::size_t used = 0;
    try {
      k = std::stoll(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != num.size() || num.empty() || k < 1)
      throw Error(Errc::InvalidParameters, "chunk parameter '" + num + "' is not a positive integer");
  }
  return {t, k};
}

// ---------------------------------------------------------------------------
// Loop handle

/// One parallel loop across its time-steps. Owns the learned adaptive state so AWF
/// weights and AF estimates carry from one instance to the next.
class Loop {
 public:
  Loop(LoopDescriptor descriptor, ExecutionContext context)
      : descriptor_(std::move(descriptor)), context_(std::move(context)) {
    descriptor_.validate();
    context_.validate(descriptor_.n);
    learned_ = std::make_unique<LearnedState>(context_.p);
  }

  const LoopDescriptor& descriptor() const { return descriptor_; }
  const ExecutionContext& context() const { return context_; }
  const LearnedState& learned() const { return *learned_; }
  Index instances_run() const { return instance_; }
  bool in_flight() const { return running_.load(std::memory_order_acquire); }

  /// Switches technique / chunk parameter for subsequent instances. Learned state is
  /// kept when the technique stays the same and dropped otherwise.
  void set_schedule(Technique technique, Index chunk_param) {
    if (in_flight()) throw Error(Errc::MidFlightChange, "loop '" + descriptor_.loop_id + "' is executing");
    ExecutionContext next = context_;
    next.technique = technique;
    next.chunk_param = chunk_param;
    next.validate(descriptor_.n);
    if (technique != context_.technique) learned_ = std::make_unique<LearnedState>(context_.p);
    context_ = std::move(next);
  }

  void set_schedule(std::string_view technique, Index chunk_param) {
    set_schedule(parse_technique(technique), chunk_param);
  }

  /// Runs one time-step of the loop on `pool` (which must have at least p workers).
  template <class Body, class Clock = SteadyClock>
    requires LoopClock<std::remove_cvref_t<Clock>>
  InstanceReport run_instance(ThreadPool& pool, Body&& body, const RunOptions& options = {},
                              Clock&& clock = Clock{}) {
    const std::size_t p = context_.p;
    if (pool.size() < p) throw Error(Errc::InvalidParameters, "thread pool smaller than p");
    bool expected = false;
    if (!running_.compare_exchange_strong(expected, true))
      throw Error(Errc::MidFlightChange, "loop '" + descriptor_.loop_id + "' is already executing");
    struct Reset {
      std::atomic<bool>& flag;
      ~Reset() { flag.store(false, std::memory_order_release); }
    } reset{running_};

    std::optional<WorkloadProfile> profile = options.profile;
    if (!profile && requires_profile(context_.technique) && options.profile_source)
      profile = options.profile_source(descriptor_);

    LoopInstance inst(descriptor_.n, context_, profile, *learned_);
    const bool want_trace =
        options.trace || std::any_of(options.observers.begin(), options.observers.end(),
                                     [](const InstanceObserver* o) { return o && o->wants_trace(); });

    struct alignas(64) PerThread {
      ThreadRecord stats;
      double finish = 0.0;
      std::vector<Chunk> chunks;
      std::vector<TraceRecord> trace;
      std::vector<std::pair<Index, Index>> done;
      std::optional<Index> failed;
      std::string failure;
    };
    std::vector<PerThread> per(p);
    const Index instance = instance_;
    const Technique tech = context_.technique;
    const double scale = std::remove_cvref_t<Clock>::trace_scale();

    clock.begin_instance(p);
    const auto wall0 = std::chrono::steady_clock::now();
    pool.run([&](std::size_t t) {
      if (t >= p) return;
      auto& me = per[t];
      for (;;) {
        const double s0 = clock.now(t);
        auto c = inst.next_chunk(t);
        const double sched_time = clock.charge_sched(t, s0, tech, c.has_value());
        const double b0 = clock.now(t);
        if (!c) {
          me.finish = b0;
          break;
        }
        Index i = c->start;
        try {
          for (; i < c->end(); ++i) {
            if constexpr (std::invocable<Body&, Index, std::size_t>)
              body(i, t);
            else
              body(i);
          }
        } catch (const std::exception& e) {
          me.failed = i;
          me.failure = e.what();
        } catch (...) {
          me.failed = i;
          me.failure = "non-standard exception";
        }
        if (me.failed) {
          if (i > c->start) me.done.emplace_back(c->start, i);
          inst.abort();
          me.finish = clock.now(t);
          break;
        }
        const double busy = clock.charge_body(t, b0, *c);
        const double b1 = clock.now(t);
        inst.complete(t, *c, busy, sched_time);
        me.stats.iterations_done += c->size;
        me.stats.busy_time += busy;
        me.stats.sched_time += sched_time;
        me.done.emplace_back(c->start, c->end());
        if (options.record_chunks) me.chunks.push_back(*c);
        if (want_trace)
          me.trace.push_back({descriptor_.loop_id, instance, static_cast<std::uint32_t>(t), c->start, c->size,
                              s0 * scale, b0 * scale, b1 * scale});
      }
    });
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    ++instance_;

    for (const auto& me : per) {
      if (!me.failed) continue;
      std::vector<std::pair<Index, Index>> done;
      for (const auto& other : per) done.insert(done.end(), other.done.begin(), other.done.end());
      throw KernelPanic("loop '" + descriptor_.loop_id + "' iteration " + std::to_string(*me.failed) +
                            " failed: " + me.failure,
                        *me.failed, merge_ranges(std::move(done)));
    }
    inst.finish();

    InstanceReport report;
    report.loop_id = descriptor_.loop_id;
    report.instance = instance;
    report.technique = tech;
    report.p = p;
    report.chunk_param = context_.chunk_param;
    report.wall_time = wall;
    std::vector<double> finish(p);
    Index chunk_count = 0;
    for (std::size_t t = 0; t < p; ++t) {
      report.threads.push_back(per[t].stats);
      finish[t] = per[t].finish;
      chunk_count += static_cast<Index>(per[t].done.size());
      report.chunks.insert(report.chunks.end(), per[t].chunks.begin(), per[t].chunks.end());
      report.trace.insert(report.trace.end(), per[t].trace.begin(), per[t].trace.end());
    }
    std::sort(report.chunks.begin(), report.chunks.end(),
              [](const Chunk& a, const Chunk& b) { return a.start < b.start; });
    sort_trace(report.trace);
    const double makespan = *std::max_element(finish.begin(), finish.end());
    report.imbalance = make_imbalance_report(std::move(finish), makespan, chunk_count);
    for (auto* o : options.observers)
      if (o) o->on_instance(report);
    return report;
  }

  /// Runs all time-steps.
  template <class Body, class Clock = SteadyClock>
    requires LoopClock<std::remove_cvref_t<Clock>>
  std::vector<InstanceReport> run(ThreadPool& pool, Body&& body, const RunOptions& options = {},
                                  Clock&& clock = Clock{}) {
    std::vector<InstanceReport> out;
    for (Index s = 0; s < descriptor_.time_steps; ++s)
      out.push_back(run_instance(pool, body, options, clock));
    return out;
  }

 private:
  static std::vector<std::pair<Index, Index>> merge_ranges(std::vector<std::pair<Index, Index>> r) {
    std::sort(r.begin(), r.end());
    std::vector<std::pair<Index, Index>> out;
    for (const auto& x : r) {
      if (!out.empty() && out.back().second == x.first)
        out.back().second = x.second;
      else
        out.push_back(x);
    }
    return out;
  }

  LoopDescriptor descriptor_;
  ExecutionContext context_;
  std::unique_ptr<LearnedState> learned_;
  std::atomic<bool> running_{false};
  Index instance_ = 0;
};

/// Runs every time-step of a loop on a fresh pool of p workers. `body` is invoked
/// exactly once per iteration index, as body(i) or body(i, thread).
template <class Body, class Clock = SteadyClock>
    requires LoopClock<std::remove_cvref_t<Clock>>
std::vector<InstanceReport> parallel_for(const LoopDescriptor& descriptor, const ExecutionContext& context,
                                         Body&& body, const RunOptions& options = {}, Clock&& clock = Clock{}) {
  Loop loop(descriptor, context);
  ThreadPool pool(context.p);
  return loop.run(pool, std::forward<Body>(body), options, std::forward<Clock>(clock));
}

}  // namespace dlslab
