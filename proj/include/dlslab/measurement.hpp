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

// Loop timing, chunk tracing and profiling.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dlslab/core.hpp"
#include "dlslab/metrics.hpp"
#include "dlslab/runtime.hpp"
#include "dlslab/simulator.hpp"
#include "dlslab/trace.hpp"
#include "json.hpp"

namespace dlslab {

namespace detail {
inline std::unique_ptr<std::ofstream> open_sink(const std::filesystem::path& path) {
  auto out = std::make_unique<std::ofstream>(path, std::ios::out | std::ios::trunc);
  if (!*out) throw Error(Errc::SinkUnwritable, "cannot write '" + path.string() + "'");
  return out;
}
}  // namespace detail

/// Chunk trace sink: one NDJSON record per scheduling round. Disabled tracers never
/// touch their path.
class ChunkTracer : public InstanceObserver {
 public:
  ChunkTracer() = default;
  ChunkTracer(bool enabled, const std::filesystem::path& sink) : enabled_(enabled) {
    if (enabled_) file_ = detail::open_sink(sink);
  }
  /// Writes to a caller-owned stream (nullptr keeps records in memory only).
  ChunkTracer(bool enabled, std::ostream* sink) : enabled_(enabled), out_(sink) {}

  bool enabled() const { return enabled_; }
  bool wants_trace() const override { return enabled_; }

  void on_instance(const InstanceReport& report) override { write(report.trace); }

  void write(const std::vector<TraceRecord>& records) {
    if (!enabled_) return;
    records_.insert(records_.end(), records.begin(), records.end());
    if (std::ostream* out = stream()) {
      write_trace_ndjson(*out, records);
      out->flush();
      if (!*out) throw Error(Errc::SinkUnwritable, "chunk trace write failed");
    }
  }

  const std::vector<TraceRecord>& records() const { return records_; }

 private:
  std::ostream* stream() { return file_ ? file_.get() : out_; }

  bool enabled_ = false;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_ = nullptr;
  std::vector<TraceRecord> records_;
};

/// Per-instance thread-time table: one row per (loop, instance, thread).
class LoopTimeRecorder : public InstanceObserver {
 public:
  LoopTimeRecorder() = default;
  LoopTimeRecorder(bool enabled, const std::filesystem::path& sink) : enabled_(enabled) {
    if (enabled_) {
      file_ = detail::open_sink(sink);
      write_loop_times_csv_header(*file_);
    }
  }
  LoopTimeRecorder(bool enabled, std::ostream* sink) : enabled_(enabled), out_(sink) {
    if (enabled_ && out_) write_loop_times_csv_header(*out_);
  }

  bool enabled() const { return enabled_; }

  void on_instance(const InstanceReport& report) override {
    if (!enabled_) return;
    for (std::size_t t = 0; t < report.p; ++t) {
      const auto& s = report.threads[t];
      add({report.loop_id, report.instance, static_cast<std::uint32_t>(t), report.imbalance.thread_times[t],
           s.busy_time, s.sched_time, s.iterations_done});
    }
  }

  void on_simulation(const SimReport& report) {
    if (!enabled_) return;
    for (std::size_t i = 0; i < report.instances.size(); ++i) {
      const auto& inst = report.instances[i];
      for (std::size_t t = 0; t < report.p; ++t)
        add({report.loop_id, static_cast<Index>(i), static_cast<std::uint32_t>(t),
             inst.imbalance.thread_times[t], inst.busy[t], inst.overhead[t], inst.iterations[t]});
    }
  }

  const std::vector<LoopTimeRow>& rows() const { return rows_; }

 private:
  void add(LoopTimeRow row) {
    if (std::ostream* out = file_ ? file_.get() : out_) {
      write_loop_time_row(*out, row);
      out->flush();
      if (!*out) throw Error(Errc::SinkUnwritable, "loop time write failed");
    }
    rows_.push_back(std::move(row));
  }

  bool enabled_ = false;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_ = nullptr;
  std::vector<LoopTimeRow> rows_;
};

/// Rebuilds each instance's imbalance report from its trace: a thread's time is the
/// end of its last chunk body.
inline std::map<std::pair<std::string, Index>, ImbalanceReport> imbalance_from_trace(
    const std::vector<TraceRecord>& records, std::size_t p) {
  std::map<std::pair<std::string, Index>, std::vector<double>> finish;
  std::map<std::pair<std::string, Index>, Index> counts;
  for (const auto& r : records) {
    if (r.thread >= p) throw Error(Errc::InvalidParameters, "trace thread id exceeds p");
    auto& f = finish[{r.loop_id, r.instance}];
    f.resize(p, 0.0);
    f[r.thread] = std::max(f[r.thread], r.t_body_end);
    ++counts[{r.loop_id, r.instance}];
  }
  std::map<std::pair<std::string, Index>, ImbalanceReport> out;
  for (auto& [key, times] : finish) {
    const double makespan = *std::max_element(times.begin(), times.end());
    out[key] = make_imbalance_report(times, makespan, counts[key]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profile store

/// One JSON document per (loop_id, n): <dir>/<loop_id>_<n>.json.
class ProfileStore {
 public:
  explicit ProfileStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& directory() const { return dir_; }

  std::filesystem::path path_for(const LoopDescriptor& d) const {
    return dir_ / (d.loop_id + "_" + std::to_string(d.n) + ".json");
  }

  void save(const LoopDescriptor& d, const WorkloadProfile& profile) const {
    profile.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    nlohmann::ordered_json j;
    j["loop_id"] = d.loop_id;
    j["n"] = d.n;
    j["mu"] = profile.mu;
    j["sigma"] = profile.sigma;
    j["h"] = profile.h;
    auto out = detail::open_sink(path_for(d));
    *out << j.dump(2) << '\n';
    if (!*out) throw Error(Errc::SinkUnwritable, "cannot write '" + path_for(d).string() + "'");
  }

  std::optional<WorkloadProfile> load(const LoopDescriptor& d) const {
    std::ifstream in(path_for(d));
    if (!in) return std::nullopt;
    try {
      const auto j = nlohmann::json::parse(in);
      WorkloadProfile p{j.at("mu").get<double>(), j.at("sigma").get<double>(), j.at("h").get<double>()};
      p.validate();
      return p;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, "profile '" + path_for(d).string() + "': " + e.what());
    }
  }

  /// Lookup hook for RunOptions::profile_source.
  std::function<std::optional<WorkloadProfile>(const LoopDescriptor&)> source() const {
    return [store = *this](const LoopDescriptor& d) { return store.load(d); };
  }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Profiling

struct ProfileOptions {
  const ProfileStore* store = nullptr;
  /// Receives the timer-overhead warning; nullptr silences it.
  std::ostream* warnings = &std::cerr;
  int overhead_rounds = 1001;
};

namespace detail {
inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

/// Median duration of one steady_clock read pair, in seconds.
inline double timer_cost(int samples = 1001) {
  using clock = std::chrono::steady_clock;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const auto a = clock::now();
    const auto b = clock::now();
    d.push_back(std::chrono::duration<double>(b - a).count());
  }
  return median(std::move(d));
}
}  // namespace detail

/// Median wall time in seconds of one scheduling round that hands out a chunk and
/// reports it finished, with no body. This is h for live runs.
inline double measure_round_overhead(int rounds = 1001) {
  using clock = std::chrono::steady_clock;
  ExecutionContext ctx;
  ctx.p = 1;
  ctx.technique = Technique::SS;
  LearnedState learned(1);
  LoopInstance inst(rounds, ctx, std::nullopt, learned);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(rounds));
  for (int i = 0; i < rounds; ++i) {
    const auto a = clock::now();
    auto c = inst.next_chunk(0);
    inst.complete(0, *c, 0.0, 0.0);
    const auto b = clock::now();
    d.push_back(std::chrono::duration<double>(b - a).count());
  }
  return detail::median(std::move(d));
}

/// Runs the loop once on the calling thread, timing every iteration. Returns mu and
/// the population sigma of iteration times (seconds) and h from measure_round_overhead.
template <class Body>
  requires std::invocable<Body&, Index>
WorkloadProfile profile_loop(const LoopDescriptor& descriptor, Body&& body, const ProfileOptions& options = {}) {
  descriptor.validate();
  using clock = std::chrono::steady_clock;
  RunningStats stats;
  for (Index i = 0; i < descriptor.n; ++i) {
    const auto a = clock::now();
    body(i);
    const auto b = clock::now();
    stats.add(std::chrono::duration<double>(b - a).count());
  }
  WorkloadProfile profile{stats.mean, stats.stddev(), measure_round_overhead(options.overhead_rounds)};
  const double timer = detail::timer_cost();
  if (options.warnings && timer > 0.05 * profile.mu)
    *options.warnings << "dlslab: warning: timer cost " << timer * 1e9 << " ns exceeds 5% of the mean iteration time "
                      << profile.mu * 1e9 << " ns for loop '" << descriptor.loop_id << "'\n";
  if (options.store) options.store->save(descriptor, profile);
  return profile;
}

/// Profile of a loop given its per-iteration costs (simulation units).
inline WorkloadProfile profile_loop(const LoopDescriptor& descriptor, std::span<const double> costs, double h,
                                    const ProfileOptions& options = {}) {
  descriptor.validate();
  if (static_cast<Index>(costs.size()) != descriptor.n)
    throw Error(Errc::InvalidParameters, "cost vector length must equal n");
  const WorkloadProfile profile = profile_costs(costs, h);
  if (options.store) options.store->save(descriptor, profile);
  return profile;
}

// ---------------------------------------------------------------------------
// Environment analogs

struct EnvSettings {
  std::optional<std::string> time_loops;    // DLSLAB_TIME_LOOPS
  bool print_chunks = false;                // DLSLAB_PRINT_CHUNKS
  std::optional<std::string> profile_data;  // DLSLAB_PROFILE_DATA
  std::optional<std::pair<Technique, Index>> schedule;  // DLSLAB_SCHEDULE

  /// Where chunk traces go when print_chunks is set.
  std::string chunk_trace_path() const {
    return time_loops ? *time_loops + ".chunks.ndjson" : std::string("dlslab.chunks.ndjson");
  }
};

/// Reads the DLSLAB_* variables. `get` defaults to std::getenv.
inline EnvSettings env_settings(const std::function<const char*(const char*)>& get = [](const char* k) {
  return std::getenv(k);
}) {
  EnvSettings s;
  const auto str = [&](const char* k) -> std::optional<std::string> {
    const char* v = get(k);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  s.time_loops = str("DLSLAB_TIME_LOOPS");
  if (auto v = str("DLSLAB_PRINT_CHUNKS")) {
    if (*v != "0" && *v != "1") throw Error(Errc::ConfigError, "DLSLAB_PRINT_CHUNKS must be 0 or 1");
    s.print_chunks = *v == "1";
  }
  s.profile_data = str("DLSLAB_PROFILE_DATA");
  if (auto v = str("DLSLAB_SCHEDULE")) s.schedule = parse_schedule(*v);
  return s;
}

/// Sinks and profile lookup configured from EnvSettings, ready to hand to the runtime.
class Measurement {
 public:
  explicit Measurement(const EnvSettings& env)
      : times_(env.time_loops.has_value(), env.time_loops.value_or("")),
        tracer_(env.print_chunks, env.chunk_trace_path()) {
    if (env.profile_data) store_.emplace(*env.profile_data);
  }

  RunOptions run_options() {
    RunOptions o;
    if (store_) o.profile_source = store_->source();
    o.observers = {&times_, &tracer_};
    return o;
  }

  LoopTimeRecorder& loop_times() { return times_; }
  ChunkTracer& tracer() { return tracer_; }
  const std::optional<ProfileStore>& store() const { return store_; }

 private:
  LoopTimeRecorder times_;
  ChunkTracer tracer_;
  std::optional<ProfileStore> store_;
};

}  // namespace dlslab
