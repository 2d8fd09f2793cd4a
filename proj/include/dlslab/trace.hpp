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

// Chunk trace records and per-thread loop-time rows, with their file formats.
//
// Chunk traces are newline-delimited JSON, one object per scheduling round, keys in
// this order: loop_id, instance, thread, chunk_start, chunk_size, t_sched_begin,
// t_body_begin, t_body_end. Live runs stamp nanoseconds since the start of the loop
// instance; simulations stamp abstract cost units.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dlslab/core.hpp"
#include "json.hpp"

namespace dlslab {

struct TraceRecord {
  std::string loop_id;
  Index instance = 0;
  std::uint32_t thread = 0;
  Index chunk_start = 0;
  Index chunk_size = 0;
  double t_sched_begin = 0.0;
  double t_body_begin = 0.0;
  double t_body_end = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

inline nlohmann::ordered_json to_json(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["loop_id"] = r.loop_id;
  j["instance"] = r.instance;
  j["thread"] = r.thread;
  j["chunk_start"] = r.chunk_start;
  j["chunk_size"] = r.chunk_size;
  j["t_sched_begin"] = r.t_sched_begin;
  j["t_body_begin"] = r.t_body_begin;
  j["t_body_end"] = r.t_body_end;
  return j;
}

inline TraceRecord trace_record_from_json(const nlohmann::json& j) {
  TraceRecord r;
  r.loop_id = j.at("loop_id").get<std::string>();
  r.instance = j.at("instance").get<Index>();
  r.thread = j.at("thread").get<std::uint32_t>();
  r.chunk_start = j.at("chunk_start").get<Index>();
  r.chunk_size = j.at("chunk_size").get<Index>();
  r.t_sched_begin = j.at("t_sched_begin").get<double>();
  r.t_body_begin = j.at("t_body_begin").get<double>();
  r.t_body_end = j.at("t_body_end").get<double>();
  return r;
}

inline void write_trace_ndjson(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<TraceRecord> read_trace_ndjson(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(trace_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, "trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& records) {
  out << "loop_id,instance,thread,chunk_start,chunk_size,t_sched_begin,t_body_begin,t_body_end\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : records)
    out << r.loop_id << ',' << r.instance << ',' << r.thread << ',' << r.chunk_start << ','
        << r.chunk_size << ',' << r.t_sched_begin << ',' << r.t_body_begin << ',' << r.t_body_end
        << '\n';
}

/// Orders records by (loop, instance, chunk_start). Every technique reserves
/// iterations from a monotone cursor, so this is also the order chunks were handed out.
inline void sort_trace(std::vector<TraceRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const TraceRecord& a, const TraceRecord& b) {
    if (a.loop_id != b.loop_id) return a.loop_id < b.loop_id;
    if (a.instance != b.instance) return a.instance < b.instance;
    return a.chunk_start < b.chunk_start;
  });
}

/// (chunk id, chunk size) series for one loop instance: the chunk-size progression.
struct ProgressionPoint {
  Index chunk_id = 0;
  Index size = 0;
  std::uint32_t thread = 0;
};

inline std::map<std::pair<std::string, Index>, std::vector<ProgressionPoint>> chunk_progression(
    std::vector<TraceRecord> records) {
  sort_trace(records);
  std::map<std::pair<std::string, Index>, std::vector<ProgressionPoint>> out;
  for (const auto& r : records) {
    auto& series = out[{r.loop_id, r.instance}];
    series.push_back({static_cast<Index>(series.size()), r.chunk_size, r.thread});
  }
  return out;
}

// ---------------------------------------------------------------------------

/// One row of the per-thread loop-time table.
struct LoopTimeRow {
  std::string loop_id;
  Index instance = 0;
  std::uint32_t thread = 0;
  double finish_time = 0.0;
  double busy_time = 0.0;
  double sched_time = 0.0;
  Index iterations = 0;
};

inline void write_loop_times_csv_header(std::ostream& out) {
  out << "loop_id,instance,thread,finish_time,busy_time,sched_time,iterations\n";
}

inline void write_loop_time_row(std::ostream& out, const LoopTimeRow& r) {
  std::ostringstream line;
  line << std::setprecision(std::numeric_limits<double>::max_digits10) << r.loop_id << ','
       << r.instance << ',' << r.thread << ',' << r.finish_time << ',' << r.busy_time << ','
       << r.sched_time << ',' << r.iterations << '\n';
  out << line.str();
}

inline std::vector<LoopTimeRow> read_loop_times_csv(std::istream& in) {
  std::vector<LoopTimeRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ss(line);
    LoopTimeRow r;
    std::string field;
    std::getline(ss, r.loop_id, ',');
    std::getline(ss, field, ',');
    r.instance = std::stoll(field);
    std::getline(ss, field, ',');
    r.thread = static_cast<std::uint32_t>(std::stoul(field));
    std::getline(ss, field, ',');
    r.finish_time = std::stod(field);
    std::getline(ss, field, ',');
    r.busy_time = std::stod(field);
    std::getline(ss, field, ',');
    r.sched_time = std::stod(field);
    std::getline(ss, field, ',');
    r.iterations = std::stoll(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace dlslab
