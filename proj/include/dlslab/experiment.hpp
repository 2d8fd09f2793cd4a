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

// Experiment configs and the commands behind the dlslab CLI.
//
// A config is one JSON document:
//
//   {
//     "experiment": "dist",                 // output subdirectory
//     "loops": [
//       {"id": "L4", "n": 100000, "time_steps": 1,
//        "distribution": {"kind": "gamma"}},   // DIST defaults, fields overridable
//       {"id": "tri", "n": 5000, "kernel": "triangular", "base": 1e6}
//     ],
//     "techniques": ["ss", "gss"] | "all",
//     "p": [8],
//     "chunk_params": "default" | "halving" | [1, 97],
//     "repetitions": 5,
//     "seed": 42,
//     "output_dir": "results",
//     "overhead": {"h_assign": 0, "sync_mutex": 0, "sync_atomic": 0, "h_calc": {"fac": 1e3}},
//     "flop_scale": 1e-4,                    // live runs execute cost * flop_scale FLOP
//     "tap_alpha": 1.3, "wf_weights": [..], "slowdowns": [{"worker": 0, "factor": 2}],
//     "trace": false, "profile_dir": "profiles"
//   }

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dlslab/core.hpp"
#include "dlslab/measurement.hpp"
#include "dlslab/metrics.hpp"
#include "dlslab/runtime.hpp"
#include "dlslab/simulator.hpp"
#include "dlslab/trace.hpp"
#include "dlslab/workloads.hpp"
#include "json.hpp"

namespace dlslab {

using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config

enum class ChunkGridKind { Default, Halving, List };

struct LoopSpec {
  std::string id;
  Index n = 1;
  Index time_steps = 1;
  std::optional<DistributionSpec> distribution;
  std::string kernel;  // "triangular" or "mandelbrot" when no distribution
  double base = 1.0;

  LoopDescriptor descriptor() const { return {id, n, time_steps}; }
};

struct ExperimentConfig {
  std::string experiment = "experiment";
  std::vector<LoopSpec> loops;
  std::vector<Technique> techniques;
  std::vector<std::size_t> threads{1};
  ChunkGridKind grid = ChunkGridKind::Default;
  std::vector<Index> chunk_params;
  int repetitions = 5;
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  OverheadModel overhead;
  TechniqueOptions options;
  double flop_scale = 1.0;
  std::vector<Slowdown> slowdowns;
  bool trace = false;
  std::optional<std::string> profile_dir;
  /// The document as parsed (after CLI overrides); embedded in every output file.
  ojson source;
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string origin) : text_(text), origin_(std::move(origin)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& key, const std::string& msg,
                         int occurrence = 0) const {
    std::string where = origin_;
    if (const int line = line_of(key, occurrence); line > 0) where += ":" + std::to_string(line);
    throw Error(Errc::ConfigError, where + ": field '" + field + "': " + msg);
  }

  /// Line of the occurrence-th appearance of "key" in the text, or 0.
  int line_of(const std::string& key, int occurrence) const {
    if (key.empty()) return 0;
    const std::string needle = "\"" + key + "\"";
    std::size_t pos = 0;
    for (int i = 0; i <= occurrence; ++i) {
      pos = text_.find(needle, i == 0 ? 0 : pos + 1);
      if (pos == std::string::npos) return 0;
    }
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

 private:
  const std::string& text_;
  std::string origin_;
};

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace detail

/// Parses and validates a config document. Errors carry Errc::ConfigError and a
/// "<origin>:<line>: field '<path>': <reason>" message.
inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  ojson doc;
  try {
    doc = ojson::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ConfigError,
                origin + ":" + std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
  }
  return [&] {
    detail::ConfigReader rd(text, origin);
    if (!doc.is_object()) rd.fail("<root>", "", "config must be a JSON object");

    static const std::set<std::string> known{
        "experiment", "loops",       "techniques", "p",     "chunk_params", "repetitions",
        "seed",       "output_dir",  "overhead",   "flop_scale", "tap_alpha", "wf_weights",
        "slowdowns",  "trace",       "profile_dir"};
    for (const auto& [k, v] : doc.items())
      if (!known.count(k)) rd.fail(k, k, "unknown field");

    ExperimentConfig c;
    c.source = doc;
    const auto num = [&](const ojson& v, const std::string& field, const std::string& key, int occ = 0) {
      if (!v.is_number()) rd.fail(field, key, "expected a number", occ);
      return v.get<double>();
    };
    const auto integer = [&](const ojson& v, const std::string& field, const std::string& key, int occ = 0) {
      if (!v.is_number_integer()) rd.fail(field, key, "expected an integer", occ);
      return v.get<std::int64_t>();
    };
    const auto string = [&](const ojson& v, const std::string& field, const std::string& key, int occ = 0) {
      if (!v.is_string()) rd.fail(field, key, "expected a string", occ);
      return v.get<std::string>();
    };

    if (doc.contains("experiment")) {
      c.experiment = string(doc["experiment"], "experiment", "experiment");
      if (c.experiment.empty() || c.experiment.find('/') != std::string::npos)
        rd.fail("experiment", "experiment", "must be a non-empty name without '/'");
    }

    // loops
    if (!doc.contains("loops") || !doc["loops"].is_array() || doc["loops"].empty())
      rd.fail("loops", "loops", "expected a non-empty list of loops");
    std::map<std::string, int> key_seen;
    const auto occ = [&](const std::string& k) { return key_seen[k]++; };
    std::set<std::string> ids;
    for (std::size_t i = 0; i < doc["loops"].size(); ++i) {
      const auto& l = doc["loops"][i];
      const std::string at = "loops[" + std::to_string(i) + "]";
      if (!l.is_object()) rd.fail(at, "loops", "expected an object");
      LoopSpec s;
      for (const auto& [k, v] : l.items())
        if (k != "id" && k != "n" && k != "time_steps" && k != "distribution" && k != "kernel" && k != "base")
          rd.fail(at + "." + k, k, "unknown field");
      if (!l.contains("id")) rd.fail(at + ".id", "loops", "missing");
      s.id = string(l["id"], at + ".id", "id", occ("id"));
      if (s.id.empty() || s.id.find('/') != std::string::npos || !ids.insert(s.id).second)
        rd.fail(at + ".id", "id", "must be unique, non-empty and without '/'", key_seen["id"] - 1);
      if (!l.contains("n")) rd.fail(at + ".n", "loops", "missing");
      const int n_occ = occ("n");
      s.n = integer(l["n"], at + ".n", "n", n_occ);
      if (s.n < 1 || s.n > kMaxIterations) rd.fail(at + ".n", "n", "must satisfy 1 <= n < 2^32", n_occ);
      if (l.contains("time_steps")) {
        const int o = occ("time_steps");
        s.time_steps = integer(l["time_steps"], at + ".time_steps", "time_steps", o);
        if (s.time_steps < 1) rd.fail(at + ".time_steps", "time_steps", "must be >= 1", o);
      }
      const bool has_dist = l.contains("distribution");
      const bool has_kernel = l.contains("kernel");
      if (has_dist == has_kernel) rd.fail(at, s.id, "give exactly one of 'distribution' or 'kernel'");
      if (has_dist) {
        const auto& d = l["distribution"];
        const int o = occ("distribution");
        const std::string f = at + ".distribution";
        if (!d.is_object() || !d.contains("kind")) rd.fail(f, "distribution", "expected an object with 'kind'", o);
        DistributionSpec spec;
        try {
          spec = DistributionSpec::dist(parse_distribution(string(d["kind"], f + ".kind", "kind", o)), c.seed);
        } catch (const Error& e) {
          if (e.code() == Errc::ConfigError) throw;
          rd.fail(f + ".kind", "kind", e.what(), o);
        }
        spec.stream = i;
        for (const auto& [k, v] : d.items()) {
          if (k == "kind") continue;
          const std::string fk = f + "." + k;
          if (k == "value") spec.value = num(v, fk, k);
          else if (k == "mean") spec.mean = num(v, fk, k);
          else if (k == "stddev") spec.stddev = num(v, fk, k);
          else if (k == "rate") spec.rate = num(v, fk, k);
          else if (k == "shape") spec.shape = num(v, fk, k);
          else if (k == "scale") spec.scale = num(v, fk, k);
          else if (k == "lo") spec.lo = num(v, fk, k);
          else if (k == "hi") spec.hi = num(v, fk, k);
          else if (k == "seed") spec.seed = static_cast<std::uint64_t>(integer(v, fk, k));
          else rd.fail(fk, k, "unknown distribution field");
        }
        if (spec.kind == DistributionKind::Constant && !d.contains("lo") && !d.contains("hi"))
          spec.lo = spec.hi = spec.value;
        try {
          spec.validate();
        } catch (const Error& e) {
          rd.fail(f, "distribution", e.what(), o);
        }
        s.distribution = spec;
      } else {
        const int o = occ("kernel");
        s.kernel = string(l["kernel"], at + ".kernel", "kernel", o);
        if (s.kernel != "triangular" && s.kernel != "mandelbrot")
          rd.fail(at + ".kernel", "kernel", "unknown kernel '" + s.kernel + "' (valid: triangular, mandelbrot)", o);
        if (l.contains("base")) {
          s.base = num(l["base"], at + ".base", "base");
          if (!(s.base > 0.0)) rd.fail(at + ".base", "base", "must be > 0");
        }
      }
      c.loops.push_back(std::move(s));
    }

    // techniques
    if (!doc.contains("techniques")) rd.fail("techniques", "", "missing");
    const auto& tj = doc["techniques"];
    if (tj.is_string() && tj.get<std::string>() == "all") {
      c.techniques.assign(kAllTechniques.begin(), kAllTechniques.end());
    } else {
      if (!tj.is_array()) rd.fail("techniques", "techniques", "expected a list of names or \"all\"");
      if (tj.empty()) rd.fail("techniques", "techniques", "technique list is empty");
      for (std::size_t i = 0; i < tj.size(); ++i) {
        const std::string f = "techniques[" + std::to_string(i) + "]";
        try {
          c.techniques.push_back(parse_technique(string(tj[i], f, "techniques")));
        } catch (const Error& e) {
          if (e.code() == Errc::ConfigError) throw;
          rd.fail(f, "techniques", e.what());
        }
      }
    }

    if (doc.contains("p")) {
      c.threads.clear();
      const auto& pj = doc["p"];
      const auto add = [&](const ojson& v, const std::string& f) {
        const auto p = integer(v, f, "p");
        if (p < 1 || p > 4096) rd.fail(f, "p", "must satisfy 1 <= p <= 4096");
        c.threads.push_back(static_cast<std::size_t>(p));
      };
      if (pj.is_array()) {
        if (pj.empty()) rd.fail("p", "p", "list is empty");
        for (std::size_t i = 0; i < pj.size(); ++i) add(pj[i], "p[" + std::to_string(i) + "]");
      } else {
        add(pj, "p");
      }
    }

    if (doc.contains("chunk_params")) {
      const auto& kj = doc["chunk_params"];
      if (kj.is_string()) {
        const auto s = kj.get<std::string>();
        if (s == "default") c.grid = ChunkGridKind::Default;
        else if (s == "halving") c.grid = ChunkGridKind::Halving;
        else rd.fail("chunk_params", "chunk_params", "expected \"default\", \"halving\" or a list");
      } else if (kj.is_array() && !kj.empty()) {
        c.grid = ChunkGridKind::List;
        for (std::size_t i = 0; i < kj.size(); ++i) {
          const auto k = integer(kj[i], "chunk_params[" + std::to_string(i) + "]", "chunk_params");
          if (k < 1) rd.fail("chunk_params[" + std::to_string(i) + "]", "chunk_params", "must be >= 1");
          c.chunk_params.push_back(k);
        }
      } else {
        rd.fail("chunk_params", "chunk_params", "expected \"default\", \"halving\" or a non-empty list");
      }
    }

    if (doc.contains("repetitions")) {
      const auto r = integer(doc["repetitions"], "repetitions", "repetitions");
      if (r < 1 || r > 1000000) rd.fail("repetitions", "repetitions", "must be >= 1");
      c.repetitions = static_cast<int>(r);
    }
    if (doc.contains("seed")) {
      if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<std::int64_t>() >= 0))
        rd.fail("seed", "seed", "expected a non-negative integer");
      c.seed = doc["seed"].get<std::uint64_t>();
      for (std::size_t i = 0; i < c.loops.size(); ++i) {
        auto& d = c.loops[i].distribution;
        const auto& dj = doc["loops"][i];
        if (d && !(dj.contains("distribution") && dj["distribution"].contains("seed"))) d->seed = c.seed;
      }
    }
    if (doc.contains("output_dir")) c.output_dir = string(doc["output_dir"], "output_dir", "output_dir");
    if (doc.contains("profile_dir")) c.profile_dir = string(doc["profile_dir"], "profile_dir", "profile_dir");
    if (doc.contains("trace")) {
      if (!doc["trace"].is_boolean()) rd.fail("trace", "trace", "expected true or false");
      c.trace = doc["trace"].get<bool>();
    }
    if (doc.contains("flop_scale")) {
      c.flop_scale = num(doc["flop_scale"], "flop_scale", "flop_scale");
      if (!(c.flop_scale > 0.0)) rd.fail("flop_scale", "flop_scale", "must be > 0");
    }
    if (doc.contains("tap_alpha")) {
      c.options.tap_alpha = num(doc["tap_alpha"], "tap_alpha", "tap_alpha");
      if (!(c.options.tap_alpha >= 0.0)) rd.fail("tap_alpha", "tap_alpha", "must be >= 0");
    }
    if (doc.contains("wf_weights")) {
      const auto& w = doc["wf_weights"];
      if (!w.is_array()) rd.fail("wf_weights", "wf_weights", "expected a list of positive numbers");
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double x = num(w[i], "wf_weights[" + std::to_string(i) + "]", "wf_weights");
        if (!(x > 0.0)) rd.fail("wf_weights[" + std::to_string(i) + "]", "wf_weights", "must be > 0");
        c.options.wf_weights.push_back(x);
      }
      for (auto p : c.threads)
        if (!w.empty() && p != w.size()) rd.fail("wf_weights", "wf_weights", "needs one weight per thread for every p");
    }
    if (doc.contains("overhead")) {
      const auto& o = doc["overhead"];
      if (!o.is_object()) rd.fail("overhead", "overhead", "expected an object");
      for (const auto& [k, v] : o.items()) {
        const std::string f = "overhead." + k;
        if (k == "h_assign") c.overhead.h_assign = num(v, f, k);
        else if (k == "sync_mutex") c.overhead.sync_mutex = num(v, f, k);
        else if (k == "sync_atomic") c.overhead.sync_atomic = num(v, f, k);
        else if (k == "h_calc") {
          if (!v.is_object()) rd.fail(f, k, "expected an object keyed by technique");
          for (const auto& [tk, tv] : v.items()) {
            Technique t{};
            try {
              t = parse_technique(tk);
            } catch (const Error& e) {
              rd.fail(f + "." + tk, tk, e.what());
            }
            c.overhead.set_calc(t, num(tv, f + "." + tk, tk));
          }
        } else {
          rd.fail(f, k, "unknown field");
        }
      }
      try {
        c.overhead.validate();
      } catch (const Error& e) {
        rd.fail("overhead", "overhead", e.what());
      }
    }
    if (doc.contains("slowdowns")) {
      const auto& s = doc["slowdowns"];
      if (!s.is_array()) rd.fail("slowdowns", "slowdowns", "expected a list");
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string f = "slowdowns[" + std::to_string(i) + "]";
        if (!s[i].is_object() || !s[i].contains("worker") || !s[i].contains("factor"))
          rd.fail(f, "slowdowns", "expected {\"worker\": w, \"factor\": f[, \"after_chunk\": c]}");
        Slowdown sd;
        const auto w = integer(s[i]["worker"], f + ".worker", "worker");
        if (w < 0) rd.fail(f + ".worker", "worker", "must be >= 0");
        sd.worker = static_cast<std::size_t>(w);
        sd.factor = num(s[i]["factor"], f + ".factor", "factor");
        if (!(sd.factor > 0.0)) rd.fail(f + ".factor", "factor", "must be > 0");
        if (s[i].contains("after_chunk")) sd.after_chunk = integer(s[i]["after_chunk"], f + ".after_chunk", "after_chunk");
        c.slowdowns.push_back(sd);
      }
    }
    return c;
  }();
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, "cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

/// n/(2p), n/(4p), ... down to 1 (integer division), deduplicated, descending, with 1.
inline std::vector<Index> halving_grid(Index n, std::size_t p) {
  if (n < 1 || p < 1) throw Error(Errc::InvalidParameters, "halving grid needs n >= 1 and p >= 1");
  std::vector<Index> out;
  Index denom = 2 * static_cast<Index>(p);
  while (denom <= n) {
    const Index k = n / denom;
    if (out.empty() || out.back() != k) out.push_back(k);
    if (denom > n / 2) break;
    denom *= 2;
  }
  if (out.empty() || out.back() != 1) out.push_back(1);
  return out;
}

inline std::vector<Index> chunk_grid(const ExperimentConfig& c, const LoopSpec& loop, std::size_t p) {
  std::vector<Index> ks;
  switch (c.grid) {
    case ChunkGridKind::Default: ks = {1}; break;
    case ChunkGridKind::Halving: ks = halving_grid(loop.n, p); break;
    case ChunkGridKind::List:
      for (Index k : c.chunk_params)
        if (k <= loop.n) ks.push_back(k);
      break;
  }
  return ks;
}

// ---------------------------------------------------------------------------
// Loop costs

/// Per-iteration costs of a configured loop. Deterministic in the config.
inline std::vector<double> loop_costs(const LoopSpec& loop) {
  if (loop.distribution) return generate_costs(*loop.distribution, loop.n).costs;
  std::vector<double> costs(static_cast<std::size_t>(loop.n));
  if (loop.kernel == "triangular") {
    for (Index i = 0; i < loop.n; ++i)
      costs[static_cast<std::size_t>(i)] = loop.base * static_cast<double>(i + 1) / static_cast<double>(loop.n);
    return costs;
  }
  // mandelbrot: iteration i is pixel (i mod w, i div w) of a w-wide image of
  // [-2, 0.5] x [-1.25, 1.25]; cost = escape-time iterations (max 256) * base.
  const auto w = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(loop.n))));
  const Index h = (loop.n + w - 1) / w;
  for (Index i = 0; i < loop.n; ++i) {
    const double cr = -2.0 + 2.5 * (static_cast<double>(i % w) + 0.5) / static_cast<double>(w);
    const double ci = -1.25 + 2.5 * (static_cast<double>(i / w) + 0.5) / static_cast<double>(h);
    double zr = 0.0, zi = 0.0;
    int it = 0;
    while (it < 256 && zr * zr + zi * zi <= 4.0) {
      const double t = zr * zr - zi * zi + cr;
      zi = 2.0 * zr * zi + ci;
      zr = t;
      ++it;
    }
    costs[static_cast<std::size_t>(i)] = loop.base * static_cast<double>(std::max(it, 1));
  }
  return costs;
}

// ---------------------------------------------------------------------------
// Results

struct CellResult {
  std::string loop;
  std::size_t p = 1;
  Technique technique = Technique::Static;
  Index chunk_param = 1;
  std::vector<double> times;  // per repetition: sum of instance T_par
  std::vector<double> cov;    // per repetition: mean over instances
  std::vector<double> pi;
  Index o_sr = 0;             // first repetition
  double overhead_total = 0.0;

  double mean_time() const {
    double s = 0.0;
    for (double t : times) s += t;
    return s / static_cast<double>(times.size());
  }
  static double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
  }
};

struct CommandResult {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
  std::vector<CellResult> cells;
};

namespace detail {

inline std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return s.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::SinkUnwritable, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(Errc::SinkUnwritable, "write to '" + path.string() + "' failed");
}

inline std::string dir_experiment(const ExperimentConfig& c, std::size_t p) {
  return c.threads.size() > 1 ? c.experiment + "_p" + std::to_string(p) : c.experiment;
}

inline std::filesystem::path cell_dir(const ExperimentConfig& c, const std::string& loop, std::size_t p,
                                      Technique t, Index k) {
  return std::filesystem::path(c.output_dir) / dir_experiment(c, p) / loop / std::string(name(t)) /
         std::to_string(k);
}

inline ojson provenance(const ExperimentConfig& c) {
  ojson j;
  j["config"] = c.source;
  j["seed"] = c.seed;
  return j;
}

inline ojson instance_json(const ImbalanceReport& r) {
  ojson j;
  j["thread_times"] = r.thread_times;
  j["t_par"] = r.t_par;
  j["cov"] = r.cov;
  j["pi"] = r.pi;
  j["chunk_count"] = r.chunk_count;
  return j;
}

inline void write_summary(const ExperimentConfig& c, const std::string& mode, const std::vector<CellResult>& cells,
                          CommandResult& result) {
  const std::filesystem::path base = std::filesystem::path(c.output_dir) / c.experiment;
  std::ostringstream csv;
  csv << "# config: " << c.source.dump() << "\n# seed: " << c.seed << "\n";
  csv << "loop,p,technique,chunk_param,repetitions,mean_time,min_time,max_time,cov,pi,o_sr,overhead_total\n";
  ojson j = provenance(c);
  j["mode"] = mode;
  j["cells"] = ojson::array();
  for (const auto& cell : cells) {
    const auto [mn, mx] = std::minmax_element(cell.times.begin(), cell.times.end());
    csv << cell.loop << ',' << cell.p << ',' << name(cell.technique) << ',' << cell.chunk_param << ','
        << cell.times.size() << ',' << fmt(cell.mean_time()) << ',' << fmt(*mn) << ',' << fmt(*mx) << ','
        << fmt(CellResult::mean(cell.cov)) << ',' << fmt(CellResult::mean(cell.pi)) << ',' << cell.o_sr << ','
        << fmt(cell.overhead_total) << '\n';
    ojson cj;
    cj["loop"] = cell.loop;
    cj["p"] = cell.p;
    cj["technique"] = name(cell.technique);
    cj["chunk_param"] = cell.chunk_param;
    cj["times"] = cell.times;
    cj["mean_time"] = cell.mean_time();
    cj["cov"] = CellResult::mean(cell.cov);
    cj["pi"] = CellResult::mean(cell.pi);
    cj["o_sr"] = cell.o_sr;
    cj["overhead_total"] = cell.overhead_total;
    j["cells"].push_back(std::move(cj));
  }
  write_file(base / "summary.csv", csv.str());
  write_file(base / "summary.json", j.dump(2) + "\n");
  result.files.push_back(base / "summary.csv");
  result.files.push_back(base / "summary.json");
}

struct CellKey {
  std::size_t loop;
  std::size_t p;
  Technique technique;
  Index k;
};

inline std::vector<CellKey> enumerate_cells(const ExperimentConfig& c) {
  std::vector<CellKey> keys;
  for (std::size_t li = 0; li < c.loops.size(); ++li)
    for (auto p : c.threads)
      for (auto t : c.techniques)
        for (Index k : chunk_grid(c, c.loops[li], p)) keys.push_back({li, p, t, k});
  return keys;
}

inline ExecutionContext context_for(const ExperimentConfig& c, std::size_t p, Technique t, Index k) {
  ExecutionContext ctx;
  ctx.p = p;
  ctx.technique = t;
  ctx.chunk_param = k;
  ctx.options = c.options;
  if (!ctx.options.wf_weights.empty() && ctx.options.wf_weights.size() != p) ctx.options.wf_weights.clear();
  return ctx;
}

/// Runs fn(i) for i in [0, count) on up to hardware_concurrency threads; rethrows the
/// first failure (lowest index).
template <class Fn>
void parallel_cells(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

/// Simulates every (loop, p, technique, k) cell. Output is a function of the config alone.
inline CommandResult cmd_simulate(const ExperimentConfig& c) {
  if (c.techniques.empty()) throw Error(Errc::ConfigError, "technique list is empty");
  CommandResult result;
  if (c.repetitions > 1)
    result.warnings.push_back("simulation is deterministic; repetitions=" + std::to_string(c.repetitions) +
                              " collapsed to 1");
  std::vector<std::vector<double>> costs;
  for (const auto& l : c.loops) costs.push_back(loop_costs(l));
  const auto keys = detail::enumerate_cells(c);
  std::vector<CellResult> cells(keys.size());
  std::vector<std::vector<std::filesystem::path>> files(keys.size());
  detail::parallel_cells(keys.size(), [&](std::size_t i) {
    const auto& key = keys[i];
    const auto& loop = c.loops[key.loop];
    SimOptions opt;
    opt.slowdowns = c.slowdowns;
    opt.record_trace = c.trace;
    const auto rep =
        simulate(loop.descriptor(), detail::context_for(c, key.p, key.technique, key.k), costs[key.loop], c.overhead, opt);
    CellResult& cell = cells[i];
    cell = {loop.id, key.p, key.technique, key.k, {rep.makespan}, {}, {}, rep.o_sr, rep.overhead_total};
    double cov = 0.0, pi = 0.0;
    ojson j = detail::provenance(c);
    j["mode"] = "simulate";
    j["loop"] = loop.id;
    j["p"] = key.p;
    j["technique"] = name(key.technique);
    j["chunk_param"] = key.k;
    j["rep"] = 0;
    j["makespan"] = rep.makespan;
    j["o_sr"] = rep.o_sr;
    j["o_cs"] = rep.o_cs;
    j["o_sync"] = rep.o_sync;
    j["overhead_total"] = rep.overhead_total;
    j["busy"] = rep.busy;
    j["iterations"] = rep.iterations;
    j["instances"] = ojson::array();
    for (const auto& inst : rep.instances) {
      j["instances"].push_back(detail::instance_json(inst.imbalance));
      cov += inst.imbalance.cov;
      pi += inst.imbalance.pi;
    }
    cell.cov = {cov / static_cast<double>(rep.instances.size())};
    cell.pi = {pi / static_cast<double>(rep.instances.size())};
    const auto dir = detail::cell_dir(c, loop.id, key.p, key.technique, key.k);
    detail::write_file(dir / "rep0.json", j.dump(2) + "\n");
    files[i].push_back(dir / "rep0.json");
    if (c.trace) {
      std::ostringstream t;
      write_trace_ndjson(t, rep.trace);
      detail::write_file(dir / "rep0.trace.ndjson", t.str());
      files[i].push_back(dir / "rep0.trace.ndjson");
    }
  });
  for (auto& f : files) result.files.insert(result.files.end(), f.begin(), f.end());
  detail::write_summary(c, "simulate", cells, result);
  result.cells = std::move(cells);
  return result;
}

/// Executes every cell live on a thread pool, one cell at a time. Iteration i runs
/// flop_kernel(cost_i * flop_scale). Times are seconds.
inline CommandResult cmd_run(const ExperimentConfig& c, std::ostream* log = nullptr) {
  if (c.techniques.empty()) throw Error(Errc::ConfigError, "technique list is empty");
  CommandResult result;
  std::optional<ProfileStore> store;
  if (c.profile_dir) store.emplace(*c.profile_dir);
  double flop_rate = 0.0;
  double round_h = -1.0;

  std::vector<std::vector<double>> costs;
  for (const auto& l : c.loops) costs.push_back(loop_costs(l));
  const auto keys = detail::enumerate_cells(c);
  std::map<std::size_t, std::unique_ptr<ThreadPool>> pools;

  for (const auto& key : keys) {
    const auto& loop = c.loops[key.loop];
    const auto& cst = costs[key.loop];
    auto& pool = pools[key.p];
    if (!pool) pool = std::make_unique<ThreadPool>(key.p);

    RunOptions opt;
    if (requires_profile(key.technique)) {
      if (store) opt.profile = store->load(loop.descriptor());
      if (!opt.profile) {
        // No stored profile: derive one from the declared costs and the measured rate.
        if (flop_rate == 0.0) flop_rate = calibrate_flop_rate();
        if (round_h < 0.0) round_h = measure_round_overhead();
        const auto prof = profile_costs(cst, 0.0);
        const double to_s = c.flop_scale / flop_rate;
        opt.profile = WorkloadProfile{std::max(prof.mu * to_s, 1e-12), prof.sigma * to_s, round_h};
      }
    }
    CellResult cell{loop.id, key.p, key.technique, key.k, {}, {}, {}, 0, 0.0};
    const auto dir = detail::cell_dir(c, loop.id, key.p, key.technique, key.k);
    for (int r = 0; r < c.repetitions; ++r) {
      ChunkTracer tracer;
      if (c.trace) tracer = ChunkTracer(true, dir / ("rep" + std::to_string(r) + ".trace.ndjson"));
      opt.observers = {&tracer};
      struct alignas(64) Sink {
        double v = 0.0;
      };
      std::vector<Sink> sinks(key.p);
      Loop lp(loop.descriptor(), detail::context_for(c, key.p, key.technique, key.k));
      const double scale = c.flop_scale;
      const auto reports = lp.run(
          *pool, [&](Index i, std::size_t t) { sinks[t].v += flop_kernel(cst[static_cast<std::size_t>(i)] * scale); },
          opt);
      double total = 0.0, cov = 0.0, pi = 0.0, wall = 0.0;
      Index rounds = 0;
      ojson j = detail::provenance(c);
      j["mode"] = "run";
      j["loop"] = loop.id;
      j["p"] = key.p;
      j["technique"] = name(key.technique);
      j["chunk_param"] = key.k;
      j["rep"] = r;
      j["instances"] = ojson::array();
      for (const auto& rep : reports) {
        total += rep.imbalance.t_par;
        cov += rep.imbalance.cov;
        pi += rep.imbalance.pi;
        wall += rep.wall_time;
        rounds += rep.imbalance.chunk_count;
        auto ij = detail::instance_json(rep.imbalance);
        ij["wall_time"] = rep.wall_time;
        j["instances"].push_back(std::move(ij));
      }
      j["makespan"] = total;
      j["wall_time"] = wall;
      j["o_sr"] = rounds;
      double sink = 0.0;
      for (const auto& s : sinks) sink += s.v;
      j["checksum"] = sink;
      detail::write_file(dir / ("rep" + std::to_string(r) + ".json"), j.dump(2) + "\n");
      result.files.push_back(dir / ("rep" + std::to_string(r) + ".json"));
      if (c.trace) result.files.push_back(dir / ("rep" + std::to_string(r) + ".trace.ndjson"));
      cell.times.push_back(total);
      cell.cov.push_back(cov / static_cast<double>(reports.size()));
      cell.pi.push_back(pi / static_cast<double>(reports.size()));
      if (r == 0) cell.o_sr = rounds;
    }
    if (log)
      *log << loop.id << " p=" << key.p << ' ' << name(key.technique) << " k=" << key.k
           << " mean=" << detail::fmt(cell.mean_time()) << " s\n";
    result.cells.push_back(std::move(cell));
  }
  detail::write_summary(c, "run", result.cells, result);
  return result;
}

struct SweepRow {
  std::string loop;
  std::size_t p = 1;
  Technique technique = Technique::Static;
  Index chunk_param = 1;
  double time = 0.0;
  bool best = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  /// Best combination over techniques at k = 1, and with each technique at its best k.
  std::map<std::size_t, Selection> best_default;
  std::map<std::size_t, Selection> best_tuned;
  CommandResult files;
};

/// Time vs. chunk parameter over the halving grid (or the configured list), simulated
/// unless `live` is set.
inline SweepResult cmd_sweep(ExperimentConfig c, bool live = false) {
  if (c.grid == ChunkGridKind::Default) c.grid = ChunkGridKind::Halving;
  if (!live) c.repetitions = 1;
  const std::string saved_experiment = c.experiment;
  c.experiment += "/sweep_cells";
  CommandResult cells = live ? cmd_run(c) : cmd_simulate(c);
  c.experiment = saved_experiment;

  SweepResult out;
  out.files = cells;
  std::map<std::tuple<std::string, std::size_t, Technique>, std::size_t> best_row;
  for (const auto& cell : cells.cells) {
    out.rows.push_back({cell.loop, cell.p, cell.technique, cell.chunk_param, cell.mean_time(), false});
    const auto key = std::make_tuple(cell.loop, cell.p, cell.technique);
    auto it = best_row.find(key);
    if (it == best_row.end() || cell.mean_time() < out.rows[it->second].time) best_row[key] = out.rows.size() - 1;
  }
  for (const auto& [key, idx] : best_row) out.rows[idx].best = true;

  std::map<std::size_t, std::map<std::string, std::map<std::string, double>>> def, tuned;
  for (const auto& r : out.rows) {
    if (r.chunk_param == 1) def[r.p][r.loop][std::string(name(r.technique))] = r.time;
    if (r.best) tuned[r.p][r.loop][std::string(name(r.technique))] = r.time;
  }
  for (const auto& [p, t] : def) out.best_default[p] = best_combination(t);
  for (const auto& [p, t] : tuned) out.best_tuned[p] = best_combination(t);

  const auto base = std::filesystem::path(c.output_dir) / c.experiment;
  std::ostringstream csv;
  csv << "# config: " << c.source.dump() << "\n# seed: " << c.seed << "\n";
  csv << "loop,p,technique,chunk_param,time,best\n";
  ojson j = detail::provenance(c);
  j["mode"] = live ? "run" : "simulate";
  j["rows"] = ojson::array();
  for (const auto& r : out.rows) {
    csv << r.loop << ',' << r.p << ',' << name(r.technique) << ',' << r.chunk_param << ',' << detail::fmt(r.time)
        << ',' << (r.best ? 1 : 0) << '\n';
    ojson rj;
    rj["loop"] = r.loop;
    rj["p"] = r.p;
    rj["technique"] = name(r.technique);
    rj["chunk_param"] = r.chunk_param;
    rj["time"] = r.time;
    rj["best"] = r.best;
    j["rows"].push_back(std::move(rj));
  }
  j["best_combination"] = ojson::array();
  for (const auto& [p, sel] : out.best_tuned) {
    ojson bj;
    bj["p"] = p;
    bj["best_tuned_total"] = sel.best_total;
    if (out.best_default.count(p)) bj["best_default_total"] = out.best_default.at(p).best_total;
    csv << "# best p=" << p << " default_k=" << (out.best_default.count(p) ? detail::fmt(out.best_default.at(p).best_total) : "")
        << " best_k=" << detail::fmt(sel.best_total) << '\n';
    j["best_combination"].push_back(std::move(bj));
  }
  detail::write_file(base / "sweep.csv", csv.str());
  detail::write_file(base / "sweep.json", j.dump(2) + "\n");
  out.files.files.push_back(base / "sweep.csv");
  out.files.files.push_back(base / "sweep.json");
  return out;
}

struct ReportResult {
  /// One selection per p value found in the inputs.
  std::map<std::size_t, Selection> selections;
  ojson json;
  std::string csv;
};

/// Reads summary.json files and builds the Best-combination and imbalance tables.
/// For every (loop, p, technique) the fastest chunk parameter is used.
inline ReportResult cmd_report(const std::vector<std::filesystem::path>& inputs) {
  if (inputs.empty()) throw Error(Errc::EmptyInput, "no report inputs");
  struct Entry {
    double time;
    Index k;
    double cov, pi;
  };
  std::map<std::size_t, std::map<std::string, std::map<std::string, Entry>>> by_p;
  ojson sources = ojson::array();
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot read '" + path.string() + "'");
    ojson j;
    try {
      j = ojson::parse(in);
      ojson src;
      src["file"] = path.string();
      src["config"] = j.at("config");
      src["seed"] = j.at("seed");
      sources.push_back(std::move(src));
      for (const auto& cell : j.at("cells")) {
        const auto p = cell.at("p").get<std::size_t>();
        const auto loop = cell.at("loop").get<std::string>();
        const auto tech = cell.at("technique").get<std::string>();
        const Entry e{cell.at("mean_time").get<double>(), cell.at("chunk_param").get<Index>(),
                      cell.at("cov").get<double>(), cell.at("pi").get<double>()};
        auto& slot = by_p[p][loop];
        auto it = slot.find(tech);
        if (it == slot.end() || e.time < it->second.time) slot[tech] = e;
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, path.string() + ": " + e.what());
    }
  }
  ReportResult out;
  std::ostringstream csv;
  csv << "# inputs: " << sources.dump() << "\n";
  out.json["inputs"] = sources;
  out.json["reports"] = ojson::array();
  for (const auto& [p, loops] : by_p) {
    std::map<std::string, std::map<std::string, double>> times;
    for (const auto& [loop, techs] : loops)
      for (const auto& [tech, e] : techs) times[loop][tech] = e.time;
    const Selection sel = best_combination(times);
    out.selections[p] = sel;
    ojson rj;
    rj["p"] = p;
    rj["best_total"] = sel.best_total;
    rj["per_loop"] = ojson::array();
    csv << "section,p,loop,technique,chunk_param,time,degradation_percent,cov,pi\n";
    for (const auto& ch : sel.per_loop) {
      const auto& e = loops.at(ch.loop).at(ch.technique);
      csv << "best," << p << ',' << ch.loop << ',' << ch.technique << ',' << e.k << ',' << detail::fmt(ch.time)
          << ",," << detail::fmt(e.cov) << ',' << detail::fmt(e.pi) << '\n';
      ojson lj;
      lj["loop"] = ch.loop;
      lj["technique"] = ch.technique;
      lj["chunk_param"] = e.k;
      lj["time"] = ch.time;
      rj["per_loop"].push_back(std::move(lj));
    }
    csv << "best_total," << p << ",,,," << detail::fmt(sel.best_total) << ",0,,\n";
    rj["techniques"] = ojson::array();
    for (const auto& [tech, total] : sel.technique_total) {
      csv << "technique_total," << p << ",," << tech << ",," << detail::fmt(total) << ','
          << detail::fmt(sel.degradation_percent.at(tech)) << ",,\n";
      ojson tj;
      tj["technique"] = tech;
      tj["total"] = total;
      tj["degradation_percent"] = sel.degradation_percent.at(tech);
      rj["techniques"].push_back(std::move(tj));
    }
    rj["imbalance"] = ojson::array();
    for (const auto& [loop, techs] : loops)
      for (const auto& [tech, e] : techs) {
        csv << "imbalance," << p << ',' << loop << ',' << tech << ',' << e.k << ',' << detail::fmt(e.time) << ",,"
            << detail::fmt(e.cov) << ',' << detail::fmt(e.pi) << '\n';
        ojson ij;
        ij["loop"] = loop;
        ij["technique"] = tech;
        ij["chunk_param"] = e.k;
        ij["cov"] = e.cov;
        ij["pi"] = e.pi;
        rj["imbalance"].push_back(std::move(ij));
      }
    out.json["reports"].push_back(std::move(rj));
  }
  out.csv = csv.str();
  return out;
}

/// Profiles every loop into the store. Simulated profiles use cost units and
/// h = the overhead model's SS round cost; live profiles time flop_kernel in seconds.
inline std::vector<std::pair<LoopDescriptor, WorkloadProfile>> cmd_profile(const ExperimentConfig& c, bool live,
                                                                           const ProfileStore& store) {
  std::vector<std::pair<LoopDescriptor, WorkloadProfile>> out;
  ProfileOptions opt;
  opt.store = &store;
  for (const auto& loop : c.loops) {
    const auto costs = loop_costs(loop);
    const auto d = loop.descriptor();
    WorkloadProfile prof;
    if (live) {
      volatile double sink = 0.0;
      const double scale = c.flop_scale;
      prof = profile_loop(d, [&](Index i) { sink = sink + flop_kernel(costs[static_cast<std::size_t>(i)] * scale); }, opt);
    } else {
      prof = profile_loop(d, std::span<const double>(costs), c.overhead.round_cost(Technique::SS), opt);
    }
    out.emplace_back(d, prof);
  }
  return out;
}

enum class DumpFormat { Csv, Progression, Ndjson };

inline DumpFormat parse_dump_format(std::string_view s) {
  if (s == "csv") return DumpFormat::Csv;
  if (s == "progression") return DumpFormat::Progression;
  if (s == "ndjson") return DumpFormat::Ndjson;
  throw Error(Errc::ConfigError, "unknown format '" + std::string(s) + "' (valid: csv, progression, ndjson)");
}

/// Converts an NDJSON chunk trace. "progression" emits the (chunk id, size) series
/// per loop instance.
inline void trace_dump(std::istream& in, std::ostream& out, DumpFormat format) {
  auto records = read_trace_ndjson(in);
  switch (format) {
    case DumpFormat::Csv: sort_trace(records); write_trace_csv(out, records); break;
    case DumpFormat::Ndjson: sort_trace(records); write_trace_ndjson(out, records); break;
    case DumpFormat::Progression:
      out << "loop_id,instance,chunk_id,chunk_size,thread\n";
      for (const auto& [key, series] : chunk_progression(std::move(records)))
        for (const auto& pt : series)
          out << key.first << ',' << key.second << ',' << pt.chunk_id << ',' << pt.size << ',' << pt.thread << '\n';
      break;
  }
}

}  // namespace dlslab
