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

// dlslab: run, simulate, sweep, report, profile, trace-dump.
// Exit codes: 0 success, 2 config error, 3 runtime error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dlslab/dlslab.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Overrides {
  std::optional<std::string> experiment;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> repetitions;
  std::vector<std::size_t> p;
  std::vector<std::string> techniques;
  std::optional<std::string> chunk_params;
  bool trace = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--experiment", experiment, "Override the experiment name");
    cmd->add_option("-o,--output-dir", output_dir, "Override the output directory");
    cmd->add_option("--seed", seed, "Override the seed");
    cmd->add_option("--repetitions", repetitions, "Override the repetition count");
    cmd->add_option("-p,--threads", p, "Override the thread counts")->delimiter(',');
    cmd->add_option("-t,--techniques", techniques, "Override the technique list (or 'all')")->delimiter(',');
    cmd->add_option("-k,--chunk-params", chunk_params, "'default', 'halving' or comma-separated values");
    cmd->add_flag("--trace", trace, "Write chunk traces");
  }

  // Applied to the JSON document so overridden values pass the same validation and
  // are what the outputs embed.
  void apply(nlohmann::ordered_json& doc) const {
    if (experiment) doc["experiment"] = *experiment;
    if (output_dir) doc["output_dir"] = *output_dir;
    if (seed) doc["seed"] = *seed;
    if (repetitions) doc["repetitions"] = *repetitions;
    if (!p.empty()) doc["p"] = p;
    if (techniques.size() == 1 && techniques[0] == "all")
      doc["techniques"] = "all";
    else if (!techniques.empty())
      doc["techniques"] = techniques;
    if (chunk_params) {
      if (*chunk_params == "default" || *chunk_params == "halving") {
        doc["chunk_params"] = *chunk_params;
      } else {
        auto ks = nlohmann::ordered_json::array();
        std::stringstream ss(*chunk_params);
        for (std::string item; std::getline(ss, item, ',');) {
          try {
            ks.push_back(std::stoll(item));
          } catch (const std::exception&) {
            throw dlslab::Error(dlslab::Errc::ConfigError, "--chunk-params: '" + item + "' is not an integer");
          }
        }
        doc["chunk_params"] = ks;
      }
    }
    if (trace) doc["trace"] = true;
  }
};

dlslab::ExperimentConfig load(const std::string& path, const Overrides& ov) {
  std::ifstream in(path);
  if (!in) throw dlslab::Error(dlslab::Errc::ConfigError, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  // Parse once for diagnostics against the file as written, then re-parse with overrides.
  dlslab::parse_config(text, path);
  auto doc = nlohmann::ordered_json::parse(text, nullptr, true, true);
  ov.apply(doc);
  return dlslab::parse_config(doc.dump(2), path + " (with overrides)");
}

int exit_code(dlslab::Errc e) {
  switch (e) {
    case dlslab::Errc::ConfigError:
    case dlslab::Errc::InvalidParameters:
    case dlslab::Errc::UnknownTechnique:
    case dlslab::Errc::EmptyInput: return kConfigError;
    default: return kRuntimeError;
  }
}

// Per-cell files are counted; summaries and sweep tables are listed.
void print_files(const dlslab::CommandResult& r) {
  for (const auto& w : r.warnings) std::cerr << "dlslab: warning: " << w << '\n';
  std::size_t cell_files = 0;
  for (const auto& f : r.files) {
    const auto stem = f.stem().string();
    if (stem == "summary" || stem == "sweep")
      std::cout << f.string() << '\n';
    else
      ++cell_files;
  }
  std::cout << cell_files << " per-run files written\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic loop self-scheduling laboratory"};
  app.require_subcommand(1);

  std::string config;
  Overrides ov;

  auto* run = app.add_subcommand("run", "Execute the experiment live on the thread pool");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  ov.attach(run);

  auto* simulate = app.add_subcommand("simulate", "Run the experiment through the simulator");
  simulate->add_option("config", config, "Experiment config (JSON)")->required();
  ov.attach(simulate);

  bool sweep_live = false;
  auto* sweep = app.add_subcommand("sweep", "Time vs. chunk parameter over the halving grid");
  sweep->add_option("config", config, "Experiment config (JSON)")->required();
  sweep->add_flag("--live", sweep_live, "Execute live instead of simulating");
  ov.attach(sweep);

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Best combination and imbalance tables from summary.json files");
  report->add_option("inputs", report_inputs, "summary.json files")->required();
  report->add_option("-o,--output", report_out, "Output prefix (writes <prefix>.csv and <prefix>.json)");

  bool profile_live = false;
  std::string profile_dir;
  auto* profile = app.add_subcommand("profile", "Measure mu, sigma and h for each loop");
  profile->add_option("config", config, "Experiment config (JSON)")->required();
  profile->add_option("--store", profile_dir, "Profile directory (default: profile_dir, DLSLAB_PROFILE_DATA)");
  profile->add_flag("--live", profile_live, "Time the live kernel instead of using declared costs");

  std::string trace_in;
  std::string trace_format = "csv";
  auto* dump = app.add_subcommand("trace-dump", "Convert an NDJSON chunk trace");
  dump->add_option("trace", trace_in, "Trace file (NDJSON)")->required();
  dump->add_option("-f,--format", trace_format, "csv, progression or ndjson");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) {
      print_files(dlslab::cmd_run(load(config, ov), &std::cerr));
    } else if (*simulate) {
      print_files(dlslab::cmd_simulate(load(config, ov)));
    } else if (*sweep) {
      const auto r = dlslab::cmd_sweep(load(config, ov), sweep_live);
      print_files(r.files);
      for (const auto& [p, sel] : r.best_tuned) {
        std::cout << "p=" << p << " best combination with best k: " << sel.best_total;
        if (r.best_default.count(p)) std::cout << " (k=1: " << r.best_default.at(p).best_total << ")";
        std::cout << '\n';
      }
    } else if (*report) {
      std::vector<std::filesystem::path> inputs(report_inputs.begin(), report_inputs.end());
      const auto r = dlslab::cmd_report(inputs);
      if (report_out.empty()) {
        std::cout << r.csv;
      } else {
        dlslab::detail::write_file(report_out + ".csv", r.csv);
        dlslab::detail::write_file(report_out + ".json", r.json.dump(2) + "\n");
        std::cout << report_out << ".csv\n" << report_out << ".json\n";
      }
    } else if (*profile) {
      const auto cfg = load(config, ov);
      std::string dir = profile_dir;
      if (dir.empty() && cfg.profile_dir) dir = *cfg.profile_dir;
      if (dir.empty()) dir = dlslab::env_settings().profile_data.value_or("");
      if (dir.empty()) throw dlslab::Error(dlslab::Errc::ConfigError, "no profile directory given");
      const dlslab::ProfileStore store(dir);
      for (const auto& [d, prof] : dlslab::cmd_profile(cfg, profile_live, store))
        std::cout << store.path_for(d).string() << " mu=" << prof.mu << " sigma=" << prof.sigma << " h=" << prof.h
                  << '\n';
    } else if (*dump) {
      std::ifstream in(trace_in);
      if (!in) throw dlslab::Error(dlslab::Errc::ConfigError, "cannot read '" + trace_in + "'");
      dlslab::trace_dump(in, std::cout, dlslab::parse_dump_format(trace_format));
    }
  } catch (const dlslab::Error& e) {
    std::cerr << "dlslab: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "dlslab: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
