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

// Runs a triangular loop under a few techniques, live and simulated.
//
//   DLSLAB_SCHEDULE=fac2 DLSLAB_TIME_LOOPS=times.csv DLSLAB_PRINT_CHUNKS=1 ./sample_quickstart

#include <cstdio>
#include <iostream>

#include "dlslab/dlslab.hpp"

int main() {
  using namespace dlslab;
  const Index n = 20000;
  std::vector<double> costs(n);
  for (Index i = 0; i < n; ++i) costs[static_cast<std::size_t>(i)] = 2000.0 * static_cast<double>(i + 1) / n;

  const EnvSettings env = env_settings();
  Measurement measure(env);
  ThreadPool pool(4);
  std::vector<double> sink(4);

  std::vector<std::pair<Technique, Index>> schedules{{Technique::Static, 1}, {Technique::GSS, 1}, {Technique::AF, 1}};
  if (env.schedule) schedules = {*env.schedule};

  for (const auto& [tech, k] : schedules) {
    ExecutionContext ctx;
    ctx.p = 4;
    ctx.technique = tech;
    ctx.chunk_param = k;
    const LoopDescriptor desc{"triangle", n, 3};

    Loop loop(desc, ctx);
    RunOptions opt = measure.run_options();
    if (requires_profile(tech)) opt.profile = profile_costs(costs, 0.0);
    const auto live = loop.run(
        pool, [&](Index i, std::size_t t) { sink[t] += flop_kernel(costs[static_cast<std::size_t>(i)]); }, opt);

    OverheadModel overhead;
    overhead.h_assign = 50.0;
    const auto sim = simulate(desc, ctx, costs, overhead);

    std::printf("%-6s k=%-3lld live t_par=%.6f s  p.i.=%5.1f%%   simulated p.i.=%5.1f%%  chunks=%lld\n",
                std::string(name(tech)).c_str(), static_cast<long long>(k), live.back().imbalance.t_par,
                live.back().imbalance.pi, sim.imbalance().pi, static_cast<long long>(sim.o_sr));
  }
  double total = 0.0;
  for (double s : sink) total += s;
  std::cerr << "checksum " << total << '\n';
}
