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

#include <gtest/gtest.h>

#include <numeric>

#include "test_util.hpp"

namespace dlslab {
namespace {

using namespace dlslab::testing;

SimOptions with_profile(double mu = 1.0, double sigma = 0.3, double h = 1.0) {
  SimOptions o;
  o.profile = WorkloadProfile{mu, sigma, h};
  return o;
}

TEST(Simulate, PartitionFuzz) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 600; ++i) {
    const auto t = kAllTechniques[rng() % kAllTechniques.size()];
    const Index n = 1 + static_cast<Index>(rng() % 30000);
    const std::size_t p = 1 + rng() % 64;
    const Index k = 1 + static_cast<Index>(rng() % std::min<Index>(n, 300));
    std::vector<double> costs(static_cast<std::size_t>(n));
    for (auto& c : costs) c = 1.0 + static_cast<double>(rng() % 100);
    const auto rep = simulate(loop(n), ctx(p, t, k), costs, {}, with_profile());
    ASSERT_TRUE(partitions(rep.chunks(), n)) << name(t) << " n=" << n << " p=" << p << " k=" << k;
    EXPECT_EQ(rep.o_sr, static_cast<Index>(rep.chunks().size()));
  }
}

TEST(Simulate, BusyTimeConservation) {
  auto costs = generate_costs(DistributionSpec::dist(DistributionKind::Gamma, 1), 20000).costs;
  const double total = std::accumulate(costs.begin(), costs.end(), 0.0);
  for (auto t : kAllTechniques) {
    const auto rep = simulate(loop(20000), ctx(8, t), costs, {}, with_profile(2e8, 1.4e8, 1e6));
    const double busy = std::accumulate(rep.busy.begin(), rep.busy.end(), 0.0);
    EXPECT_NEAR(busy, total, 1e-9 * total) << name(t);
  }
}

TEST(Simulate, StaticConstantCostsIsBalanced) {
  const std::vector<double> costs(1000, 3.0);
  const auto rep = simulate(loop(1000), ctx(4, Technique::Static), costs, {});
  EXPECT_DOUBLE_EQ(rep.makespan, 250 * 3.0);
  EXPECT_EQ(rep.imbalance().pi, 0.0);
}

TEST(Simulate, SingleThreadMakespan) {
  const std::vector<double> costs(1000, 2.0);
  OverheadModel o;
  o.h_assign = 0.5;
  for (auto t : {Technique::SS, Technique::GSS, Technique::FAC2}) {
    const auto rep = simulate(loop(1000), ctx(1, t), costs, o);
    EXPECT_DOUBLE_EQ(rep.makespan, 2000.0 + 0.5 * static_cast<double>(rep.o_sr));
  }
}

TEST(Simulate, SingleIteration) {
  for (auto t : kAllTechniques) {
    const auto rep = simulate(loop(1), ctx(3, t), std::vector<double>{1.0}, {}, with_profile());
    ASSERT_EQ(rep.chunks().size(), 1u) << name(t);
    EXPECT_EQ(rep.chunks()[0].size, 1);
  }
}

TEST(Simulate, SsVersusGssOverhead) {
  const std::vector<double> costs(10000, 1.0);
  OverheadModel o;
  o.h_assign = 0.1;
  const auto ss = simulate(loop(10000), ctx(4, Technique::SS, 5), costs, o);
  const auto gss = simulate(loop(10000), ctx(4, Technique::GSS), costs, o);
  EXPECT_EQ(ss.o_sr, 2000);
  EXPECT_GE(ss.o_sr, gss.o_sr);
  EXPECT_GT(ss.overhead_total, gss.overhead_total);
}

TEST(Simulate, OverheadComponents) {
  const std::vector<double> costs(1000, 1.0);
  OverheadModel o;
  o.h_assign = 1.0;
  o.set_calc(Technique::FAC, 2.0);
  o.sync_mutex = 3.0;
  o.sync_atomic = 4.0;
  const auto fac = simulate(loop(1000), ctx(4, Technique::FAC), costs, o, with_profile());
  EXPECT_DOUBLE_EQ(fac.o_cs, 2.0 * static_cast<double>(fac.o_sr));
  EXPECT_DOUBLE_EQ(fac.o_sync, 3.0 * static_cast<double>(fac.o_sr));
  EXPECT_DOUBLE_EQ(fac.overhead_total, 6.0 * static_cast<double>(fac.o_sr));
  const auto gss = simulate(loop(1000), ctx(4, Technique::GSS), costs, o);
  EXPECT_DOUBLE_EQ(gss.o_sync, 4.0 * static_cast<double>(gss.o_sr));
  const auto st = simulate(loop(1000), ctx(4, Technique::Static), costs, o);
  EXPECT_EQ(st.o_sync, 0.0);
}

TEST(Simulate, Deterministic) {
  auto costs = generate_costs(DistributionSpec::dist(DistributionKind::Exponential, 3), 5000).costs;
  for (auto t : kAllTechniques) {
    SimOptions opt = with_profile();
    opt.record_trace = true;
    const auto a = simulate(loop(5000, 2), ctx(6, t, 3), costs, {}, opt);
    const auto b = simulate(loop(5000, 2), ctx(6, t, 3), costs, {}, opt);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.makespan, b.makespan);
  }
}

TEST(Simulate, TraceMatchesChunks) {
  SimOptions opt;
  opt.record_trace = true;
  const auto rep = simulate(loop(1000, 2), ctx(4, Technique::SS), std::vector<double>(1000, 1.0), {}, opt);
  EXPECT_EQ(rep.trace.size(), 2000u);
  for (const auto& r : rep.trace) {
    EXPECT_LE(r.t_sched_begin, r.t_body_begin);
    EXPECT_LE(r.t_body_begin, r.t_body_end);
  }
}

TEST(Simulate, SelfProfilesAndRejectsZeroCosts) {
  EXPECT_NO_THROW(simulate(loop(100), ctx(4, Technique::FAC), std::vector<double>(100, 1.0), {}));
  try {
    simulate(loop(100), ctx(4, Technique::FAC), std::vector<double>(100, 0.0), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ProfileMissing);
  }
}

TEST(Simulate, InvalidInputs) {
  EXPECT_THROW(simulate(loop(10), ctx(4, Technique::SS), std::vector<double>(9, 1.0), {}), Error);
  EXPECT_THROW(simulate(loop(10), ctx(4, Technique::SS, 11), std::vector<double>(10, 1.0), {}), Error);
  EXPECT_THROW(simulate(loop(10), ctx(4, Technique::SS), std::vector<double>(10, -1.0), {}), Error);
}

TEST(Simulate, Fac2HalvingStaircase) {
  const auto chunks = sim_chunks(1000000, ctx(20, Technique::FAC2, 97));
  EXPECT_EQ(chunks.front().size, 25000);
  std::map<Index, Index> batch_size;
  for (const auto& c : chunks)
    if (!batch_size.count(*c.batch)) batch_size[*c.batch] = c.size;
  EXPECT_EQ(batch_size[1], 12500);
  EXPECT_EQ(batch_size[2], 6250);
  for (auto it = std::next(batch_size.begin()); it != batch_size.end(); ++it)
    EXPECT_LE(it->second, std::prev(it)->second);
}

// Replay of AF / mAF frozen from tests/oracles/af_replay.py (an independent
// implementation of the same event loop).
std::vector<double> af_costs(Index n) {
  std::vector<double> c(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = 1e-4 * (1.0 + static_cast<double>(i % 7) / 7.0);
  return c;
}

TEST(Simulate, AfFrozenReplay) {
  OverheadModel o;
  o.h_assign = 1e-5;
  const std::vector<Index> af{10,   10,   10,   10,  24990, 18357, 13769, 10258, 7888, 6068, 4527, 3505, 2607, 1981, 1480,
                              1107, 837,  640,  479, 361,   274,   204,   155,   117,  88,   66,   50,   38,   28,   22,
                              16,   12,   9,    7,   5,     4,     3,     2,     2,    1,    1,    1,    1};
  const std::vector<Index> maf{10,   10,   10,   10,  24990, 18359, 13772, 10260, 7909, 6073, 4531, 3498, 2604, 1977, 1477,
                               1104, 835,  637,  477, 359,   272,   203,   154,   116,  87,   66,   50,   37,   28,   21,
                               16,   12,   9,    7,   5,     4,     3,     2,     2,    1,    1,    1,    1};
  EXPECT_EQ(sizes(sim_chunks(100000, ctx(4, Technique::AF), af_costs(100000), o)), af);
  EXPECT_EQ(sizes(sim_chunks(100000, ctx(4, Technique::MAF), af_costs(100000), o)), maf);
}

TEST(Simulate, MafEqualsAfWithoutOverhead) {
  const auto costs = generate_costs(DistributionSpec::dist(DistributionKind::Uniform, 8), 30000).costs;
  EXPECT_EQ(sim_chunks(30000, ctx(5, Technique::AF), costs), sim_chunks(30000, ctx(5, Technique::MAF), costs));
}

TEST(Simulate, UntriggeredAwfEqualsWf2) {
  const auto costs = generate_costs(DistributionSpec::dist(DistributionKind::Gamma, 4), 30000).costs;
  EXPECT_EQ(sizes(sim_chunks(30000, ctx(6, Technique::AWF), costs)),
            sizes(sim_chunks(30000, ctx(6, Technique::WF2), costs)));
}

TEST(Simulate, AwfBShrinksSlowThread) {
  SimOptions opt;
  opt.slowdowns.push_back({0, 2.0, 8});  // thread 0 runs twice as slow once batches 0 and 1 are out
  const auto chunks = sim_chunks(200000, ctx(4, Technique::AWF_B), {}, {}, opt);
  ASSERT_TRUE(partitions(chunks, 200000));
  // Within a later batch, thread 0 receives less than the others.
  std::map<Index, std::map<std::uint32_t, Index>> per_batch;
  for (const auto& c : chunks) per_batch[*c.batch][c.thread] += c.size;
  int checked = 0;
  for (const auto& [b, by_thread] : per_batch) {
    if (b < 3 || by_thread.size() < 4) continue;
    const Index slow = by_thread.at(0);
    for (std::uint32_t t = 1; t < 4; ++t)
      if (by_thread.at(t) > 4) {
        EXPECT_LT(slow, by_thread.at(t)) << "batch " << b;
      }
    if (++checked == 4) break;
  }
  EXPECT_GT(checked, 0);
}

TEST(Simulate, AwfLearnsAcrossTimeSteps) {
  SimOptions opt;
  opt.slowdowns.push_back({0, 3.0, 0});
  const auto rep = simulate(loop(40000, 3), ctx(4, Technique::AWF), std::vector<double>(40000, 1.0), {}, opt);
  const auto& first = rep.instances[0].chunks;
  const auto& third = rep.instances[2].chunks;
  const auto first_of = [](const std::vector<Chunk>& cs, std::uint32_t t) {
    return std::find_if(cs.begin(), cs.end(), [&](const Chunk& c) { return c.thread == t; })->size;
  };
  EXPECT_EQ(first_of(first, 0), first_of(first, 1));
  EXPECT_LT(first_of(third, 0), first_of(third, 1));
  EXPECT_LT(rep.instances[2].imbalance.t_par, rep.instances[0].imbalance.t_par);
}

TEST(BestCombination, Examples) {
  const auto single = best_combination({{"L", {{"gss", 5.0}}}});
  EXPECT_EQ(single.per_loop.at(0).technique, "gss");
  EXPECT_EQ(single.degradation_percent.at("gss"), 0.0);

  const auto two = best_combination({{"L", {{"a", 10.0}, {"b", 12.0}}}});
  EXPECT_NEAR(two.degradation_percent.at("b"), 20.0, 1e-12);

  const auto mixed = best_combination({{"L1", {{"A", 1.0}, {"B", 3.0}}}, {"L2", {{"A", 4.0}, {"B", 2.0}}}});
  EXPECT_EQ(mixed.per_loop.at(0).technique, "A");
  EXPECT_EQ(mixed.per_loop.at(1).technique, "B");
  EXPECT_EQ(mixed.best_total, 3.0);
  EXPECT_LT(mixed.best_total, std::min(mixed.technique_total.at("A"), mixed.technique_total.at("B")));
  EXPECT_THROW(best_combination({}), Error);
}

}  // namespace
}  // namespace dlslab
