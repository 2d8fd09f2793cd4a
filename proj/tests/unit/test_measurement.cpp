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

#include <fstream>
#include <numeric>
#include <sstream>

#include "test_util.hpp"

namespace dlslab {
namespace {

using namespace dlslab::testing;

std::vector<TraceRecord> traced(Index n, ExecutionContext c, Index steps = 1) {
  ThreadPool pool(c.p);
  std::ostringstream sink;
  ChunkTracer tracer(true, &sink);
  RunOptions o;
  o.profile = WorkloadProfile{1.0, 0.5, 0.1};
  o.observers = {&tracer};
  Loop(loop(n, steps), c).run(pool, [](Index) {}, o);
  std::istringstream in(sink.str());
  const auto back = read_trace_ndjson(in);
  EXPECT_EQ(back, tracer.records());
  return back;
}

TEST(ChunkTracer, StaticGivesOneRecordPerThread) {
  const auto r = traced(1000, ctx(4, Technique::Static));
  EXPECT_EQ(r.size(), 4u);
  for (const auto& x : r) EXPECT_EQ(x.chunk_size, 250);
}

TEST(ChunkTracer, SsGivesOneRecordPerIteration) {
  const auto r = traced(1000, ctx(4, Technique::SS));
  EXPECT_EQ(r.size(), 1000u);
  Index total = 0;
  for (const auto& x : r) total += x.chunk_size;
  EXPECT_EQ(total, 1000);
}

TEST(ChunkTracer, RecordsCoverEveryTimeStep) {
  const auto r = traced(300, ctx(3, Technique::GSS), 3);
  std::set<Index> instances;
  for (const auto& x : r) instances.insert(x.instance);
  EXPECT_EQ(instances, (std::set<Index>{0, 1, 2}));
}

TEST(LoopTimeRecorder, OneRowPerThreadPerInstance) {
  ThreadPool pool(4);
  std::ostringstream sink;
  LoopTimeRecorder rec(true, &sink);
  RunOptions o;
  o.observers = {&rec};
  Loop(loop(5000, 2), ctx(4, Technique::GSS)).run(pool, [](Index) {}, o);
  ASSERT_EQ(rec.rows().size(), 8u);
  std::istringstream in(sink.str());
  const auto rows = read_loop_times_csv(in);
  ASSERT_EQ(rows.size(), 8u);
  Index iterations = 0;
  for (const auto& r : rows) {
    iterations += r.iterations;
    EXPECT_GE(r.finish_time, r.busy_time);
  }
  EXPECT_EQ(iterations, 10000);
}

TEST(LoopTimeRecorder, SimulationRows) {
  LoopTimeRecorder rec(true, static_cast<std::ostream*>(nullptr));
  const auto rep = simulate(loop(100, 3), ctx(2, Technique::SS), std::vector<double>(100, 1.0), {});
  rec.on_simulation(rep);
  EXPECT_EQ(rec.rows().size(), 6u);
  EXPECT_DOUBLE_EQ(rec.rows()[0].finish_time + rec.rows()[1].finish_time, 100.0);
}

TEST(Sinks, DisabledSinksWriteNothing) {
  const auto dir = scratch("disabled_sinks");
  ChunkTracer tracer(false, dir / "trace.ndjson");
  LoopTimeRecorder rec(false, dir / "times.csv");
  ThreadPool pool(2);
  RunOptions o;
  o.observers = {&tracer, &rec};
  Loop(loop(100), ctx(2, Technique::SS)).run(pool, [](Index) {}, o);
  EXPECT_FALSE(std::filesystem::exists(dir / "trace.ndjson"));
  EXPECT_FALSE(std::filesystem::exists(dir / "times.csv"));
  EXPECT_TRUE(tracer.records().empty());
  EXPECT_TRUE(rec.rows().empty());
}

TEST(Sinks, UnwritablePath) {
  const auto bad = scratch("unwritable") / "missing_dir" / "x.ndjson";
  try {
    ChunkTracer tracer(true, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SinkUnwritable);
  }
  EXPECT_THROW(LoopTimeRecorder(true, bad), Error);
}

TEST(Trace, ImbalanceFromTraceMatchesReports) {
  ThreadPool pool(3);
  std::ostringstream sink;
  ChunkTracer tracer(true, &sink);
  RunOptions o;
  o.observers = {&tracer};
  const std::vector<double> costs = generate_costs(DistributionSpec::dist(DistributionKind::Uniform, 4), 900).costs;
  Loop lp(loop(900, 2), ctx(3, Technique::FAC2));
  const auto reports = lp.run(pool, [](Index) {}, o, VirtualClock(costs, OverheadModel{}));
  const auto rebuilt = imbalance_from_trace(tracer.records(), 3);
  ASSERT_EQ(rebuilt.size(), 2u);
  for (const auto& r : reports) {
    const auto& b = rebuilt.at({"L", r.instance});
    EXPECT_NEAR(b.pi, r.imbalance.pi, 1e-9);
    EXPECT_NEAR(b.cov, r.imbalance.cov, 1e-12);
  }
  auto bad = tracer.records();
  bad.push_back(bad.front());
  bad.back().thread = 2;
  EXPECT_THROW(imbalance_from_trace(bad, 2), Error);
}

TEST(ProfileStore, RoundTripsBitExactly) {
  const ProfileStore store(scratch("profile_store"));
  const WorkloadProfile p{0.1 + 0.2, 1.0 / 3.0, 6.02214076e-23};
  store.save(loop(77, 1, "kernel"), p);
  EXPECT_EQ(store.path_for(loop(77, 1, "kernel")).filename(), "kernel_77.json");
  const auto back = store.load(loop(77, 1, "kernel"));
  ASSERT_TRUE(back);
  EXPECT_EQ(back->mu, p.mu);
  EXPECT_EQ(back->sigma, p.sigma);
  EXPECT_EQ(back->h, p.h);
  EXPECT_FALSE(store.load(loop(78, 1, "kernel")));
}

TEST(ProfileStore, CorruptFileIsConfigError) {
  const ProfileStore store(scratch("profile_store_bad"));
  std::filesystem::create_directories(store.directory());
  std::ofstream(store.path_for(loop(5))) << "{\"mu\": ";
  try {
    store.load(loop(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigError);
  }
}

TEST(Profile, ConstantCostsHaveZeroSigma) {
  const std::vector<double> costs(1000, 4.0);
  const auto p = profile_loop(loop(1000), costs, 0.5);
  EXPECT_EQ(p.mu, 4.0);
  EXPECT_EQ(p.sigma, 0.0);
  EXPECT_EQ(p.h, 0.5);
}

TEST(Profile, CostProfileIsSavedAndFeedsFac) {
  const ProfileStore store(scratch("profile_feed"));
  const auto costs = generate_costs(DistributionSpec::dist(DistributionKind::Gamma, 1), 2000).costs;
  ProfileOptions po;
  po.store = &store;
  profile_loop(loop(2000), costs, 1e6, po);
  ThreadPool pool(2);
  RunOptions o;
  o.profile_source = store.source();
  EXPECT_NO_THROW(Loop(loop(2000), ctx(2, Technique::FAC)).run(pool, [](Index) {}, o));
}

TEST(Profile, LiveNormalLoopMatchesGroundTruth) {
  // Normal DIST loop, n=1000, each iteration running its cost in FLOPs scaled down
  // by 1e4 so the test takes well under a second.
  const double scale = 1e-4;
  const auto costs = generate_costs(DistributionSpec::dist(DistributionKind::Normal, 3), 1000).costs;
  const double rate = calibrate_flop_rate(0.1);
  volatile double sink = 0.0;
  ProfileOptions po;
  po.warnings = nullptr;
  po.overhead_rounds = 101;
  const auto p = profile_loop(
      loop(1000), [&](Index i) { sink = sink + flop_kernel(costs[static_cast<std::size_t>(i)] * scale); }, po);
  const double truth = 9.5e8 * scale / rate;
  EXPECT_NEAR(p.mu, truth, 0.1 * truth);
  EXPECT_GT(p.sigma, 0.0);
  EXPECT_GT(p.h, 0.0);
}

TEST(Profile, WarnsWhenTimerDominates) {
  std::ostringstream warn;
  ProfileOptions po;
  po.warnings = &warn;
  po.overhead_rounds = 11;
  profile_loop(loop(100), [](Index) {}, po);
  EXPECT_NE(warn.str().find("timer cost"), std::string::npos);
}

TEST(Env, ReadsVariables) {
  std::map<std::string, std::string> vars{{"DLSLAB_TIME_LOOPS", "/tmp/t.csv"},
                                          {"DLSLAB_PRINT_CHUNKS", "1"},
                                          {"DLSLAB_PROFILE_DATA", "/tmp/prof"},
                                          {"DLSLAB_SCHEDULE", "fac2,4"}};
  const auto get = [&](const char* k) -> const char* {
    auto it = vars.find(k);
    return it == vars.end() ? nullptr : it->second.c_str();
  };
  const auto s = env_settings(get);
  EXPECT_EQ(s.time_loops, "/tmp/t.csv");
  EXPECT_TRUE(s.print_chunks);
  EXPECT_EQ(s.chunk_trace_path(), "/tmp/t.csv.chunks.ndjson");
  EXPECT_EQ(s.profile_data, "/tmp/prof");
  EXPECT_EQ(s.schedule, (std::pair<Technique, Index>{Technique::FAC2, 4}));

  vars = {{"DLSLAB_PRINT_CHUNKS", "yes"}};
  EXPECT_THROW(env_settings(get), Error);
  vars = {{"DLSLAB_SCHEDULE", "static,-1"}};
  EXPECT_THROW(env_settings(get), Error);
  vars.clear();
  const auto none = env_settings(get);
  EXPECT_FALSE(none.time_loops);
  EXPECT_FALSE(none.print_chunks);
  EXPECT_EQ(none.chunk_trace_path(), "dlslab.chunks.ndjson");
}

TEST(Env, MeasurementWiresSinks) {
  const auto dir = scratch("measurement");
  EnvSettings env;
  env.time_loops = (dir / "times.csv").string();
  env.print_chunks = true;
  Measurement m(env);
  ThreadPool pool(2);
  Loop(loop(50), ctx(2, Technique::GSS)).run(pool, [](Index) {}, m.run_options());
  EXPECT_EQ(m.loop_times().rows().size(), 2u);
  EXPECT_FALSE(m.tracer().records().empty());
  EXPECT_TRUE(std::filesystem::exists(dir / "times.csv.chunks.ndjson"));
  std::ifstream in(dir / "times.csv");
  EXPECT_EQ(read_loop_times_csv(in).size(), 2u);
}

}  // namespace
}  // namespace dlslab
