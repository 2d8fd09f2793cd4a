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

double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42, 3), b(42, 3), c(42, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformRange) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_GT(r.uniform_open0(), 0.0);
  }
}

TEST(Distributions, ConstantIsExact) {
  const auto v = generate_costs(DistributionSpec::dist(DistributionKind::Constant), 1000);
  for (double x : v.costs) EXPECT_EQ(x, 2.3e8);
}

TEST(Distributions, NormalMeanAndClip) {
  const auto v = generate_costs(DistributionSpec::dist(DistributionKind::Normal, 9), 100000);
  EXPECT_NEAR(mean(v.costs), 9.5e8, 0.01 * 9.5e8);
  for (double x : v.costs) {
    ASSERT_GE(x, 6e8);
    ASSERT_LE(x, 1.3e9);
  }
}

TEST(Distributions, ClipRangesHold) {
  for (auto k : {DistributionKind::Uniform, DistributionKind::Exponential, DistributionKind::Gamma}) {
    const auto spec = DistributionSpec::dist(k, 5);
    for (double x : generate_costs(spec, 20000).costs) {
      ASSERT_GE(x, spec.lo);
      ASSERT_LE(x, spec.hi);
    }
  }
}

TEST(Distributions, GammaAndExponentialMeans) {
  // Clipping removes little mass, so the means stay near shape*scale and 1/rate.
  EXPECT_NEAR(mean(generate_costs(DistributionSpec::dist(DistributionKind::Gamma, 2), 100000).costs), 2e8, 0.02 * 2e8);
  EXPECT_NEAR(mean(generate_costs(DistributionSpec::dist(DistributionKind::Exponential, 2), 100000).costs), 3e8,
              0.02 * 3e8);
}

TEST(Distributions, DeterministicInSeed) {
  const auto spec = DistributionSpec::dist(DistributionKind::Gamma, 77);
  EXPECT_EQ(generate_costs(spec, 500).costs, generate_costs(spec, 500).costs);
  auto other = spec;
  other.seed = 78;
  EXPECT_NE(generate_costs(spec, 500).costs, generate_costs(other, 500).costs);
}

TEST(Distributions, Validation) {
  auto s = DistributionSpec::dist(DistributionKind::Normal);
  s.lo = 5.0;
  s.hi = 1.0;
  EXPECT_THROW(s.validate(), Error);
  auto z = DistributionSpec::dist(DistributionKind::Normal);
  z.mean = 0.0;
  z.stddev = 1.0;
  z.lo = 1e6;
  z.hi = 2e6;
  EXPECT_THROW(generate_costs(z, 1), Error);
  EXPECT_THROW(parse_distribution("cauchy"), Error);
}

TEST(FlopKernel, CalibratesPositiveRate) {
  EXPECT_GT(calibrate_flop_rate(0.01), 0.0);
  EXPECT_TRUE(std::isfinite(flop_kernel(1000.0)));
}

TEST(Metrics, CovExamples) {
  const std::vector<double> equal{3.0, 3.0, 3.0};
  EXPECT_EQ(compute_cov(equal), 0.0);
  const std::vector<double> t{1.0, 1.0, 1.0, 2.0};
  EXPECT_NEAR(compute_cov(t), 0.34641016151377546, 1e-15);  // oracle
  const std::vector<double> one{5.0};
  EXPECT_EQ(compute_cov(one), 0.0);
}

TEST(Metrics, PiExamples) {
  const std::vector<double> t{1.0, 1.0, 1.0, 2.0};
  EXPECT_NEAR(compute_pi(t, 4).percent, 50.0, 1e-12);  // oracle
  const std::vector<double> equal{2.0, 2.0};
  EXPECT_EQ(compute_pi(equal, 2).percent, 0.0);
  const std::vector<double> one{2.0};
  EXPECT_TRUE(compute_pi(one, 1).single_thread);
  EXPECT_EQ(compute_pi(one, 1).percent, 0.0);
  // One thread does all the work: 100%.
  const std::vector<double> skew{4.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(compute_pi(skew, 4).percent, 100.0, 1e-12);
}

TEST(Metrics, Errors) {
  const std::vector<double> none;
  const std::vector<double> zeros{0.0, 0.0};
  try {
    compute_cov(none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
  try {
    compute_cov(zeros);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroMean);
  }
  EXPECT_THROW(compute_pi(zeros, 3), Error);
}

TEST(Metrics, ReportOfIdleThreadsIsBalanced) {
  const auto r = make_imbalance_report({0.0, 0.0}, 0.0, 0);
  EXPECT_EQ(r.pi, 0.0);
  EXPECT_EQ(r.cov, 0.0);
}

}  // namespace
}  // namespace dlslab
