//------------------------------------------------------------------------------
//
//   Copyright 2026 The sdcredit Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include "fixtures.hpp"
#include "sdcredit/oracle.hpp"
#include "sdcredit/sec3.hpp"
#include "sdcredit/sec4.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace {

using namespace sdcredit;
using sdcredit::testing::impatience_config;
using sdcredit::testing::uniform_grid_config;

double sup_distance(std::vector<double> const &a, std::vector<double> const &b)
{
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
  {
    d = std::max(d, std::abs(a[k] - b[k]));
  }
  return d;
}

// Rooted at one initial type, so date t has N^(t-2) parents.
TEST(Program, ConstraintCount)
{
  for (int T : {3, 4, 5})
  {
    for (int N : {2, 3})
    {
      auto const prog = oracle::build_program(uniform_grid_config(static_cast<std::size_t>(N), T), 0);
      std::size_t want = 0;
      for (int t = 2; t <= T - 1; ++t)
      {
        want += static_cast<std::size_t>(std::pow(N, t - 2)) * static_cast<std::size_t>(N * (N - 1));
      }
      EXPECT_EQ(prog.ics.size(), want) << "T=" << T << " N=" << N;
    }
  }
}

TEST(Program, CoefficientsMatchPolicyEvaluation)
{
  auto cfg = uniform_grid_config(3, 4);
  cfg.q    = {0.2, 0.3, 0.5};
  auto const prog = oracle::build_program(cfg, 1);
  Policy     pol(prog.tree);
  std::vector<double> flat(pol.size());
  for (std::size_t k = 0; k < flat.size(); ++k)
  {
    flat[k] = 0.3 + 0.01 * static_cast<double>(k % 17);
  }
  pol.assign(flat);
  auto dot = [&](std::vector<double> const &c) {
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k)
    {
      s += c[k] * flat[k];
    }
    return s;
  };
  EXPECT_NEAR(dot(prog.objective), agent_value(pol, cfg, 0), 1e-12);
  // Rows are stored as constraints g <= 0, i.e. the negated slack.
  for (auto const &row : prog.ics)
  {
    EXPECT_NEAR(-dot(row.coeff), ic_slack(pol, cfg, row.date, row.parent, row.truth, row.report), 1e-12);
  }
}

TEST(Oracle, MatchesReducedSolver)
{
  for (std::size_t N : {2u, 3u})
  {
    auto cfg = uniform_grid_config(N);
    if (N == 3)
    {
      cfg.q = {0.2, 0.3, 0.5};
    }
    for (int k = 0; k < static_cast<int>(N); ++k)
    {
      auto const red  = general::solve_equilibrium_T3(cfg, k);
      auto const full = oracle::solve_full(oracle::build_program(cfg, k));
      double const obj = general::reduced_objective(red, cfg);
      EXPECT_NEAR(full.objective, obj, 1e-6 * std::abs(obj));
      EXPECT_LE(sup_distance(full.policy.flatten(), general::to_policy(red, cfg).flatten()), 1e-5);
      EXPECT_NEAR(full.lambda, red.lambda, 1e-5 * red.lambda);
      EXPECT_GE(full.budget_slack, 0.0);
      EXPECT_LT(full.duality_gap, 1e-9);
    }
  }
}

TEST(Oracle, MatchesImpatienceLowPath)
{
  for (int T : {3, 4})
  {
    for (double q2 : {0.25, 0.75})
    {
      auto const cfg  = impatience_config(T, q2, 1.1);
      auto const eq   = impatience::solve_low_path(cfg, impatience::PathKind::Equilibrium);
      auto const full = oracle::solve_full(oracle::build_program(cfg, 0));
      double const obj = impatience::weighted_value(eq.weights, eq.path);
      EXPECT_NEAR(full.objective, obj, 1e-6 * obj);
      for (int t = 1; t <= T; ++t)
      {
        EXPECT_NEAR(full.policy.at(t, std::size_t{0}), eq.path[static_cast<std::size_t>(t - 1)], 1e-5);
      }
    }
  }
}

TEST(Oracle, StartingPointDoesNotMatter)
{
  auto cfg = uniform_grid_config(2, 4);
  cfg.q    = {0.3, 0.7};
  auto const prog = oracle::build_program(cfg, 1);
  auto const a    = oracle::solve_full(prog, 0.5);
  auto const b    = oracle::solve_full(prog, 0.2);
  EXPECT_LE(sup_distance(a.policy.flatten(), b.policy.flatten()), 1e-6);
  EXPECT_NEAR(a.objective, b.objective, 1e-9);
}

TEST(Oracle, Preconditions)
{
  EXPECT_THROW(oracle::solve_full(oracle::build_program(uniform_grid_config(5), 0)), SolverError);
  EXPECT_THROW(oracle::solve_full(oracle::build_program(uniform_grid_config(2, 6), 0)), SolverError);
  EXPECT_THROW(oracle::build_program(uniform_grid_config(2), 2), SolverError);
  EXPECT_THROW(oracle::solve_full(oracle::build_program(uniform_grid_config(2), 0), 1.0), SolverError);
}

TEST(Deviation, ConstantPolicyHasNoGain)
{
  auto const cfg = uniform_grid_config(3, 4);
  Policy const flat(HistoryTree(4, 3), 0.8);
  for (int k = 0; k < 3; ++k)
  {
    auto const dev = oracle::best_deviation(flat, cfg, k);
    EXPECT_EQ(dev.gap, 0.0);
    EXPECT_EQ(dev.best_value, dev.truthful_value);
  }
}

TEST(Deviation, RisingDateTwoUtilityIsExploited)
{
  auto const cfg = uniform_grid_config(3);
  Policy     pol(HistoryTree(3, 3, 2), 1.0);
  for (int n = 0; n < 3; ++n)
  {
    pol.at(2, TypeHistory{2, n}) = 1.0 + 0.1 * n;
  }
  auto const dev = oracle::best_deviation(pol, cfg, 2);
  EXPECT_GT(dev.gap, 0.0);
  EXPECT_EQ(dev.gap_report, 2);
  EXPECT_LT(dev.gap_type, 2);
  EXPECT_GT(dev.expected_gain, 0.0);
  EXPECT_GE(dev.best_value, dev.truthful_value - 1e-12);
}

// Inserting a violation of size s into a certified equilibrium raises the
// conditional gain by at least s.
TEST(Deviation, InjectedViolationIsDetected)
{
  auto const cfg = uniform_grid_config(3);
  auto const pol = general::to_policy(general::solve_equilibrium_T3(cfg, 2), cfg);
  ASSERT_LE(oracle::best_deviation(pol, cfg, 2).gap, 1e-8);
  for (double s : {1e-6, 1e-3, 0.1})
  {
    Policy bent = pol;
    // Raise the date-2 payout behind report n=1; type 0 was indifferent to it.
    bent.at(2, TypeHistory{2, 1}) += s;
    auto const dev = oracle::best_deviation(bent, cfg, 2);
    EXPECT_GE(dev.gap, s - 1e-10) << "s=" << s;
    EXPECT_GE(dev.gap, s / 2);
  }
}

TEST(DeviationProperty, BestValueNeverBelowTruthful)
{
  auto const cfg = uniform_grid_config(3, 4);
  Policy     pol(HistoryTree(4, 3));
  for (int seed = 1; seed <= 50; ++seed)
  {
    std::vector<double> flat(pol.size());
    unsigned            x = static_cast<unsigned>(seed) * 2654435761u;
    for (double &v : flat)
    {
      x = x * 1664525u + 1013904223u;
      v = static_cast<double>(x >> 8) / static_cast<double>(1u << 24);
    }
    pol.assign(flat);
    for (int k = 0; k < 3; ++k)
    {
      auto const dev = oracle::best_deviation(pol, cfg, k);
      EXPECT_GE(dev.best_value, dev.truthful_value - 1e-12);
      EXPECT_GE(dev.gap, 0.0);
      EXPECT_NEAR(dev.truthful_value, agent_value(pol, cfg, static_cast<std::size_t>(k)), 1e-12);
    }
  }
}

}  // namespace
