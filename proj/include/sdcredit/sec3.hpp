#pragma once
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

#include "sdcredit/bisection.hpp"
#include "sdcredit/model.hpp"
#include "sdcredit/utility.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

/// Degenerate-impatience model: two types, firms certain the agent is the
/// impatient type, agent assigns weight q2 to the patient type. Everything
/// reduces to a single along-the-low-path utility sequence.
namespace sdcredit::impatience {

enum class PathKind
{
  Equilibrium,  ///< agent-belief objective with the last-date tilt
  Efficient,    ///< true (impatient) discounting
  Benchmark     ///< constant agent-mean discounting at every date
};

inline std::string to_string(PathKind k)
{
  switch (k)
  {
  case PathKind::Equilibrium:
    return "equilibrium";
  case PathKind::Efficient:
    return "efficient";
  case PathKind::Benchmark:
    return "benchmark";
  }
  return "unknown";
}

struct PathSolution
{
  PathKind            kind = PathKind::Equilibrium;
  std::vector<double> weights;  ///< objective weight per date
  std::vector<double> path;     ///< v_t on the all-impatient history, t = 1..T
  std::vector<bool>   corner;   ///< true where the floor binds
  double              lambda          = 0.0;
  double              budget_residual = 0.0;  ///< money units, cost - income
};

/// Agent-belief mean discount factor q1*d1 + q2*d2.
inline double mean_discount(ModelConfig const &cfg)
{
  return cfg.q[0] * cfg.deltas[0] + cfg.q[1] * cfg.deltas[1];
}

inline void require_two_types(ModelConfig const &cfg)
{
  if (cfg.N() != 2 || cfg.T < 3 || cfg.q.size() != 2 || cfg.p.size() != 2)
  {
    throw SolverError(SolverErrorCode::Precondition, "two-type instance with T >= 3 required");
  }
}

inline std::vector<double> path_weights(ModelConfig const &cfg, PathKind kind)
{
  require_two_types(cfg);
  double const qbar = mean_discount(cfg);
  double const low  = cfg.deltas[0];
  // Running products, so equal discount factors give bit-identical weights.
  std::vector<double> w(static_cast<std::size_t>(cfg.T));
  double              wt = 1.0;
  for (int t = 1; t <= cfg.T; ++t)
  {
    w[static_cast<std::size_t>(t - 1)] = wt;
    switch (kind)
    {
    case PathKind::Equilibrium:
      wt *= t + 1 < cfg.T ? qbar : low;
      break;
    case PathKind::Efficient:
      wt *= low;
      break;
    case PathKind::Benchmark:
      wt *= qbar;
      break;
    }
  }
  return w;
}

namespace detail {

/// v_t = rho(weight_t R^{t-1} / lambda) with corner clipping.
inline void fill_path(UtilitySpec const &u, double R, std::span<double const> weights, double lambda,
                      std::span<double> path, std::vector<bool> *corner)
{
  double growth = 1.0;
  for (std::size_t k = 0; k < weights.size(); ++k)
  {
    double const x = weights[k] * growth / lambda;
    path[k]        = eval_rho(u, x);
    if (corner)
    {
      (*corner)[k] = u.bounded() && x <= u.phi_prime_at_floor();
    }
    growth *= R;
  }
}

inline double path_cost(UtilitySpec const &u, double R, std::span<double const> path)
{
  double cost = 0.0;
  double disc = 1.0;
  for (double v : path)
  {
    cost += eval_phi(u, v) * disc;
    disc /= R;
  }
  return cost;
}

}  // namespace detail

/// Maximizes sum_t weight_t v_t subject to the binding budget.
inline PathSolution solve_low_path(ModelConfig const &cfg, PathKind kind)
{
  PathSolution sol;
  sol.kind    = kind;
  sol.weights = path_weights(cfg, kind);
  sol.path.assign(sol.weights.size(), 0.0);
  sol.corner.assign(sol.weights.size(), false);

  double const income = cfg.total_income();
  std::vector<double> scratch(sol.weights.size());
  auto cost = [&](double lambda) {
    detail::fill_path(cfg.utility, cfg.R, sol.weights, lambda, scratch, nullptr);
    return detail::path_cost(cfg.utility, cfg.R, scratch);
  };
  auto const search = find_budget_multiplier(cost, income);
  sol.lambda        = search.lambda;
  detail::fill_path(cfg.utility, cfg.R, sol.weights, sol.lambda, sol.path, &sol.corner);
  sol.budget_residual = detail::path_cost(cfg.utility, cfg.R, sol.path) - income;
  return sol;
}

inline double weighted_value(std::span<double const> weights, std::span<double const> path)
{
  double s = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k)
  {
    s += weights[k] * path[k];
  }
  return s;
}

//------------------------------------------------------------------------------
// Full mechanism
//------------------------------------------------------------------------------

struct Mechanism
{
  Policy              policy;
  std::vector<double> off_path_continuation;  ///< constant utility after (L^{t-1}, patient), t = 2..T-1
};

/// Extends the equilibrium path to the whole tree rooted at the impatient
/// type: reporting patient at date t pays u(0) now and a constant utility at
/// every later node, set so the impatient type is exactly indifferent.
inline Mechanism build_full_mechanism(ModelConfig const &cfg, PathSolution const &eq)
{
  require_two_types(cfg);
  if (eq.kind != PathKind::Equilibrium)
  {
    throw SolverError(SolverErrorCode::Precondition, "full mechanism needs the equilibrium path");
  }
  if (!cfg.utility.bounded())
  {
    throw SolverError(SolverErrorCode::Precondition, "full mechanism needs a finite utility floor");
  }
  double const floor = cfg.utility.floor();
  int const    T     = cfg.T;
  double const qbar  = mean_discount(cfg);
  double const low   = cfg.deltas[0];

  Mechanism   mech{Policy(HistoryTree(T, 2, 0), floor), std::vector<double>(static_cast<std::size_t>(T), floor)};
  Policy     &pol  = mech.policy;
  auto const &tree = pol.tree();

  // All-impatient node index is 0 at every length.
  for (int t = 1; t <= T; ++t)
  {
    pol.at(t, std::size_t{0}) = eq.path[static_cast<std::size_t>(t - 1)];
  }

  for (int t = T - 1; t >= 2; --t)
  {
    // Discounted weight of a constant utility over dates t+1..T seen from date t.
    double horizon_weight = 0.0;
    for (int tau = t + 1; tau <= T; ++tau)
    {
      horizon_weight += std::pow(qbar, tau - (t + 1));
    }
    double const low_payoff = pol.at(t, std::size_t{0}) + low * agent_continuation(pol, cfg, t, 0);
    double const vbar       = (low_payoff - floor) / (low * horizon_weight);
    if (vbar < floor)
    {
      throw SolverError(SolverErrorCode::ConstructionInfeasible,
                        "off-path continuation below u(0) at date " + std::to_string(t));
    }
    mech.off_path_continuation[static_cast<std::size_t>(t - 1)] = vbar;

    std::size_t const branch = tree.child(0, 1);  // (L^{t-1}, patient)
    pol.at(t, branch)        = floor;
    // Every descendant of the branch, at every later date, gets vbar.
    std::size_t first = branch;
    std::size_t width = 1;
    for (int tau = t + 1; tau <= T; ++tau)
    {
      if (tau <= T - 1)
      {
        first *= 2;
        width *= 2;
      }
      for (std::size_t k = 0; k < width; ++k)
      {
        pol.at(tau, first + k) = vbar;
      }
    }
  }
  return mech;
}

struct MechanismIcReport
{
  std::vector<double> low_residual;   ///< impatient type: truthful - deviation, per date 2..T-1
  std::vector<double> high_residual;  ///< patient type: truthful - deviation, per date 2..T-1
};

inline MechanismIcReport mechanism_ic(ModelConfig const &cfg, Policy const &pol)
{
  MechanismIcReport rep;
  for (int t = 2; t <= cfg.T - 1; ++t)
  {
    rep.low_residual.push_back(ic_slack(pol, cfg, t, 0, 0, 1));
    rep.high_residual.push_back(ic_slack(pol, cfg, t, 0, 1, 0));
  }
  return rep;
}

//------------------------------------------------------------------------------
// Welfare and crossing
//------------------------------------------------------------------------------

struct WelfareReport
{
  double             W_A = 0.0;  ///< benchmark optimum at benchmark discounting
  double             W_E = 0.0;  ///< equilibrium path at benchmark discounting
  double             V_B = 0.0;  ///< efficient surplus
  double             V_E = 0.0;  ///< equilibrium path at true discounting
  std::optional<int> t_star;     ///< crossing date, absent when the paths coincide
  bool               crossing_pattern_holds = true;
  std::optional<int> crossing_violation_date;
  PathSolution       equilibrium;
  PathSolution       efficient;
  PathSolution       benchmark;
};

inline constexpr double kPathTieTolerance = 1e-12;

inline WelfareReport welfare_report(ModelConfig const &cfg)
{
  WelfareReport rep;
  rep.equilibrium = solve_low_path(cfg, PathKind::Equilibrium);
  rep.efficient   = solve_low_path(cfg, PathKind::Efficient);
  rep.benchmark   = solve_low_path(cfg, PathKind::Benchmark);

  auto const &eq = rep.equilibrium.path;
  auto const &ef = rep.efficient.path;
  rep.W_A        = weighted_value(rep.benchmark.weights, rep.benchmark.path);
  rep.W_E        = weighted_value(rep.benchmark.weights, eq);
  rep.V_B        = weighted_value(rep.efficient.weights, ef);
  rep.V_E        = weighted_value(rep.efficient.weights, eq);

  int const T         = cfg.T;
  bool      identical = true;
  for (int t = 1; t <= T; ++t)
  {
    double const scale = std::max(1.0, std::abs(ef[static_cast<std::size_t>(t - 1)]));
    if (std::abs(eq[static_cast<std::size_t>(t - 1)] - ef[static_cast<std::size_t>(t - 1)]) >
        kPathTieTolerance * scale)
    {
      identical = false;
    }
  }
  if (identical)
  {
    return rep;
  }

  int first = T;
  for (int t = 1; t <= T; ++t)
  {
    if (eq[static_cast<std::size_t>(t - 1)] >= ef[static_cast<std::size_t>(t - 1)])
    {
      first = t;
      break;
    }
  }
  int const star = std::min(first, T - 1);
  rep.t_star     = star;
  for (int t = 1; t <= T; ++t)
  {
    double const e = eq[static_cast<std::size_t>(t - 1)];
    double const b = ef[static_cast<std::size_t>(t - 1)];
    bool const   ok = t < star ? e < b : (t > star ? e > b : true);
    if (!ok)
    {
      rep.crossing_pattern_holds  = false;
      rep.crossing_violation_date = t;
      break;
    }
  }
  if (star < 2)
  {
    rep.crossing_pattern_holds  = false;
    rep.crossing_violation_date = 1;
  }
  return rep;
}

//------------------------------------------------------------------------------
// Horizon sweep
//------------------------------------------------------------------------------

enum class SideCondition
{
  Holds,
  Fails,
  NotCheckable
};

struct SweepEntry
{
  int           T = 0;
  WelfareReport report;
  double        benchmark_gap  = 0.0;  ///< W_A - W_E
  double        efficiency_gap = 0.0;  ///< V_B - V_E
  double        running_min_efficiency_gap = 0.0;
};

struct SweepReport
{
  std::vector<SweepEntry>  entries;
  SideCondition            side_condition = SideCondition::NotCheckable;
  std::vector<std::string> warnings;
};

/// Solves the template for each horizon in [t_min, t_max]. Income must be
/// per period so the total grows with the horizon.
inline SweepReport sweep_horizon(ModelConfig const &tmpl, int t_min, int t_max)
{
  if (tmpl.income.kind != IncomeKind::PerPeriod)
  {
    throw SolverError(SolverErrorCode::Precondition, "horizon sweep needs per-period income");
  }
  if (t_min < 3 || t_max < t_min)
  {
    throw SolverError(SolverErrorCode::Precondition, "horizon range must satisfy 3 <= tMin <= tMax");
  }
  SweepReport out;
  double const qbar = mean_discount(tmpl);
  if (tmpl.deltas[0] * tmpl.R > 1.0)
  {
    out.warnings.push_back("impatient discount times R exceeds 1");
  }
  if (tmpl.R > 1.0)
  {
    double const income_limit = tmpl.income.value * tmpl.R / (tmpl.R - 1.0);
    double const lhs = qbar * tmpl.R * eval_phi_prime(tmpl.utility, eval_u_finite(tmpl.utility, income_limit));
    double const rhs = tmpl.utility.bounded() ? tmpl.utility.phi_prime_at_floor() : 0.0;
    out.side_condition = lhs > rhs ? SideCondition::Holds : SideCondition::Fails;
    if (out.side_condition == SideCondition::Fails)
    {
      out.warnings.push_back("interiority side condition fails");
    }
  }
  else
  {
    out.warnings.push_back("side condition not checkable at R=1 (limit income infinite)");
  }

  double running = std::numeric_limits<double>::infinity();
  for (int T = t_min; T <= t_max; ++T)
  {
    ModelConfig cfg = tmpl;
    cfg.T           = T;
    SweepEntry e;
    e.T              = T;
    e.report         = welfare_report(cfg);
    e.benchmark_gap  = e.report.W_A - e.report.W_E;
    e.efficiency_gap = e.report.V_B - e.report.V_E;
    running          = std::min(running, e.efficiency_gap);
    e.running_min_efficiency_gap = running;
    out.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace sdcredit::impatience
