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

#include "config_io.hpp"

#include "sdcredit/sdcredit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace sdcredit::cli {

struct CheckResult
{
  std::string name;
  bool        pass     = false;
  double      residual = 0.0;
  std::string detail;
};

class CheckList
{
public:
  /// Passes when |residual| <= tol.
  void near_zero(std::string name, double residual, double tol, std::string detail = {})
  {
    items_.push_back({std::move(name), std::abs(residual) <= tol, residual, std::move(detail)});
  }
  /// Passes when value >= -tol.
  void non_negative(std::string name, double value, double tol, std::string detail = {})
  {
    items_.push_back({std::move(name), value >= -tol, value, std::move(detail)});
  }
  void flag(std::string name, bool ok, std::string detail = {})
  {
    items_.push_back({std::move(name), ok, ok ? 0.0 : 1.0, std::move(detail)});
  }

  bool all_pass() const
  {
    return std::all_of(items_.begin(), items_.end(), [](CheckResult const &c) { return c.pass; });
  }

  Json to_json() const
  {
    Json arr = Json::array();
    for (auto const &c : items_)
    {
      Json j = {{"name", c.name}, {"pass", c.pass}, {"residual", c.residual}};
      if (!c.detail.empty())
      {
        j["detail"] = c.detail;
      }
      arr.push_back(std::move(j));
    }
    return Json{{"pass", all_pass()}, {"checks", arr}};
  }

  std::vector<CheckResult> const &items() const
  {
    return items_;
  }

private:
  std::vector<CheckResult> items_;
};

inline constexpr double kIcTolerance     = 1e-8;
inline constexpr double kEulerTolerance  = 1e-8;
inline constexpr double kObjectiveRelTol = 1e-6;
inline constexpr double kPolicySupTol    = 1e-5;

inline double sup_distance(std::span<double const> a, std::span<double const> b)
{
  double d = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
  {
    d = std::max(d, std::abs(a[i] - b[i]));
  }
  return a.size() == b.size() ? d : std::numeric_limits<double>::infinity();
}

inline std::string witness_text(oracle::DeviationReport const &dev)
{
  if (dev.gap <= kIcTolerance)
  {
    return {};
  }
  std::string h;
  for (int k : dev.gap_history)
  {
    h += (h.empty() ? "" : ",") + std::to_string(k + 1);
  }
  return "date " + std::to_string(dev.gap_date) + " after reports (" + h + "), true type " +
         std::to_string(dev.gap_type + 1) + " gains " + fmt_number(dev.gap) +
         " by reporting type " + std::to_string(dev.gap_report + 1);
}

inline void verify_section3(ModelConfig const &cfg, CheckList &out)
{
  using namespace impatience;
  double const income = cfg.total_income();
  auto const   rep    = welfare_report(cfg);
  for (auto const *sol : {&rep.equilibrium, &rep.efficient, &rep.benchmark})
  {
    out.near_zero("budget_binds_" + to_string(sol->kind), sol->budget_residual, 1e-9 * income);
    double worst = 0.0;
    double rate  = 1.0;
    for (std::size_t k = 0; k < sol->path.size(); ++k)
    {
      if (!sol->corner[k])
      {
        double const target = sol->weights[k] * rate;
        worst = std::max(worst, std::abs(eval_phi_prime(cfg.utility, sol->path[k]) * sol->lambda - target) / target);
      }
      rate *= cfg.R;
    }
    out.near_zero("kkt_consistency_" + to_string(sol->kind), worst, 1e-9);
  }
  out.non_negative("benchmark_dominates", rep.W_A - rep.W_E, 1e-12);
  out.non_negative("efficient_dominates", rep.V_B - rep.V_E, 1e-12);
  if (rep.t_star)
  {
    out.flag("crossing_pattern", rep.crossing_pattern_holds,
             "t*=" + std::to_string(*rep.t_star));
  }

  auto const mech = build_full_mechanism(cfg, rep.equilibrium);
  auto const ic   = mechanism_ic(cfg, mech.policy);
  double     low  = 0.0;
  double     high = std::numeric_limits<double>::infinity();
  for (double r : ic.low_residual)
  {
    low = std::max(low, std::abs(r));
  }
  for (double r : ic.high_residual)
  {
    high = std::min(high, r);
  }
  out.near_zero("mechanism_low_ic_equality", low, 1e-10);
  if (!ic.high_residual.empty())
  {
    out.non_negative("mechanism_high_ic", high, 1e-10);
  }
  double const identity = agent_value(mech.policy, cfg, 0) - weighted_value(rep.equilibrium.weights, rep.equilibrium.path);
  out.near_zero("agent_payoff_identity", identity, 1e-9);
  out.near_zero("mechanism_budget", firm_cost(mech.policy, cfg) - income, 1e-9 * income);

  auto const dev = oracle::best_deviation(mech.policy, cfg, 0);
  out.near_zero("full_ic_deviation_gap", dev.gap, kIcTolerance, witness_text(dev));

  if (cfg.T <= 4)
  {
    auto const   full = oracle::solve_full(oracle::build_program(cfg, 0));
    double const obj  = agent_value(mech.policy, cfg, 0);
    out.near_zero("oracle_objective", (full.objective - obj) / std::max(1.0, std::abs(obj)), kObjectiveRelTol);
    double sup = 0.0;
    for (int t = 1; t <= cfg.T; ++t)
    {
      sup = std::max(sup, std::abs(full.policy.at(t, std::size_t{0}) - mech.policy.at(t, std::size_t{0})));
      if (t >= 2 && t <= cfg.T - 1)
      {
        sup = std::max(sup, std::abs(full.policy.at(t, std::size_t{1}) - mech.policy.at(t, std::size_t{1})));
      }
    }
    out.near_zero("oracle_policy_low_path", sup, kPolicySupTol);
  }
}

inline void verify_efficient(ModelConfig const &cfg, CheckList &out)
{
  using namespace general;
  auto const eff = solve_efficient_policy(cfg);
  out.near_zero("efficient_budget", eff.budget_residual, 1e-9 * cfg.total_income());
  out.near_zero("efficient_inverse_euler", check_inverse_euler(eff.policy, cfg, PolicyKind::Efficient).max_abs,
                kEulerTolerance);
  // Strictly increasing in each past coordinate.
  auto const &tree = eff.policy.tree();
  bool        mono = true;
  for (int date = 2; date <= cfg.T; ++date)
  {
    int const len = tree.history_length(date);
    for (std::size_t i = 0; i < tree.count(len); ++i)
    {
      auto h = tree.history(len, i);
      for (int s = 0; s < date - 1; ++s)
      {
        if (h[static_cast<std::size_t>(s)] + 1 < tree.N())
        {
          auto up = h;
          up[static_cast<std::size_t>(s)] += 1;
          mono = mono && eff.policy.at(date, up) > eff.policy.at(date, h);
        }
      }
    }
  }
  out.flag("efficient_increasing_in_history", mono);
}

inline void verify_reduced(ModelConfig const &cfg, int k, CheckList &out)
{
  using namespace general;
  std::string const tag    = "_d1=" + std::to_string(k + 1);
  double const      income = cfg.total_income();
  auto const        sol    = solve_equilibrium_T3(cfg, k);
  auto const        pol    = to_policy(sol, cfg);
  std::size_t const N      = cfg.N();

  double bind = 0.0;
  double env  = 0.0;
  for (std::size_t n = 0; n + 1 < N; ++n)
  {
    bind = std::max(bind, std::abs(sol.U[n] - (sol.w[n + 1] + cfg.deltas[n] * sol.z[n + 1])));
  }
  double acc = sol.U1;
  for (std::size_t n = 1; n < N; ++n)
  {
    acc += (cfg.deltas[n] - cfg.deltas[n - 1]) * sol.z[n];
    env = std::max(env, std::abs(sol.U[n] - acc));
  }
  out.near_zero("binding_upward_ic" + tag, bind, 1e-9);
  out.near_zero("envelope_identity" + tag, env, 1e-9);
  out.near_zero("reduced_budget" + tag, sol.budget_residual, 1e-9 * income);
  out.near_zero("policy_budget" + tag, firm_cost(pol, cfg) - income, 1e-9 * income);

  auto const back = check_backloading(sol, cfg);
  out.near_zero("efficiency_at_bottom" + tag, back.gaps[0], 1e-8);
  double min_gap  = std::numeric_limits<double>::infinity();
  double min_rent = std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n < N; ++n)
  {
    min_gap  = std::min(min_gap, back.gaps[n]);
    min_rent = std::min(min_rent, back.rent_terms[n - 1]);
  }
  out.flag("backloaded_above_bottom" + tag, min_gap > 0.0, "min gap " + fmt_number(min_gap));
  out.non_negative("information_rent_sign" + tag, min_rent, 1e-12);

  out.near_zero("equilibrium_inverse_euler" + tag,
                check_inverse_euler(pol, cfg, PolicyKind::Equilibrium).max_abs, kEulerTolerance);

  auto const dev = oracle::best_deviation(pol, cfg, k);
  out.near_zero("full_ic_deviation_gap" + tag, dev.gap, kIcTolerance, witness_text(dev));

  double downward = std::numeric_limits<double>::infinity();
  for (int n = 1; n < static_cast<int>(N); ++n)
  {
    downward = std::min(downward, ic_slack(pol, cfg, 2, 0, n, n - 1));
  }
  out.non_negative("downward_local_ic" + tag, downward, 1e-9);

  std::array<double, 4> const etas{1e-2, -1e-2, 1e-3, -1e-3};
  double worst_excess = -std::numeric_limits<double>::infinity();
  double slope        = 0.0;
  for (int t = 1; t <= 2; ++t)
  {
    auto const shift = constant_shift_check(pol, cfg, sol.lambda, t, 0, etas);
    for (auto const &probe : shift.probes)
    {
      worst_excess = std::max(worst_excess, probe.change - (1e-6 * probe.eta * probe.eta + 1e-10));
    }
    slope = std::max(slope, std::abs(shift.slope));
  }
  out.flag("constant_shift_second_order" + tag, worst_excess <= 0.0, "max excess " + fmt_number(worst_excess));
  out.near_zero("constant_shift_slope" + tag, slope, 1e-7);

  if (N <= 4)
  {
    auto const   full = oracle::solve_full(oracle::build_program(cfg, k));
    double const obj  = reduced_objective(sol, cfg);
    out.near_zero("oracle_objective" + tag, (full.objective - obj) / std::max(1.0, std::abs(obj)), kObjectiveRelTol);
    out.near_zero("oracle_policy" + tag, sup_distance(full.policy.flatten(), pol.flatten()), kPolicySupTol);
  }
}

inline void verify_oracle_equilibrium(ModelConfig const &cfg, int k, CheckList &out)
{
  std::string const tag  = "_d1=" + std::to_string(k + 1);
  auto const        full = oracle::solve_full(oracle::build_program(cfg, k));
  out.near_zero("oracle_inverse_euler" + tag,
                general::check_inverse_euler(full.policy, cfg, general::PolicyKind::Equilibrium).max_abs,
                kEulerTolerance);
  auto const dev = oracle::best_deviation(full.policy, cfg, k);
  out.near_zero("oracle_deviation_gap" + tag, dev.gap, kIcTolerance, witness_text(dev));
}

inline void verify_section4(ModelConfig const &cfg, std::optional<int> delta1, CheckList &out)
{
  verify_efficient(cfg, out);
  int const first = delta1.value_or(0);
  int const last  = delta1.value_or(static_cast<int>(cfg.N()) - 1);
  for (int k = first; k <= last; ++k)
  {
    if (cfg.T == 3)
    {
      verify_reduced(cfg, k, out);
    }
    else if (cfg.T <= 5 && cfg.N() <= 3)
    {
      verify_oracle_equilibrium(cfg, k, out);
    }
  }
}

inline void verify_policy(Policy const &pol, ModelConfig const &cfg, std::optional<int> delta1, CheckList &out)
{
  int const k = pol.tree().root() ? *pol.tree().root() : delta1.value_or(0);
  auto const dev = oracle::best_deviation(pol, cfg, k);
  out.near_zero("supplied_policy_deviation_gap", dev.gap, kIcTolerance, witness_text(dev));
}

}  // namespace sdcredit::cli
