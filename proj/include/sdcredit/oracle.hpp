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

#include "sdcredit/model.hpp"
#include "sdcredit/utility.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

/// Brute-force reference solver and deviation checker. Deliberately shares
/// nothing with the reduced solvers beyond the policy container and the
/// generic payoff functionals, so it can certify them.
namespace sdcredit::oracle {

/// One linear incentive constraint, stored as deviation - truthful <= 0.
struct IcRow
{
  int                 date   = 0;
  std::size_t         parent = 0;
  int                 truth  = 0;
  int                 report = 0;
  std::vector<double> coeff;
};

struct FullProgram
{
  ModelConfig         cfg;
  HistoryTree         tree;
  std::vector<double> objective;      ///< agent payoff coefficients
  std::vector<double> budget_weight;  ///< firm probability / R^{t-1}
  std::vector<IcRow>  ics;
  double              income = 0.0;
  std::vector<double> lower;
  std::vector<double> upper;  ///< +inf when absent

  std::size_t size() const noexcept
  {
    return objective.size();
  }
};

namespace detail {

inline std::vector<double> linear_functional(HistoryTree const &tree, auto &&fn)
{
  Policy              probe(tree);
  std::size_t const   n = probe.size();
  std::vector<double> unit(n, 0.0);
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
  {
    unit[j] = 1.0;
    probe.assign(unit);
    out[j]  = fn(probe);
    unit[j] = 0.0;
  }
  return out;
}

}  // namespace detail

/// Problem for the agent with initial type `root`: maximize the agent-belief
/// payoff subject to firm break-even and every pairwise incentive constraint
/// at dates 2..T-1.
inline FullProgram build_program(ModelConfig const &cfg, int root)
{
  if (root < 0 || root >= static_cast<int>(cfg.N()))
  {
    throw SolverError(SolverErrorCode::Precondition, "initial type index out of range");
  }
  FullProgram prog{cfg, HistoryTree(cfg.T, static_cast<int>(cfg.N()), root), {}, {}, {}, cfg.total_income(), {}, {}};
  auto const &tree = prog.tree;

  prog.objective = detail::linear_functional(tree, [&](Policy const &pol) { return agent_value(pol, cfg, 0); });

  double disc = 1.0;
  for (int date = 1; date <= cfg.T; ++date)
  {
    int const len = tree.history_length(date);
    for (std::size_t i = 0; i < tree.count(len); ++i)
    {
      prog.budget_weight.push_back(firm_probability(tree, cfg, len, i) * disc);
    }
    disc /= cfg.R;
  }

  int const N = static_cast<int>(cfg.N());
  for (int t = 2; t <= cfg.T - 1; ++t)
  {
    for (std::size_t parent = 0; parent < tree.count(t - 1); ++parent)
    {
      for (int truth = 0; truth < N; ++truth)
      {
        for (int report = 0; report < N; ++report)
        {
          if (report == truth)
          {
            continue;
          }
          IcRow row{t, parent, truth, report, {}};
          row.coeff = detail::linear_functional(
              tree, [&](Policy const &pol) { return -ic_slack(pol, cfg, t, parent, truth, report); });
          prog.ics.push_back(std::move(row));
        }
      }
    }
  }

  std::size_t const n = prog.objective.size();
  if (cfg.utility.bounded())
  {
    prog.lower.assign(n, cfg.utility.floor());
    prog.upper.assign(n, std::numeric_limits<double>::infinity());
  }
  else
  {
    prog.lower.assign(n, std::log(1e-9 * prog.income));
    prog.upper.assign(n, std::log(1e3 * prog.income));
  }
  return prog;
}

struct FullSolution
{
  Policy policy;
  double objective    = 0.0;
  double lambda       = 0.0;  ///< budget multiplier estimate
  double budget_slack = 0.0;  ///< income - cost
  double duality_gap  = 0.0;
  int    newton_steps = 0;
};

inline constexpr int    kOracleIterationCap = 100000;
inline constexpr double kOracleGap          = 1e-10;

namespace detail {

/// Log-barrier evaluation of the constraint set g_i(x) < 0 (optionally with
/// an extra slack variable s so that g_i(x) - s < 0, for the feasibility
/// phase).
class Barrier
{
public:
  explicit Barrier(FullProgram const &prog)
    : prog_(prog)
  {}

  std::size_t constraint_count() const
  {
    std::size_t m = 1 + prog_.ics.size();
    for (std::size_t j = 0; j < prog_.size(); ++j)
    {
      m += 1;
      if (std::isfinite(prog_.upper[j]))
      {
        m += 1;
      }
    }
    return m;
  }

  /// Evaluates every constraint; returns false if any input is outside the
  /// domain of phi.
  bool values(Eigen::VectorXd const &x, std::vector<double> &g) const
  {
    g.clear();
    auto const &u = prog_.cfg.utility;
    double      b = -prog_.income;
    for (std::size_t j = 0; j < prog_.size(); ++j)
    {
      double const xj = x[static_cast<Eigen::Index>(j)];
      if (!std::isfinite(xj) || (u.bounded() && xj < u.floor()))
      {
        return false;
      }
      if (prog_.budget_weight[j] > 0.0)
      {
        b += prog_.budget_weight[j] * eval_phi(u, xj);
      }
    }
    g.push_back(b);
    for (auto const &row : prog_.ics)
    {
      double s = 0.0;
      for (std::size_t j = 0; j < prog_.size(); ++j)
      {
        s += row.coeff[j] * x[static_cast<Eigen::Index>(j)];
      }
      g.push_back(s);
    }
    for (std::size_t j = 0; j < prog_.size(); ++j)
    {
      g.push_back(prog_.lower[j] - x[static_cast<Eigen::Index>(j)]);
      if (std::isfinite(prog_.upper[j]))
      {
        g.push_back(x[static_cast<Eigen::Index>(j)] - prog_.upper[j]);
      }
    }
    return true;
  }

  /// Number of leading entries of values() (budget and incentive rows) that
  /// the feasibility phase relaxes by the slack variable.
  std::size_t relaxed_count() const
  {
    return 1 + prog_.ics.size();
  }

  /// Gradient and Hessian of the barrier in the joint variable (x, s) when
  /// with_slack (relaxed rows enter as -log(s - g_i)), else in x alone.
  void derivatives(Eigen::VectorXd const &x, std::vector<double> const &g, double s, bool with_slack,
                   Eigen::VectorXd &grad, Eigen::MatrixXd &hess) const
  {
    auto const       &u  = prog_.cfg.utility;
    Eigen::Index const n  = static_cast<Eigen::Index>(prog_.size());
    Eigen::Index const nz = with_slack ? n + 1 : n;
    grad.setZero(nz);
    hess.setZero(nz, nz);

    Eigen::VectorXd dg(nz);
    dg.setZero();
    auto accumulate = [&](double gi, Eigen::VectorXd const &grad_gi) {
      double const slack = (with_slack ? s : 0.0) - gi;
      grad += grad_gi / slack;
      hess.noalias() += grad_gi * grad_gi.transpose() / (slack * slack);
    };

    std::size_t k = 0;
    // budget
    dg.setZero();
    Eigen::VectorXd curv = Eigen::VectorXd::Zero(nz);
    for (Eigen::Index j = 0; j < n; ++j)
    {
      double const a = prog_.budget_weight[static_cast<std::size_t>(j)];
      if (a > 0.0)
      {
        dg[j]   = a * eval_phi_prime(u, x[j]);
        curv[j] = a * eval_phi_second(u, x[j]);
      }
    }
    if (with_slack)
    {
      dg[n] = -1.0;
    }
    {
      double const slack = (with_slack ? s : 0.0) - g[k];
      accumulate(g[k], dg);
      hess.diagonal() += curv / slack;
    }
    ++k;
    for (auto const &row : prog_.ics)
    {
      for (Eigen::Index j = 0; j < n; ++j)
      {
        dg[j] = row.coeff[static_cast<std::size_t>(j)];
      }
      accumulate(g[k++], dg);
    }
    // Bounds are never relaxed: they keep phi inside its domain.
    auto accumulate_bound = [&](double gi, Eigen::Index j, double sign) {
      double const slack = -gi;
      grad[j] += sign / slack;
      hess(j, j) += 1.0 / (slack * slack);
    };
    for (Eigen::Index j = 0; j < n; ++j)
    {
      accumulate_bound(g[k++], j, -1.0);
      if (std::isfinite(prog_.upper[static_cast<std::size_t>(j)]))
      {
        accumulate_bound(g[k++], j, 1.0);
      }
    }
  }

private:
  FullProgram const &prog_;
};

inline double barrier_value(std::vector<double> const &g, double s, std::size_t relaxed)
{
  double f = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
  {
    double const slack = (i < relaxed ? s : 0.0) - g[i];
    if (!(slack > 0.0))
    {
      return std::numeric_limits<double>::infinity();
    }
    f -= std::log(slack);
  }
  return f;
}

}  // namespace detail

/// Maximizes the program's linear objective by a log-barrier interior point
/// method. start_fraction sets the share of income spent by the constant
/// starting policy of the feasibility phase.
inline FullSolution solve_full(FullProgram const &prog, double start_fraction = 0.5)
{
  if (prog.cfg.T > 5 || prog.cfg.N() > 4)
  {
    throw SolverError(SolverErrorCode::Precondition, "oracle is limited to small trees (T <= 5, N <= 4)");
  }
  if (!(start_fraction > 0.0 && start_fraction < 1.0))
  {
    throw SolverError(SolverErrorCode::Precondition, "start fraction must lie in (0,1)");
  }
  auto const        &u = prog.cfg.utility;
  Eigen::Index const n = static_cast<Eigen::Index>(prog.size());
  detail::Barrier    barrier(prog);
  double const       m = static_cast<double>(barrier.constraint_count());

  double weight_sum = 0.0;
  for (double a : prog.budget_weight)
  {
    weight_sum += a;
  }
  double const    start_cost = start_fraction * prog.income / weight_sum;
  double const    start_v    = eval_u_finite(u, start_cost);
  Eigen::VectorXd x          = Eigen::VectorXd::Constant(n, start_v);

  std::vector<double> g;
  std::vector<double> g_try;
  int                 steps = 0;

  auto newton_center = [&](auto &&objective_grad, auto &&objective_value, double &s, bool with_slack,
                           auto &&stop_early) {
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    for (int inner = 0; inner < 500; ++inner)
    {
      if (++steps > kOracleIterationCap)
      {
        throw SolverError(SolverErrorCode::IterationCap, "oracle iteration cap exceeded");
      }
      barrier.values(x, g);
      barrier.derivatives(x, g, s, with_slack, grad, hess);
      grad += objective_grad();
      if (with_slack)
      {
        hess(n, n) += 1.0 / ((s + 1.0) * (s + 1.0));
      }
      Eigen::VectorXd const step      = -hess.ldlt().solve(grad);
      double const          decrement = -grad.dot(step);
      if (!(decrement >= 0.0) || decrement < 1e-20 || stop_early())
      {
        return;
      }
      double const f0    = objective_value(x, s) + detail::barrier_value(g, with_slack ? s : 0.0, barrier.relaxed_count());
      double       alpha   = 1.0;
      bool         moved   = false;
      bool         stalled = false;
      for (int ls = 0; ls < 80; ++ls, alpha *= 0.5)
      {
        Eigen::VectorXd const x_try = x + alpha * step.head(n);
        double const          s_try = with_slack ? s + alpha * step[n] : s;
        if (!barrier.values(x_try, g_try))
        {
          continue;
        }
        double const f1 = objective_value(x_try, s_try) + detail::barrier_value(g_try, with_slack ? s_try : 0.0, barrier.relaxed_count());
        if (std::isfinite(f1) && f1 <= f0 - 0.25 * alpha * decrement + 1e-14 * std::abs(f0))
        {
          x     = x_try;
          s     = s_try;
          moved = true;
          // Accepted only through the round-off allowance: centred.
          stalled = !(f1 < f0);
          break;
        }
      }
      if (!moved || stalled || decrement < 1e-14)
      {
        return;
      }
    }
  };

  // Feasibility phase: minimize s subject to g_i(x) < s and s > -1.
  barrier.values(x, g);
  double s = *std::max_element(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(barrier.relaxed_count())) + 1.0;
  auto   strictly_feasible = [&]() {
    barrier.values(x, g);
    return *std::max_element(g.begin(), g.end()) < 0.0;
  };
  if (!strictly_feasible())
  {
    // Shifted barrier on (x, s), with the floor s > -1 entering as one more log term.
    for (double t = 1.0; t < 1e12; t *= 10.0)
    {
      auto obj_grad = [&]() {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n + 1);
        v[n]              = t - 1.0 / (s + 1.0);
        return v;
      };
      auto obj_value = [&](Eigen::VectorXd const &, double s_val) {
        return s_val > -1.0 ? t * s_val - std::log(s_val + 1.0) : std::numeric_limits<double>::infinity();
      };
      newton_center(obj_grad, obj_value, s, true, strictly_feasible);
      if (strictly_feasible())
      {
        break;
      }
    }
    if (!strictly_feasible())
    {
      throw SolverError(SolverErrorCode::IterationCap, "oracle found no strictly feasible policy");
    }
  }

  // Optimality phase.
  Eigen::VectorXd c(n);
  for (Eigen::Index j = 0; j < n; ++j)
  {
    c[j] = prog.objective[static_cast<std::size_t>(j)];
  }
  double t = 1.0;
  for (;;)
  {
    double none = 0.0;
    auto   obj_grad  = [&]() { return Eigen::VectorXd(-t * c); };
    auto   obj_value = [&](Eigen::VectorXd const &xv, double) { return -t * c.dot(xv); };
    newton_center(obj_grad, obj_value, none, false, [] { return false; });
    if (m / t < kOracleGap)
    {
      break;
    }
    t *= 10.0;
  }

  barrier.values(x, g);
  // Date-1 utility enters no incentive constraint, so its stationarity
  // condition pins the budget multiplier more sharply than the barrier dual.
  double lambda = 1.0 / (t * (-g[0]));
  bool const first_interior = !u.bounded() || x[0] > u.floor() + 1e-6;
  if (first_interior && prog.budget_weight[0] > 0.0)
  {
    lambda = prog.objective[0] / (prog.budget_weight[0] * eval_phi_prime(u, x[0]));
  }
  FullSolution sol{Policy(prog.tree), c.dot(x), lambda, -g[0], m / t, steps};
  std::vector<double> flat(x.data(), x.data() + n);
  sol.policy.assign(flat);
  return sol;
}

//------------------------------------------------------------------------------
// Deviation checker
//------------------------------------------------------------------------------

struct DeviationReport
{
  double truthful_value = 0.0;  ///< date-1 agent payoff under truth-telling
  double best_value     = 0.0;  ///< date-1 payoff under the optimal reporting strategy
  double expected_gain  = 0.0;  ///< best_value - truthful_value
  double gap            = 0.0;  ///< largest gain conditional on any reachable node and type
  int    gap_date       = 0;
  TypeHistory gap_history;      ///< reported history before the gap node
  int    gap_type       = 0;
  int    gap_report     = 0;  ///< profitable report at the gap node
  /// best_report[t-2][parent * N + truth]: optimal report at date t.
  std::vector<std::vector<int>> best_report;
};

inline constexpr double kTieTolerance = 1e-12;

/// Optimal reporting strategy by backward induction over reported histories.
/// Types are i.i.d., so only the reported history and the current true type
/// matter. delta1_index selects the initial node for unrooted trees.
inline DeviationReport best_deviation(Policy const &pol, ModelConfig const &cfg, int delta1_index)
{
  auto const &tree = pol.tree();
  int const   T    = pol.T();
  int const   N    = static_cast<int>(cfg.N());
  if (tree.root() && *tree.root() != delta1_index)
  {
    throw SolverError(SolverErrorCode::Precondition, "policy is rooted at a different initial type");
  }
  std::size_t const start = tree.root() ? 0 : static_cast<std::size_t>(delta1_index);
  // Unrooted trees hold every initial type; only the selected subtree counts.
  auto in_subtree = [&](int len, std::size_t idx) {
    if (tree.root())
    {
      return true;
    }
    return tree.history(len, idx).front() == delta1_index;
  };

  DeviationReport rep;
  rep.best_report.resize(static_cast<std::size_t>(std::max(0, T - 2)));

  // best[len-1][idx], truth[len-1][idx]: value from date len+1 onward at a
  // node of length len, discounting from date len+1.
  std::vector<std::vector<double>> best(static_cast<std::size_t>(T - 1));
  std::vector<std::vector<double>> truthful(static_cast<std::size_t>(T - 1));
  {
    auto const last = pol.date_values(T);
    best[static_cast<std::size_t>(T - 2)].assign(last.begin(), last.end());
    truthful[static_cast<std::size_t>(T - 2)].assign(last.begin(), last.end());
  }
  for (int t = T - 1; t >= 2; --t)
  {
    std::size_t const parents = tree.count(t - 1);
    auto const       &next_b  = best[static_cast<std::size_t>(t - 1)];
    auto const       &next_t  = truthful[static_cast<std::size_t>(t - 1)];
    auto             &cur_b   = best[static_cast<std::size_t>(t - 2)];
    auto             &cur_t   = truthful[static_cast<std::size_t>(t - 2)];
    auto             &choice  = rep.best_report[static_cast<std::size_t>(t - 2)];
    cur_b.assign(parents, 0.0);
    cur_t.assign(parents, 0.0);
    choice.assign(parents * static_cast<std::size_t>(N), 0);
    for (std::size_t j = 0; j < parents; ++j)
    {
      for (int n = 0; n < N; ++n)
      {
        double const      d     = cfg.deltas[static_cast<std::size_t>(n)];
        std::size_t const own   = tree.child(j, n);
        double const      honest_best = pol.at(t, own) + d * next_b[own];
        double            top   = honest_best;
        int               pick  = n;
        for (int r = 0; r < N; ++r)
        {
          std::size_t const c   = tree.child(j, r);
          double const      val = pol.at(t, c) + d * next_b[c];
          if (val > top + kTieTolerance)
          {
            top  = val;
            pick = r;
          }
        }
        choice[j * static_cast<std::size_t>(N) + static_cast<std::size_t>(n)] = pick;
        double const honest = pol.at(t, own) + d * next_t[own];
        double const gain   = top - honest;
        if (gain > rep.gap && in_subtree(t - 1, j))
        {
          rep.gap         = gain;
          rep.gap_date    = t;
          rep.gap_history = tree.history(t - 1, j);
          rep.gap_type    = n;
          rep.gap_report  = pick;
        }
        double const qn = cfg.q[static_cast<std::size_t>(n)];
        cur_b[j] += qn * top;
        cur_t[j] += qn * honest;
      }
    }
  }

  int const    first = tree.root() ? *tree.root() : delta1_index;
  double const d1    = cfg.deltas[static_cast<std::size_t>(first)];
  rep.truthful_value = pol.at(1, start) + d1 * truthful[0][start];
  rep.best_value     = pol.at(1, start) + d1 * best[0][start];
  rep.expected_gain  = rep.best_value - rep.truthful_value;
  return rep;
}

}  // namespace sdcredit::oracle
