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
#include "sdcredit/oracle.hpp"
#include "sdcredit/utility.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

/// General model: N types, full-support firm beliefs, three or more dates.
namespace sdcredit::general {

//------------------------------------------------------------------------------
// Efficient policy
//------------------------------------------------------------------------------

struct EfficientSolution
{
  Policy policy;  ///< unrooted: every initial type, budget in expectation
  double lambda          = 0.0;
  double budget_residual = 0.0;
  bool   interior        = true;
};

namespace detail {

inline void fill_efficient(Policy &pol, ModelConfig const &cfg, double lambda, bool *interior)
{
  auto const &tree = pol.tree();
  double      rate = 1.0;  // R^{t-1}
  for (int date = 1; date <= cfg.T; ++date)
  {
    int const len  = tree.history_length(date);
    auto      vals = pol.date_values(date);
    for (std::size_t i = 0; i < vals.size(); ++i)
    {
      double discount = 1.0;
      if (date > 1)
      {
        auto const h = tree.history(len, i);
        for (int s = 0; s < date - 1; ++s)
        {
          discount *= cfg.deltas[static_cast<std::size_t>(h[static_cast<std::size_t>(s)])];
        }
      }
      double const x = rate * discount / lambda;
      vals[i]        = eval_rho(cfg.utility, x);
      if (interior && cfg.utility.bounded() && x <= cfg.utility.phi_prime_at_floor())
      {
        *interior = false;
      }
    }
    rate *= cfg.R;
  }
}

}  // namespace detail

/// First best under firm beliefs: phi'(v_t(H)) = R^{t-1} prod_{s<t} delta_s / lambda.
inline EfficientSolution solve_efficient_policy(ModelConfig const &cfg)
{
  HistoryTree const tree(cfg.T, static_cast<int>(cfg.N()));
  EfficientSolution sol{Policy(tree), 0.0, 0.0, true};
  Policy            scratch(tree);
  double const      income = cfg.total_income();
  auto cost = [&](double lambda) {
    detail::fill_efficient(scratch, cfg, lambda, nullptr);
    return firm_cost(scratch, cfg);
  };
  sol.lambda = find_budget_multiplier(cost, income).lambda;
  detail::fill_efficient(sol.policy, cfg, sol.lambda, &sol.interior);
  sol.budget_residual = firm_cost(sol.policy, cfg) - income;
  return sol;
}

//------------------------------------------------------------------------------
// Three-date equilibrium via binding upward incentive constraints
//------------------------------------------------------------------------------

struct ReducedSolution
{
  int                 delta1_index = 0;
  double              v1           = 0.0;
  double              U1           = 0.0;
  std::vector<double> w;     ///< date-2 utility per date-2 type
  std::vector<double> z;     ///< date-3 utility per date-2 type
  std::vector<double> U;     ///< w_n + delta_n z_n
  std::vector<double> Qbar;  ///< agent-belief upper tails
  double              lambda          = 0.0;
  double              budget_residual = 0.0;
  bool                separating      = false;
  bool                interior        = false;
  int                 newton_iterations = 0;
};

class ReductionError : public SolverError
{
public:
  ReductionError(SolverErrorCode code, std::string const &msg, ReducedSolution candidate)
    : SolverError(code, msg)
    , candidate_(std::move(candidate))
  {}

  ReducedSolution const &candidate() const noexcept
  {
    return candidate_;
  }

private:
  ReducedSolution candidate_;
};

inline constexpr int kNewtonMaxIterations = 100;
inline constexpr int kNewtonMaxHalvings   = 30;

namespace detail {

/// Linear map from y = (U1, z_1..z_N) to date-2 utilities w.
inline Eigen::MatrixXd date2_map(std::span<double const> deltas)
{
  Eigen::Index const N = static_cast<Eigen::Index>(deltas.size());
  Eigen::MatrixXd    M = Eigen::MatrixXd::Zero(N, N + 1);
  for (Eigen::Index n = 0; n < N; ++n)
  {
    M(n, 0) = 1.0;
    for (Eigen::Index i = 1; i <= n; ++i)
    {
      M(n, i + 1) = deltas[static_cast<std::size_t>(i)] - deltas[static_cast<std::size_t>(i - 1)];
    }
    M(n, n + 1) -= deltas[static_cast<std::size_t>(n)];
  }
  return M;
}

struct ReducedSystem
{
  ModelConfig const &cfg;
  int                root;
  Eigen::MatrixXd    M;
  Eigen::VectorXd    c;  ///< objective gradient in y
  Eigen::VectorXd    p;

  ReducedSystem(ModelConfig const &config, int delta1)
    : cfg(config)
    , root(delta1)
    , M(date2_map(config.deltas))
  {
    Eigen::Index const N = static_cast<Eigen::Index>(cfg.N());
    double const       d1 = cfg.deltas[static_cast<std::size_t>(root)];
    c.setZero(N + 1);
    p.resize(N);
    c[0] = d1;
    double tail = 0.0;
    std::vector<double> Q(static_cast<std::size_t>(N));
    for (Eigen::Index n = N - 1; n >= 0; --n)
    {
      tail += cfg.q[static_cast<std::size_t>(n)];
      Q[static_cast<std::size_t>(n)] = tail;
    }
    for (Eigen::Index n = 1; n < N; ++n)
    {
      c[n + 1] = d1 * Q[static_cast<std::size_t>(n)] *
                 (cfg.deltas[static_cast<std::size_t>(n)] - cfg.deltas[static_cast<std::size_t>(n - 1)]);
    }
    for (Eigen::Index n = 0; n < N; ++n)
    {
      p[n] = cfg.p[static_cast<std::size_t>(n)];
    }
  }

  Eigen::Index size() const
  {
    return M.cols();
  }

  Eigen::VectorXd date2(Eigen::VectorXd const &y) const
  {
    return M * y;
  }
  Eigen::VectorXd date3(Eigen::VectorXd const &y) const
  {
    return y.tail(M.rows());
  }

  /// Marginal cost phi'(v); quadratic cost is extended linearly below the
  /// floor so the relaxed program stays well defined.
  double mc(double v) const
  {
    if (cfg.utility.quadratic_cost())
    {
      return 2.0 * v;
    }
    return eval_phi_prime(cfg.utility, v);
  }
  double mc2(double v) const
  {
    if (cfg.utility.quadratic_cost())
    {
      return 2.0;
    }
    return eval_phi_second(cfg.utility, v);
  }
  double cost(double v) const
  {
    if (cfg.utility.quadratic_cost())
    {
      return v * v;
    }
    return eval_phi(cfg.utility, v);
  }

  bool in_domain(Eigen::VectorXd const &y) const
  {
    if (cfg.utility.quadratic_cost() || !cfg.utility.bounded())
    {
      return y.allFinite();
    }
    return y.allFinite() && (date2(y).array() >= 0.0).all() && (date3(y).array() >= 0.0).all();
  }

  /// Gradient of the Lagrangian in y at multiplier lambda.
  Eigen::VectorXd residual(Eigen::VectorXd const &y, double lambda) const
  {
    double const          R  = cfg.R;
    Eigen::VectorXd const w  = date2(y);
    Eigen::VectorXd const z  = date3(y);
    Eigen::VectorXd       mw(w.size());
    Eigen::VectorXd       mz(z.size());
    for (Eigen::Index n = 0; n < w.size(); ++n)
    {
      mw[n] = p[n] * mc(w[n]) / R;
      mz[n] = p[n] * mc(z[n]) / (R * R);
    }
    Eigen::VectorXd g = c - lambda * (M.transpose() * mw);
    g.tail(z.size()) -= lambda * mz;
    return g;
  }

  Eigen::MatrixXd jacobian(Eigen::VectorXd const &y, double lambda) const
  {
    double const          R = cfg.R;
    Eigen::VectorXd const w = date2(y);
    Eigen::VectorXd const z = date3(y);
    Eigen::VectorXd       dw(w.size());
    Eigen::VectorXd       dz(z.size());
    for (Eigen::Index n = 0; n < w.size(); ++n)
    {
      dw[n] = p[n] * mc2(w[n]) / R;
      dz[n] = p[n] * mc2(z[n]) / (R * R);
    }
    Eigen::MatrixXd J = M.transpose() * dw.asDiagonal() * M;
    J.bottomRightCorner(z.size(), z.size()).diagonal() += dz;
    return -lambda * J;
  }

  /// Efficient (w, z) at the same multiplier, mapped into y.
  Eigen::VectorXd efficient_start(double lambda) const
  {
    Eigen::Index const N  = M.rows();
    double const       d1 = cfg.deltas[static_cast<std::size_t>(root)];
    Eigen::VectorXd    y(N + 1);
    double const       w_eff = eval_rho(cfg.utility, cfg.R * d1 / lambda);
    for (Eigen::Index n = 0; n < N; ++n)
    {
      y[n + 1] = eval_rho(cfg.utility, cfg.R * cfg.R * d1 * cfg.deltas[static_cast<std::size_t>(n)] / lambda);
    }
    y[0] = w_eff + cfg.deltas[0] * y[1];
    return y;
  }

  /// Stationary point for fixed lambda.
  Eigen::VectorXd solve_inner(double lambda, int *iterations) const
  {
    if (cfg.utility.quadratic_cost())
    {
      // Linear marginal cost: the stationarity system is linear in y.
      Eigen::VectorXd const zero = Eigen::VectorXd::Zero(size());
      Eigen::VectorXd const g0   = residual(zero, lambda);
      if (iterations)
      {
        *iterations = 0;
      }
      return jacobian(zero, lambda).ldlt().solve(-g0);
    }
    Eigen::VectorXd y     = efficient_start(lambda);
    Eigen::VectorXd g     = residual(y, lambda);
    double const    scale = 1.0 + c.norm();
    for (int it = 0; it < kNewtonMaxIterations; ++it)
    {
      if (iterations)
      {
        *iterations = it;
      }
      if (g.norm() <= 1e-14 * scale)
      {
        return y;
      }
      Eigen::VectorXd const step = jacobian(y, lambda).ldlt().solve(-g);
      double                alpha = 1.0;
      bool                  accepted = false;
      for (int h = 0; h <= kNewtonMaxHalvings; ++h, alpha *= 0.5)
      {
        Eigen::VectorXd const y_try = y + alpha * step;
        if (!in_domain(y_try))
        {
          continue;
        }
        Eigen::VectorXd const g_try = residual(y_try, lambda);
        if (g_try.norm() < g.norm())
        {
          y        = y_try;
          g        = g_try;
          accepted = true;
          break;
        }
      }
      if (!accepted)
      {
        if (g.norm() <= 1e-11 * scale)
        {
          return y;  // stalled at round-off level
        }
        std::ostringstream msg;
        msg << "Newton failed to reduce the stationarity residual (norm " << g.norm() << ")";
        throw SolverError(SolverErrorCode::NewtonFailure, msg.str());
      }
    }
    if (g.norm() <= 1e-11 * scale)
    {
      return y;
    }
    throw SolverError(SolverErrorCode::NewtonFailure, "Newton iteration limit reached");
  }

  double budget(double lambda, Eigen::VectorXd const &y) const
  {
    double const          R = cfg.R;
    Eigen::VectorXd const w = date2(y);
    Eigen::VectorXd const z = date3(y);
    double                b = eval_phi(cfg.utility, eval_rho(cfg.utility, 1.0 / lambda));
    for (Eigen::Index n = 0; n < w.size(); ++n)
    {
      b += p[n] * (cost(w[n]) / R + cost(z[n]) / (R * R));
    }
    return b;
  }
};

}  // namespace detail

/// Solves the three-date equilibrium for initial type delta1_index from the
/// program with only the local upward incentive constraints, imposed with
/// equality. Throws ReductionError when the candidate is not separating or
/// not interior, since the reduction is then invalid.
inline ReducedSolution solve_equilibrium_T3(ModelConfig const &cfg, int delta1_index)
{
  if (cfg.T != 3)
  {
    throw SolverError(SolverErrorCode::Precondition, "reduced equilibrium solver needs T = 3");
  }
  if (delta1_index < 0 || delta1_index >= static_cast<int>(cfg.N()))
  {
    throw SolverError(SolverErrorCode::Precondition, "initial type index out of range");
  }
  detail::ReducedSystem const sys(cfg, delta1_index);
  double const                income = cfg.total_income();
  int                         iters  = 0;
  auto cost = [&](double lambda) { return sys.budget(lambda, sys.solve_inner(lambda, &iters)); };
  auto const search = find_budget_multiplier(cost, income);

  Eigen::VectorXd const y = sys.solve_inner(search.lambda, &iters);
  Eigen::VectorXd const w = sys.date2(y);
  Eigen::VectorXd const z = sys.date3(y);
  std::size_t const     N = cfg.N();

  ReducedSolution sol;
  sol.delta1_index      = delta1_index;
  sol.lambda            = search.lambda;
  sol.v1                = eval_rho(cfg.utility, 1.0 / search.lambda);
  sol.U1                = y[0];
  sol.newton_iterations = iters;
  sol.w.assign(w.data(), w.data() + w.size());
  sol.z.assign(z.data(), z.data() + z.size());
  sol.U.resize(N);
  sol.Qbar.resize(N);
  double tail = 0.0;
  for (std::size_t n = N; n-- > 0;)
  {
    tail += cfg.q[n];
    sol.Qbar[n] = tail;
  }
  for (std::size_t n = 0; n < N; ++n)
  {
    sol.U[n] = sol.w[n] + cfg.deltas[n] * sol.z[n];
  }
  sol.budget_residual = sys.budget(search.lambda, y) - income;

  sol.interior = true;
  if (cfg.utility.bounded())
  {
    double const floor = cfg.utility.floor();
    sol.interior       = sol.v1 > floor;
    for (std::size_t n = 0; n < N; ++n)
    {
      sol.interior = sol.interior && sol.w[n] > floor && sol.z[n] > floor;
    }
  }
  sol.separating = true;
  for (std::size_t n = 1; n < N; ++n)
  {
    sol.separating = sol.separating && sol.w[n] < sol.w[n - 1] && sol.z[n] > sol.z[n - 1];
  }
  if (!sol.separating)
  {
    throw ReductionError(SolverErrorCode::NonSeparating,
                         "reduced solution is not separating (date-2 utility must fall and date-3 "
                         "utility must rise with the date-2 type)",
                         sol);
  }
  if (!sol.interior)
  {
    throw ReductionError(SolverErrorCode::NonInterior, "reduced solution hits the utility floor", sol);
  }
  return sol;
}

/// The reduced solution as a policy on the tree rooted at its initial type.
inline Policy to_policy(ReducedSolution const &sol, ModelConfig const &cfg)
{
  Policy pol(HistoryTree(3, static_cast<int>(cfg.N()), sol.delta1_index));
  pol.at(1, std::size_t{0}) = sol.v1;
  for (std::size_t n = 0; n < cfg.N(); ++n)
  {
    pol.at(2, n) = sol.w[n];
    pol.at(3, n) = sol.z[n];
  }
  return pol;
}

/// Agent payoff of the reduced solution.
inline double reduced_objective(ReducedSolution const &sol, ModelConfig const &cfg)
{
  double const d1 = cfg.deltas[static_cast<std::size_t>(sol.delta1_index)];
  double       s  = sol.U1;
  for (std::size_t n = 1; n < cfg.N(); ++n)
  {
    s += sol.Qbar[n] * (cfg.deltas[n] - cfg.deltas[n - 1]) * sol.z[n];
  }
  return sol.v1 + d1 * s;
}

/// Restricts an unrooted policy to the subtree of one initial type.
inline Policy restrict_to_initial(Policy const &pol, int delta1_index)
{
  auto const &tree = pol.tree();
  if (tree.root())
  {
    if (*tree.root() != delta1_index)
    {
      throw SolverError(SolverErrorCode::Precondition, "policy is rooted at a different initial type");
    }
    return pol;
  }
  Policy out(HistoryTree(tree.T(), tree.N(), delta1_index));
  for (int date = 1; date <= tree.T(); ++date)
  {
    int const len  = tree.history_length(date);
    auto      vals = out.date_values(date);
    for (std::size_t i = 0; i < vals.size(); ++i)
    {
      vals[i] = pol.at(date, tree.index(out.tree().history(len, i)));
    }
  }
  return out;
}

//------------------------------------------------------------------------------
// Diagnostics
//------------------------------------------------------------------------------

struct ContinuationCost
{
  double date_npv   = 0.0;  ///< firm-belief NPV discounted to the node's own date
  double date1_value = 0.0; ///< the same discounted to date 1
};

/// Firm-belief expected NPV of payouts from the node `history` (length t,
/// 1 <= t <= T-1) onward, including the date-t payout.
inline ContinuationCost continuation_cost(Policy const &pol, ModelConfig const &cfg, std::span<int const> history)
{
  auto const &tree = pol.tree();
  int const   t    = static_cast<int>(history.size());
  if (t < 1 || t > pol.T() - 1)
  {
    throw std::out_of_range("continuation cost needs a history of length 1..T-1");
  }
  auto const &u    = cfg.utility;
  auto future = [&](auto &&self, int date, std::size_t idx) -> double {
    // NPV at `date` of payouts strictly after `date`.
    if (date == pol.T() - 1)
    {
      return eval_phi(u, pol.at(pol.T(), idx)) / cfg.R;
    }
    double s = 0.0;
    for (int n = 0; n < tree.N(); ++n)
    {
      std::size_t const c = tree.child(idx, n);
      s += cfg.p[static_cast<std::size_t>(n)] * (eval_phi(u, pol.at(date + 1, c)) + self(self, date + 1, c));
    }
    return s / cfg.R;
  };
  std::size_t const idx = tree.index(history);
  ContinuationCost  out;
  out.date_npv    = eval_phi(u, pol.at(t, idx)) + future(future, t, idx);
  out.date1_value = out.date_npv / std::pow(cfg.R, t - 1);
  return out;
}

struct BackloadingReport
{
  std::vector<double> gaps;         ///< phi'(z_n) - delta_n R phi'(w_n)
  std::vector<double> rent_terms;   ///< delta1 Qbar_n - (lambda/R) sum_{m>=n} p_m phi'(w_m), n >= 2
  double              top_gap = 0.0;
};

inline BackloadingReport check_backloading(ReducedSolution const &sol, ModelConfig const &cfg)
{
  if (!sol.separating || !sol.interior)
  {
    throw SolverError(SolverErrorCode::Precondition, "backloading diagnostics need a separating interior solution");
  }
  auto const       &u  = cfg.utility;
  std::size_t const N  = cfg.N();
  double const      d1 = cfg.deltas[static_cast<std::size_t>(sol.delta1_index)];
  BackloadingReport rep;
  for (std::size_t n = 0; n < N; ++n)
  {
    rep.gaps.push_back(eval_phi_prime(u, sol.z[n]) - cfg.deltas[n] * cfg.R * eval_phi_prime(u, sol.w[n]));
  }
  for (std::size_t n = 1; n < N; ++n)
  {
    double tail = 0.0;
    for (std::size_t m = n; m < N; ++m)
    {
      tail += cfg.p[m] * eval_phi_prime(u, sol.w[m]);
    }
    rep.rent_terms.push_back(d1 * sol.Qbar[n] - sol.lambda / cfg.R * tail);
  }
  rep.top_gap = rep.gaps.back();
  return rep;
}

enum class PolicyKind
{
  Equilibrium,
  Efficient
};

struct EulerResidual
{
  int         date = 0;  ///< t: identity links dates t and t+1
  TypeHistory history;   ///< conditioning history of length t-1 (the initial type for t = 1)
  double      residual = 0.0;
};

struct EulerReport
{
  std::vector<EulerResidual> residuals;
  double                     max_abs = 0.0;
};

/// Inverse-Euler residuals E_F[phi'(v_{t+1})] - R E[delta] E_F[phi'(v_t)],
/// with the agent mean for equilibrium and the firm mean for efficient
/// policies, and delta_1 in place of the mean at date 1.
inline EulerReport check_inverse_euler(Policy const &pol, ModelConfig const &cfg, PolicyKind kind)
{
  auto const &tree = pol.tree();
  auto const &u    = cfg.utility;
  int const   N    = tree.N();
  int const   T    = pol.T();
  auto const &mean_probs = kind == PolicyKind::Equilibrium ? cfg.q : cfg.p;
  double      mean_delta = 0.0;
  for (std::size_t n = 0; n < cfg.N(); ++n)
  {
    mean_delta += mean_probs[n] * cfg.deltas[n];
  }

  EulerReport rep;
  auto record = [&rep](int date, TypeHistory h, double r) {
    rep.max_abs = std::max(rep.max_abs, std::abs(r));
    rep.residuals.push_back({date, std::move(h), r});
  };

  for (std::size_t i = 0; i < tree.count(1); ++i)
  {
    auto const h  = tree.history(1, i);
    double     e2 = 0.0;
    for (int n = 0; n < N; ++n)
    {
      std::size_t const c = T - 1 >= 2 ? tree.child(i, n) : i;
      e2 += cfg.p[static_cast<std::size_t>(n)] * eval_phi_prime(u, pol.at(2, c));
    }
    double const d1 = cfg.deltas[static_cast<std::size_t>(h[0])];
    record(1, h, e2 - cfg.R * d1 * eval_phi_prime(u, pol.at(1, i)));
  }

  for (int t = 2; t <= T - 1; ++t)
  {
    for (std::size_t j = 0; j < tree.count(t - 1); ++j)
    {
      double now  = 0.0;
      double next = 0.0;
      for (int n = 0; n < N; ++n)
      {
        double const      pn = cfg.p[static_cast<std::size_t>(n)];
        std::size_t const c  = tree.child(j, n);
        now += pn * eval_phi_prime(u, pol.at(t, c));
        if (t + 1 == T)
        {
          next += pn * eval_phi_prime(u, pol.at(T, c));
        }
        else
        {
          for (int m = 0; m < N; ++m)
          {
            next += pn * cfg.p[static_cast<std::size_t>(m)] * eval_phi_prime(u, pol.at(t + 1, tree.child(c, m)));
          }
        }
      }
      record(t, tree.history(t - 1, j), next - cfg.R * mean_delta * now);
    }
  }
  return rep;
}

/// Firm-belief expected consumption at each date for the subtree of one
/// initial type (index 0 = date 1).
inline std::vector<double> expected_consumption(Policy const &pol, ModelConfig const &cfg, int delta1_index)
{
  Policy const rooted = restrict_to_initial(pol, delta1_index);
  auto const  &tree   = rooted.tree();
  std::vector<double> out;
  for (int date = 1; date <= rooted.T(); ++date)
  {
    int const  len  = tree.history_length(date);
    auto const vals = rooted.date_values(date);
    double     s    = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i)
    {
      s += firm_probability(tree, cfg, len, i) * eval_phi(cfg.utility, vals[i]);
    }
    out.push_back(s);
  }
  return out;
}

/// Equilibrium policy for one initial type: the reduced solver at T = 3,
/// otherwise (or when the reduction fails) the full-constraint oracle.
inline Policy equilibrium_policy(ModelConfig const &cfg, int delta1_index)
{
  if (cfg.T == 3)
  {
    try
    {
      return to_policy(solve_equilibrium_T3(cfg, delta1_index), cfg);
    }
    catch (ReductionError const &)
    {
    }
  }
  return oracle::solve_full(oracle::build_program(cfg, delta1_index)).policy;
}

struct GrowthRatios
{
  std::vector<double> equilibrium;  ///< E_F[c_{t+1}] / E_F[c_t], t = 1..T-1
  std::vector<double> efficient;
};

inline GrowthRatios log_growth_ratios(ModelConfig const &cfg, int delta1_index)
{
  if (cfg.utility.kind() != UtilityKind::Log)
  {
    throw UtilityDomainError("growth-ratio comparison needs log utility");
  }
  auto const eq  = expected_consumption(equilibrium_policy(cfg, delta1_index), cfg, delta1_index);
  auto const eff = expected_consumption(solve_efficient_policy(cfg).policy, cfg, delta1_index);
  GrowthRatios out;
  for (std::size_t k = 0; k + 1 < eq.size(); ++k)
  {
    out.equilibrium.push_back(eq[k + 1] / eq[k]);
    out.efficient.push_back(eff[k + 1] / eff[k]);
  }
  return out;
}

//------------------------------------------------------------------------------
// Constant-shift perturbation
//------------------------------------------------------------------------------

struct ShiftProbe
{
  double eta    = 0.0;
  double change = 0.0;  ///< Lagrangian(policy + eta d) - Lagrangian(policy)
};

struct ShiftReport
{
  std::vector<ShiftProbe> probes;
  double                  slope = 0.0;  ///< symmetric difference quotient at the smallest eta
};

/// Moves utility from date t into date t+1 by a type-independent amount below
/// the rooted node `parent` (length t-1; t = 1 shifts the initial node). The
/// agent's payoff is unchanged to first order when the date-t shift is
/// -eta E_A[delta] (or -eta delta_1 at date 1), so at an optimum the
/// Lagrangian change is second order in eta.
inline ShiftReport constant_shift_check(Policy const &pol, ModelConfig const &cfg, double lambda, int t,
                                        std::size_t parent, std::span<double const> etas)
{
  auto const &tree = pol.tree();
  if (!tree.root())
  {
    throw SolverError(SolverErrorCode::Precondition, "shift check needs a policy rooted at one initial type");
  }
  int const N = tree.N();
  int const T = pol.T();
  if (t < 1 || t > T - 1)
  {
    throw std::out_of_range("shift date must lie in 1..T-1");
  }
  double mean_agent = 0.0;
  for (std::size_t n = 0; n < cfg.N(); ++n)
  {
    mean_agent += cfg.q[n] * cfg.deltas[n];
  }
  double const income = cfg.total_income();
  auto lagrangian = [&](Policy const &x) {
    return agent_value(x, cfg, 0) - lambda * (firm_cost(x, cfg) - income);
  };
  auto shifted = [&](double eta) {
    Policy x = pol;
    if (t == 1)
    {
      x.at(1, std::size_t{0}) -= eta * cfg.deltas[static_cast<std::size_t>(*tree.root())];
      for (int n = 0; n < N; ++n)
      {
        x.at(2, T == 2 ? parent : tree.child(0, n)) += eta;
      }
      return x;
    }
    for (int n = 0; n < N; ++n)
    {
      std::size_t const c = tree.child(parent, n);
      x.at(t, c) -= eta * mean_agent;
      if (t + 1 == T)
      {
        x.at(T, c) += eta;
      }
      else
      {
        for (int m = 0; m < N; ++m)
        {
          x.at(t + 1, tree.child(c, m)) += eta;
        }
      }
    }
    return x;
  };

  double const base = lagrangian(pol);
  ShiftReport  rep;
  double       smallest = std::numeric_limits<double>::infinity();
  for (double eta : etas)
  {
    rep.probes.push_back({eta, lagrangian(shifted(eta)) - base});
    if (eta > 0.0 && eta < smallest)
    {
      smallest = eta;
    }
  }
  if (std::isfinite(smallest))
  {
    rep.slope = (lagrangian(shifted(smallest)) - lagrangian(shifted(-smallest))) / (2.0 * smallest);
  }
  return rep;
}

/// Second differences of the date-3 utilities predicted by the stationarity
/// system for square-root utility, a uniform grid and uniform beliefs:
/// returns lhs - rhs for n = 1..N-2.
inline std::vector<double> difference_equation_residuals(ReducedSolution const &sol, ModelConfig const &cfg)
{
  std::size_t const N = cfg.N();
  if (!cfg.utility.quadratic_cost() || N < 3)
  {
    throw SolverError(SolverErrorCode::Precondition, "difference equation needs square-root utility and N >= 3");
  }
  double const step = (cfg.deltas.back() - cfg.deltas.front()) / static_cast<double>(N - 1);
  for (std::size_t n = 0; n < N; ++n)
  {
    bool const uniform_grid = std::abs(cfg.deltas[n] - (cfg.deltas.front() + step * static_cast<double>(n))) < 1e-12;
    bool const uniform_beliefs =
        std::abs(cfg.p[n] - 1.0 / static_cast<double>(N)) < 1e-12 && std::abs(cfg.q[n] - 1.0 / static_cast<double>(N)) < 1e-12;
    if (!uniform_grid || !uniform_beliefs)
    {
      throw SolverError(SolverErrorCode::Precondition, "difference equation needs a uniform grid and uniform beliefs");
    }
  }
  auto const &d = cfg.deltas;
  auto const &z = sol.z;
  double const inv_r = 1.0 / cfg.R;
  std::vector<double> out;
  for (std::size_t n = 0; n + 2 < N; ++n)
  {
    double const ratio = (inv_r + d[n + 1] * d[n] - 2.0 * step * d[n]) / (inv_r + d[n + 2] * d[n + 1]);
    out.push_back((z[n + 2] - z[n + 1]) - (z[n + 1] - z[n]) * ratio);
  }
  return out;
}

}  // namespace sdcredit::general
