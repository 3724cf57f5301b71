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

#include "sdcredit/utility.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdcredit {

enum class IncomeKind
{
  TotalNPV,
  PerPeriod
};

struct Income
{
  IncomeKind kind  = IncomeKind::TotalNPV;
  double     value = 0.0;
};

/// One problem instance. Type indices are zero-based throughout the library;
/// index 0 is the most impatient type.
struct ModelConfig
{
  int                 T = 3;
  std::vector<double> deltas;
  std::vector<double> p;  ///< firm (true) beliefs
  std::vector<double> q;  ///< agent beliefs
  double              R = 1.0;
  Income              income;
  UtilitySpec         utility = UtilitySpec::sqrt_power();

  std::size_t N() const noexcept
  {
    return deltas.size();
  }

  /// Present value of income at date 1.
  double total_income() const
  {
    if (income.kind == IncomeKind::TotalNPV)
    {
      return income.value;
    }
    double sum  = 0.0;
    double disc = 1.0;
    for (int t = 1; t <= T; ++t)
    {
      sum += income.value * disc;
      disc /= R;
    }
    return sum;
  }
};

/// Which structural assumptions to enforce on top of the common ones.
enum class Section
{
  General,
  Three,
  Four
};

enum class IssueCode
{
  HorizonTooShort,
  TooFewTypes,
  DeltaNotPositive,
  DeltasNotIncreasing,
  BeliefSizeMismatch,
  NegativeProbability,
  FirmBeliefsSum,
  AgentBeliefsSum,
  FosdViolated,
  AgentSupport,
  RateBelowOne,
  IncomeNotPositive,
  ImpatienceTypeCount,
  ImpatienceFirmCertainty,
  ImpatienceBoundedUtility,
  FullyNaiveLimit,
  FirmSupport
};

enum class Severity
{
  Error,
  Note
};

struct Issue
{
  IssueCode   code;
  Severity    severity;
  std::string message;
};

inline std::string to_string(IssueCode code)
{
  switch (code)
  {
  case IssueCode::HorizonTooShort:
    return "horizon_too_short";
  case IssueCode::TooFewTypes:
    return "too_few_types";
  case IssueCode::DeltaNotPositive:
    return "delta_not_positive";
  case IssueCode::DeltasNotIncreasing:
    return "deltas_not_increasing";
  case IssueCode::BeliefSizeMismatch:
    return "belief_size_mismatch";
  case IssueCode::NegativeProbability:
    return "negative_probability";
  case IssueCode::FirmBeliefsSum:
    return "firm_beliefs_sum";
  case IssueCode::AgentBeliefsSum:
    return "agent_beliefs_sum";
  case IssueCode::FosdViolated:
    return "fosd_violated";
  case IssueCode::AgentSupport:
    return "agent_support";
  case IssueCode::RateBelowOne:
    return "rate_below_one";
  case IssueCode::IncomeNotPositive:
    return "income_not_positive";
  case IssueCode::ImpatienceTypeCount:
    return "impatience_type_count";
  case IssueCode::ImpatienceFirmCertainty:
    return "impatience_firm_certainty";
  case IssueCode::ImpatienceBoundedUtility:
    return "impatience_bounded_utility";
  case IssueCode::FullyNaiveLimit:
    return "fully_naive_limit";
  case IssueCode::FirmSupport:
    return "firm_support";
  }
  return "unknown";
}

class ValidationError : public std::runtime_error
{
public:
  explicit ValidationError(std::vector<Issue> issues)
    : std::runtime_error(summarize(issues))
    , issues_(std::move(issues))
  {}

  std::vector<Issue> const &issues() const noexcept
  {
    return issues_;
  }

private:
  static std::string summarize(std::vector<Issue> const &issues)
  {
    std::ostringstream out;
    bool               first = true;
    for (auto const &issue : issues)
    {
      if (issue.severity != Severity::Error)
      {
        continue;
      }
      out << (first ? "" : "; ") << issue.message;
      first = false;
    }
    return out.str();
  }

  std::vector<Issue> issues_;
};

inline constexpr double kProbabilitySumTolerance = 1e-12;

/// Checks every assumption for the requested section. Pure; never throws for
/// bad data, only reports.
inline std::vector<Issue> validate(ModelConfig const &cfg, Section section = Section::General)
{
  std::vector<Issue> out;
  auto error = [&out](IssueCode code, std::string msg) {
    out.push_back({code, Severity::Error, std::move(msg)});
  };

  if (cfg.T < 3)
  {
    error(IssueCode::HorizonTooShort, "horizon T=" + std::to_string(cfg.T) + " below 3");
  }
  std::size_t const N = cfg.N();
  if (N < 2)
  {
    error(IssueCode::TooFewTypes, "at least two discount factors required");
  }
  for (std::size_t n = 0; n < N; ++n)
  {
    if (!(cfg.deltas[n] > 0.0))
    {
      error(IssueCode::DeltaNotPositive, "discount factor " + std::to_string(n + 1) + " not positive");
    }
    if (n > 0 && !(cfg.deltas[n] > cfg.deltas[n - 1]))
    {
      error(IssueCode::DeltasNotIncreasing,
            "discount factors not strictly increasing at n=" + std::to_string(n + 1));
    }
  }
  if (!(cfg.R >= 1.0))
  {
    error(IssueCode::RateBelowOne, "gross interest rate R below 1");
  }
  if (!(cfg.income.value > 0.0))
  {
    error(IssueCode::IncomeNotPositive, "income must be positive");
  }

  bool beliefs_usable = true;
  if (cfg.p.size() != N || cfg.q.size() != N)
  {
    error(IssueCode::BeliefSizeMismatch, "belief vectors must have one entry per discount factor");
    beliefs_usable = false;
  }
  else
  {
    for (std::size_t n = 0; n < N; ++n)
    {
      if (!(cfg.p[n] >= 0.0) || !(cfg.q[n] >= 0.0))
      {
        error(IssueCode::NegativeProbability, "negative probability at n=" + std::to_string(n + 1));
        beliefs_usable = false;
      }
    }
    double const ps = std::accumulate(cfg.p.begin(), cfg.p.end(), 0.0);
    double const qs = std::accumulate(cfg.q.begin(), cfg.q.end(), 0.0);
    if (std::abs(ps - 1.0) > kProbabilitySumTolerance)
    {
      error(IssueCode::FirmBeliefsSum, "firm beliefs do not sum to 1");
      beliefs_usable = false;
    }
    if (std::abs(qs - 1.0) > kProbabilitySumTolerance)
    {
      error(IssueCode::AgentBeliefsSum, "agent beliefs do not sum to 1");
      beliefs_usable = false;
    }
  }

  if (beliefs_usable)
  {
    double cp = 0.0;
    double cq = 0.0;
    for (std::size_t m = 0; m + 1 < N; ++m)
    {
      cp += cfg.p[m];
      cq += cfg.q[m];
      if (cp < cq - kProbabilitySumTolerance)
      {
        error(IssueCode::FosdViolated, "FOSD violated at m=" + std::to_string(m + 1));
        break;
      }
    }

    bool const fully_naive = section == Section::Three && N == 2 && cfg.q[0] == 0.0;
    for (std::size_t n = 0; n < N; ++n)
    {
      if (cfg.q[n] > 0.0)
      {
        continue;
      }
      if (fully_naive)
      {
        out.push_back({IssueCode::FullyNaiveLimit, Severity::Note,
                       "q2=1: fully naive limiting case, agent preferences and beliefs coincide"});
      }
      else
      {
        error(IssueCode::AgentSupport,
              "agent beliefs lack full support at n=" + std::to_string(n + 1));
      }
    }

    if (section == Section::Three && cfg.p[0] != 1.0)
    {
      error(IssueCode::ImpatienceFirmCertainty, "p1=1 required");
    }
    if (section == Section::Four)
    {
      for (std::size_t n = 0; n < N; ++n)
      {
        if (!(cfg.p[n] > 0.0))
        {
          error(IssueCode::FirmSupport, "firm beliefs lack full support at n=" + std::to_string(n + 1));
        }
      }
    }
  }

  if (section == Section::Three)
  {
    if (N != 2)
    {
      error(IssueCode::ImpatienceTypeCount, "exactly two discount factors required");
    }
    if (!cfg.utility.bounded())
    {
      error(IssueCode::ImpatienceBoundedUtility, "bounded utility required (off-path utility is u(0))");
    }
  }
  return out;
}

inline bool has_errors(std::span<Issue const> issues)
{
  return std::any_of(issues.begin(), issues.end(),
                     [](Issue const &i) { return i.severity == Severity::Error; });
}

/// Returns a copy with beliefs renormalized to sum exactly to 1, or throws
/// ValidationError listing every violated assumption.
inline ModelConfig validated(ModelConfig cfg, Section section = Section::General)
{
  auto issues = validate(cfg, section);
  if (has_errors(issues))
  {
    throw ValidationError(std::move(issues));
  }
  for (auto *probs : {&cfg.p, &cfg.q})
  {
    double const s = std::accumulate(probs->begin(), probs->end(), 0.0);
    for (double &x : *probs)
    {
      x /= s;
    }
  }
  return cfg;
}

//------------------------------------------------------------------------------
// Type histories
//------------------------------------------------------------------------------

using TypeHistory = std::vector<int>;

/// Dense mixed-radix enumeration of type histories of length 1..T-1,
/// optionally with the first entry pinned to a fixed initial type.
class HistoryTree
{
public:
  HistoryTree(int T, int N, std::optional<int> root = std::nullopt)
    : T_(T)
    , N_(N)
    , root_(root)
  {
    if (T < 2 || N < 1)
    {
      throw std::invalid_argument("history tree needs T >= 2 and N >= 1");
    }
    if (root && (*root < 0 || *root >= N))
    {
      throw std::out_of_range("root type index out of range");
    }
  }

  int T() const noexcept
  {
    return T_;
  }
  int N() const noexcept
  {
    return N_;
  }
  std::optional<int> root() const noexcept
  {
    return root_;
  }

  /// Length of the history that indexes date-t values (date T reuses T-1).
  int history_length(int date) const
  {
    check_date(date);
    return std::min(date, T_ - 1);
  }

  /// Number of histories of length len.
  std::size_t count(int len) const
  {
    if (len < 1 || len > T_ - 1)
    {
      throw std::out_of_range("history length out of range");
    }
    std::size_t n = 1;
    for (int k = root_ ? 1 : 0; k < len; ++k)
    {
      n *= static_cast<std::size_t>(N_);
    }
    return n;
  }

  std::size_t index(std::span<int const> h) const
  {
    if (h.empty() || static_cast<int>(h.size()) > T_ - 1)
    {
      throw std::out_of_range("history length out of range");
    }
    std::size_t k = 0;
    if (root_)
    {
      if (h[0] != *root_)
      {
        throw std::out_of_range("history does not start at the pinned initial type");
      }
      k = 1;
    }
    std::size_t idx = 0;
    for (; k < h.size(); ++k)
    {
      if (h[k] < 0 || h[k] >= N_)
      {
        throw std::out_of_range("type index out of range");
      }
      idx = idx * static_cast<std::size_t>(N_) + static_cast<std::size_t>(h[k]);
    }
    return idx;
  }

  TypeHistory history(int len, std::size_t idx) const
  {
    std::size_t const total = count(len);
    if (idx >= total)
    {
      throw std::out_of_range("history index out of range");
    }
    TypeHistory h(static_cast<std::size_t>(len));
    for (int k = len - 1; k >= (root_ ? 1 : 0); --k)
    {
      h[static_cast<std::size_t>(k)] = static_cast<int>(idx % static_cast<std::size_t>(N_));
      idx /= static_cast<std::size_t>(N_);
    }
    if (root_)
    {
      h[0] = *root_;
    }
    return h;
  }

  /// Index of the child (h, n) given the index of h.
  std::size_t child(std::size_t parent_idx, int n) const noexcept
  {
    return parent_idx * static_cast<std::size_t>(N_) + static_cast<std::size_t>(n);
  }

  bool operator==(HistoryTree const &) const = default;

private:
  void check_date(int date) const
  {
    if (date < 1 || date > T_)
    {
      throw std::out_of_range("date out of range");
    }
  }

  int                T_;
  int                N_;
  std::optional<int> root_;
};

/// Lexicographically ordered histories of length t (1 <= t <= T-1). With
/// restrict_to_lowest the first entry is pinned to the most impatient type.
inline std::vector<TypeHistory> histories(ModelConfig const &cfg, int t, bool restrict_to_lowest = false)
{
  if (t < 1 || t > cfg.T - 1)
  {
    throw std::out_of_range("history length must lie in 1..T-1");
  }
  HistoryTree const tree(cfg.T, static_cast<int>(cfg.N()),
                         restrict_to_lowest ? std::optional<int>(0) : std::nullopt);
  std::vector<TypeHistory> out;
  std::size_t const        total = tree.count(t);
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i)
  {
    out.push_back(tree.history(t, i));
  }
  return out;
}

//------------------------------------------------------------------------------
// Policies
//------------------------------------------------------------------------------

/// Utility value per (date, history). Date-T values share the date-(T-1)
/// history index.
class Policy
{
public:
  explicit Policy(HistoryTree tree, double fill = 0.0)
    : tree_(std::move(tree))
  {
    values_.resize(static_cast<std::size_t>(tree_.T()));
    for (int date = 1; date <= tree_.T(); ++date)
    {
      values_[static_cast<std::size_t>(date - 1)].assign(tree_.count(tree_.history_length(date)), fill);
    }
  }

  HistoryTree const &tree() const noexcept
  {
    return tree_;
  }
  int T() const noexcept
  {
    return tree_.T();
  }

  std::span<double> date_values(int date)
  {
    return values_.at(static_cast<std::size_t>(date - 1));
  }
  std::span<double const> date_values(int date) const
  {
    return values_.at(static_cast<std::size_t>(date - 1));
  }

  double &at(int date, std::size_t idx)
  {
    return values_.at(static_cast<std::size_t>(date - 1)).at(idx);
  }
  double at(int date, std::size_t idx) const
  {
    return values_.at(static_cast<std::size_t>(date - 1)).at(idx);
  }

  double &at(int date, std::span<int const> h)
  {
    check_length(date, h);
    return at(date, tree_.index(h));
  }
  double at(int date, std::span<int const> h) const
  {
    check_length(date, h);
    return at(date, tree_.index(h));
  }

  std::size_t size() const noexcept
  {
    std::size_t n = 0;
    for (auto const &v : values_)
    {
      n += v.size();
    }
    return n;
  }

  /// Flattened view in date-major order; used by the oracle.
  std::vector<double> flatten() const
  {
    std::vector<double> out;
    out.reserve(size());
    for (auto const &v : values_)
    {
      out.insert(out.end(), v.begin(), v.end());
    }
    return out;
  }

  void assign(std::span<double const> flat)
  {
    if (flat.size() != size())
    {
      throw std::invalid_argument("flattened policy has the wrong size");
    }
    std::size_t k = 0;
    for (auto &v : values_)
    {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), v.size(), v.begin());
      k += v.size();
    }
  }

private:
  void check_length(int date, std::span<int const> h) const
  {
    if (static_cast<int>(h.size()) != tree_.history_length(date))
    {
      throw std::out_of_range("history length does not match the date");
    }
  }

  HistoryTree                      tree_;
  std::vector<std::vector<double>> values_;
};

/// Agent-belief expected discounted utility from date t+1 onward after the
/// date-t node idx (1 <= t <= T-1), discounting from date t+1 by the
/// realised future types.
inline double agent_continuation(Policy const &pol, ModelConfig const &cfg, int t, std::size_t idx)
{
  int const T = pol.T();
  if (t == T - 1)
  {
    return pol.at(T, idx);
  }
  double sum = 0.0;
  for (int n = 0; n < static_cast<int>(cfg.N()); ++n)
  {
    std::size_t const c = pol.tree().child(idx, n);
    sum += cfg.q[static_cast<std::size_t>(n)] *
           (pol.at(t + 1, c) + cfg.deltas[static_cast<std::size_t>(n)] * agent_continuation(pol, cfg, t + 1, c));
  }
  return sum;
}

/// Date-1 agent payoff of the initial node idx.
inline double agent_value(Policy const &pol, ModelConfig const &cfg, std::size_t idx)
{
  int const first = pol.tree().root() ? *pol.tree().root() : static_cast<int>(idx);
  return pol.at(1, idx) + cfg.deltas[static_cast<std::size_t>(first)] * agent_continuation(pol, cfg, 1, idx);
}

/// Truthful minus deviation payoff for a date-t type `truth` reporting
/// `report` after the date-(t-1) node parent (2 <= t <= T-1).
inline double ic_slack(Policy const &pol, ModelConfig const &cfg, int t, std::size_t parent, int truth,
                       int report)
{
  double const d      = cfg.deltas.at(static_cast<std::size_t>(truth));
  std::size_t const a = pol.tree().child(parent, truth);
  std::size_t const b = pol.tree().child(parent, report);
  return (pol.at(t, a) + d * agent_continuation(pol, cfg, t, a)) -
         (pol.at(t, b) + d * agent_continuation(pol, cfg, t, b));
}

/// Firm-belief probability of reaching the node (len, idx) from the root of
/// the tree, excluding the pinned initial type.
inline double firm_probability(HistoryTree const &tree, ModelConfig const &cfg, int len, std::size_t idx)
{
  auto const h  = tree.history(len, idx);
  double     pr = 1.0;
  for (std::size_t k = tree.root() ? 1 : 0; k < h.size(); ++k)
  {
    pr *= cfg.p[static_cast<std::size_t>(h[k])];
  }
  return pr;
}

/// Firm-belief expected present value of the money cost of the policy. For
/// an unrooted tree the initial type is also drawn from p.
inline double firm_cost(Policy const &pol, ModelConfig const &cfg)
{
  auto const &tree  = pol.tree();
  double      total = 0.0;
  double      disc  = 1.0;
  for (int date = 1; date <= pol.T(); ++date)
  {
    int const  len  = tree.history_length(date);
    auto const vals = pol.date_values(date);
    for (std::size_t i = 0; i < vals.size(); ++i)
    {
      double const pr = firm_probability(tree, cfg, len, i);
      if (pr > 0.0)
      {
        total += pr * eval_phi(cfg.utility, vals[i]) * disc;
      }
    }
    disc /= cfg.R;
  }
  return total;
}

//------------------------------------------------------------------------------
// Random-discounting representation and choice reversals
//------------------------------------------------------------------------------

struct DiscountRepresentation
{
  double              delta_bar = 0.0;  ///< agent-belief mean discount factor
  std::vector<double> betas;            ///< delta_n / delta_bar
  std::vector<double> probabilities;    ///< occurrence probabilities (firm beliefs)
  bool                beta_top_exceeds_one = false;
};

inline DiscountRepresentation discount_representation(ModelConfig const &cfg)
{
  DiscountRepresentation rep;
  for (std::size_t n = 0; n < cfg.N(); ++n)
  {
    rep.delta_bar += cfg.q[n] * cfg.deltas[n];
  }
  rep.betas.reserve(cfg.N());
  for (double d : cfg.deltas)
  {
    rep.betas.push_back(d / rep.delta_bar);
  }
  rep.probabilities        = cfg.p;
  rep.beta_top_exceeds_one = !rep.betas.empty() && rep.betas.back() > 1.0;
  return rep;
}

enum class Choice
{
  Immediate,
  Delayed
};

struct ReversalOutcome
{
  double probability_immediate_now = 0.0;  ///< problem A: reward now vs one period later
  Choice choice_far                = Choice::Delayed;  ///< problem B: both rewards in the future
};

/// Immediate vs one-period-delayed reward, once starting now (A) and once
/// starting s >= 1 periods ahead (B).
inline ReversalOutcome choice_reversal(ModelConfig const &cfg, double immediate, double delayed, int s = 1)
{
  if (!(immediate > 0.0) || !(delayed > 0.0) || s < 1)
  {
    throw std::invalid_argument("rewards must be positive and the delay at least one period");
  }
  ReversalOutcome out;
  for (std::size_t n = 0; n < cfg.N(); ++n)
  {
    if (immediate > cfg.deltas[n] * delayed)
    {
      out.probability_immediate_now += cfg.p[n];
    }
  }
  // D(t+s+1)/D(t+s) = delta_bar for s >= 1, so the common factor cancels.
  double const delta_bar = discount_representation(cfg).delta_bar;
  out.choice_far         = delayed * delta_bar > immediate ? Choice::Delayed : Choice::Immediate;
  return out;
}

//------------------------------------------------------------------------------
// Solver errors
//------------------------------------------------------------------------------

enum class SolverErrorCode
{
  BracketFailure,
  NewtonFailure,
  NonSeparating,
  NonInterior,
  ConstructionInfeasible,
  IterationCap,
  Precondition
};

class SolverError : public std::runtime_error
{
public:
  SolverError(SolverErrorCode code, std::string const &msg)
    : std::runtime_error(msg)
    , code_(code)
  {}

  SolverErrorCode code() const noexcept
  {
    return code_;
  }

private:
  SolverErrorCode code_;
};

}  // namespace sdcredit
