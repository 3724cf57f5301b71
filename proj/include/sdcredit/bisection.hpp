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

#include <cmath>
#include <concepts>
#include <sstream>

namespace sdcredit {

struct MultiplierSearch
{
  double lambda     = 0.0;
  double cost       = 0.0;  ///< budget usage at lambda
  double residual   = 0.0;  ///< cost - income
  int    iterations = 0;
};

inline constexpr int    kBisectionMaxIterations = 200;
inline constexpr double kBudgetRelTolerance     = 1e-12;

/// Finds lambda > 0 with cost(lambda) = income for a cost that is continuous
/// and decreasing in lambda. Bisection runs on log(lambda) so the bracket can
/// span many orders of magnitude.
template <std::invocable<double> CostFn>
MultiplierSearch find_budget_multiplier(CostFn &&cost, double income, double guess = 1.0)
{
  double lo = guess;
  double hi = guess;
  int    grow = 0;
  while (cost(hi) > income)
  {
    hi *= 2.0;
    if (++grow > 2000 || !std::isfinite(hi))
    {
      std::ostringstream msg;
      msg << "budget bracket failure: cost still above income at lambda=" << hi;
      throw SolverError(SolverErrorCode::BracketFailure, msg.str());
    }
  }
  grow = 0;
  while (cost(lo) < income)
  {
    lo *= 0.5;
    if (++grow > 2000 || lo == 0.0)
    {
      std::ostringstream msg;
      msg << "budget bracket failure: cost still below income at lambda=" << lo;
      throw SolverError(SolverErrorCode::BracketFailure, msg.str());
    }
  }

  MultiplierSearch best;
  best.lambda   = hi;
  best.cost     = cost(hi);
  best.residual = best.cost - income;
  auto consider = [&](double lam, double c) {
    if (std::abs(c - income) < std::abs(best.residual))
    {
      best.lambda   = lam;
      best.cost     = c;
      best.residual = c - income;
    }
  };
  consider(lo, cost(lo));

  for (int it = 1; it <= kBisectionMaxIterations; ++it)
  {
    best.iterations = it;
    double const mid = std::sqrt(lo) * std::sqrt(hi);
    if (!(mid > lo && mid < hi))
    {
      break;
    }
    double const c = cost(mid);
    consider(mid, c);
    if (std::abs(c - income) <= kBudgetRelTolerance * income)
    {
      break;
    }
    (c > income ? lo : hi) = mid;
  }
  return best;
}

}  // namespace sdcredit
