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

#include <cstddef>
#include <vector>

namespace sdcredit::testing {

inline ModelConfig make_config(int T, std::vector<double> deltas, std::vector<double> p, std::vector<double> q,
                               double R, Income income, UtilitySpec u = UtilitySpec::sqrt_power())
{
  ModelConfig cfg;
  cfg.T       = T;
  cfg.deltas  = std::move(deltas);
  cfg.p       = std::move(p);
  cfg.q       = std::move(q);
  cfg.R       = R;
  cfg.income  = income;
  cfg.utility = u;
  return cfg;
}

/// Two-type instance with a certainly impatient agent in the firm's eyes.
inline ModelConfig impatience_config(int T, double q2, double R, Income income = {IncomeKind::TotalNPV, 3.0})
{
  return make_config(T, {0.4, 0.9}, {1.0, 0.0}, {1.0 - q2, q2}, R, income);
}

inline ModelConfig three_period_example()
{
  return impatience_config(3, 0.25, 1.0);
}

/// Uniform grid of n discount factors on [0.5, 1] with uniform beliefs.
inline ModelConfig uniform_grid_config(std::size_t n, int T = 3)
{
  std::vector<double> d(n);
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k)
  {
    d[k] = 0.5 + 0.5 * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return make_config(T, d, w, w, 1.5, {IncomeKind::TotalNPV, 3.0});
}

inline ModelConfig penalty_config()
{
  return uniform_grid_config(2);
}

inline ModelConfig log_config(std::vector<double> p, std::vector<double> q)
{
  return make_config(3, {0.5, 0.75, 1.0}, std::move(p), std::move(q), 1.5, {IncomeKind::TotalNPV, 3.0},
                     UtilitySpec::log());
}

}  // namespace sdcredit::testing
