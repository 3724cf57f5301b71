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

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>

namespace sdcredit {

/// Closed-form per-period utility families.
///
/// SqrtPower and IsoelasticBounded both have u(c) = c^a with u(0) = 0; the
/// square-root member is kept as its own kind because it is the workhorse of
/// the three-period examples. Log has u(0) = -inf and is never cornered.
enum class UtilityKind
{
  SqrtPower,
  Log,
  IsoelasticBounded
};

/// Tag for u(0) = -infinity. Never represented as a float.
struct MinusInfinity
{
  bool operator==(MinusInfinity const &) const = default;
};

using UtilityValue = std::variant<double, MinusInfinity>;

class UtilityDomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

class UtilitySpec
{
public:
  static UtilitySpec sqrt_power(double alpha = 0.5)
  {
    return UtilitySpec(UtilityKind::SqrtPower, alpha);
  }
  static UtilitySpec log()
  {
    return UtilitySpec(UtilityKind::Log, 0.0);
  }
  static UtilitySpec isoelastic_bounded(double gamma)
  {
    return UtilitySpec(UtilityKind::IsoelasticBounded, gamma);
  }

  UtilityKind kind() const noexcept
  {
    return kind_;
  }
  /// Curvature exponent for the power kinds; 0 for Log.
  double exponent() const noexcept
  {
    return exponent_;
  }
  bool bounded() const noexcept
  {
    return kind_ != UtilityKind::Log;
  }
  /// True when phi is exactly v^2 (phi' linear), i.e. u(c) = sqrt(c).
  bool quadratic_cost() const noexcept
  {
    return bounded() && exponent_ == 0.5;
  }

  /// u(0) for bounded kinds.
  double floor() const
  {
    if (!bounded())
    {
      throw UtilityDomainError("log utility has no finite floor");
    }
    return 0.0;
  }

  /// Right derivative phi'_+(0); zero for every power kind with exponent < 1.
  double phi_prime_at_floor() const
  {
    if (!bounded())
    {
      throw UtilityDomainError("log utility has no floor");
    }
    return 0.0;
  }

  std::string name() const
  {
    switch (kind_)
    {
    case UtilityKind::SqrtPower:
      return "sqrt";
    case UtilityKind::Log:
      return "log";
    case UtilityKind::IsoelasticBounded:
      return "isoelastic";
    }
    return "unknown";
  }

  bool operator==(UtilitySpec const &) const = default;

private:
  UtilitySpec(UtilityKind kind, double exponent)
    : kind_(kind)
    , exponent_(exponent)
  {
    if (kind != UtilityKind::Log && !(exponent > 0.0 && exponent < 1.0))
    {
      throw std::invalid_argument("power utility exponent must lie in (0,1)");
    }
  }

  UtilityKind kind_;
  double      exponent_;
};

/// u(c). Log at c = 0 yields the MinusInfinity tag.
inline UtilityValue eval_u(UtilitySpec const &spec, double c)
{
  if (!(c >= 0.0))
  {
    throw UtilityDomainError("consumption must be non-negative");
  }
  if (!spec.bounded())
  {
    if (c == 0.0)
    {
      return MinusInfinity{};
    }
    return std::log(c);
  }
  return std::pow(c, spec.exponent());
}

/// u(c) for c > 0 when the caller knows the result is finite.
inline double eval_u_finite(UtilitySpec const &spec, double c)
{
  auto const v = eval_u(spec, c);
  if (std::holds_alternative<MinusInfinity>(v))
  {
    throw UtilityDomainError("utility is -infinity at zero consumption");
  }
  return std::get<double>(v);
}

namespace detail {

inline void check_utility_in_range(UtilitySpec const &spec, double v)
{
  if (spec.bounded() && !(v >= 0.0))
  {
    throw UtilityDomainError("utility below u(0) for a bounded kind");
  }
  if (!std::isfinite(v))
  {
    throw UtilityDomainError("utility must be finite");
  }
}

}  // namespace detail

/// phi = u^{-1}: money cost of delivering utility v.
inline double eval_phi(UtilitySpec const &spec, double v)
{
  detail::check_utility_in_range(spec, v);
  if (!spec.bounded())
  {
    return std::exp(v);
  }
  if (spec.quadratic_cost())
  {
    return v * v;
  }
  return std::pow(v, 1.0 / spec.exponent());
}

/// phi'(v), the marginal cost of utility.
inline double eval_phi_prime(UtilitySpec const &spec, double v)
{
  detail::check_utility_in_range(spec, v);
  if (!spec.bounded())
  {
    return std::exp(v);
  }
  if (spec.quadratic_cost())
  {
    return 2.0 * v;
  }
  double const a = spec.exponent();
  return std::pow(v, 1.0 / a - 1.0) / a;
}

/// phi''(v); used for Newton Jacobians.
inline double eval_phi_second(UtilitySpec const &spec, double v)
{
  detail::check_utility_in_range(spec, v);
  if (!spec.bounded())
  {
    return std::exp(v);
  }
  if (spec.quadratic_cost())
  {
    return 2.0;
  }
  double const a = spec.exponent();
  return (1.0 / a - 1.0) * std::pow(v, 1.0 / a - 2.0) / a;
}

/// rho = (phi')^{-1}, clipped at the utility floor when x <= phi'_+(0).
inline double eval_rho(UtilitySpec const &spec, double x)
{
  if (!spec.bounded())
  {
    if (!(x > 0.0))
    {
      throw UtilityDomainError("log utility requires a positive marginal cost");
    }
    return std::log(x);
  }
  if (!(x >= 0.0))
  {
    throw UtilityDomainError("marginal cost must be non-negative");
  }
  if (x <= spec.phi_prime_at_floor())
  {
    return spec.floor();
  }
  if (spec.quadratic_cost())
  {
    return 0.5 * x;
  }
  double const a = spec.exponent();
  // phi'(v) = v^{1/a-1}/a  =>  v = (a x)^{a/(1-a)}
  return std::pow(a * x, a / (1.0 - a));
}

}  // namespace sdcredit
