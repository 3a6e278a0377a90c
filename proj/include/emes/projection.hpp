#pragma once

#include <cmath>

#include "emes/types.hpp"

namespace emes {

namespace detail {

/// Bisection for a non-increasing scalar function g on [lo, hi] with
/// g(lo) >= 0 >= g(hi). Returns the final feasible endpoint (the side with
/// g <= 0) after a fixed number of halvings.
template <class Fn>
double bisect_decreasing(Fn&& g, double lo, double hi, int rounds = 64) {
  for (int k = 0; k < rounds; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

}  // namespace detail

/// Euclidean projection onto {e : 0 <= e <= caps, sum(e) <= budget}.
/// The projection is clamp(x - t, 0, caps) for the smallest multiplier
/// t >= 0 that satisfies the budget; t is found by bisection.
inline Vector project_box_budget(const Vector& x, const Vector& caps,
                                 double budget) {
  if (x.size() != caps.size())
    throw DimensionError("project_box_budget: size mismatch");
  Vector y = x.cwiseMax(0.0).cwiseMin(caps);
  if (y.sum() <= budget) return y;

  auto clamped_sum = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      s += std::min(std::max(x[i] - t, 0.0), caps[i]);
    return s - budget;
  };
  const double t = detail::bisect_decreasing(clamped_sum, 0.0, x.maxCoeff(), 96);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    y[i] = std::min(std::max(x[i] - t, 0.0), caps[i]);
  // t sits on the feasible side of the bisection, so any residual excess is
  // rounding dust; shave it off the largest coordinate.
  const double excess = y.sum() - budget;
  if (excess > 0.0) {
    Eigen::Index imax = 0;
    y.maxCoeff(&imax);
    y[imax] = std::max(0.0, y[imax] - excess);
  }
  return y;
}

/// Euclidean projection onto {p : lo <= p <= hi, sum(p) == budget}.
/// Requires n*lo <= budget <= n*hi.
inline Vector project_price_simplex(const Vector& x, double budget, double lo,
                                    double hi) {
  const Eigen::Index n = x.size();
  if (n == 0) throw DimensionError("project_price_simplex: empty vector");
  if (n * lo > budget * (1.0 + 1e-12) + 1e-12 || n * hi < budget * (1.0 - 1e-12) - 1e-12)
    throw ConfigError("project_price_simplex: infeasible budget for bounds");

  auto clamped_sum = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      s += std::min(std::max(x[i] - t, lo), hi);
    return s - budget;
  };
  double t_lo = x.minCoeff() - hi;  // everything at hi -> sum maximal
  double t_hi = x.maxCoeff() - lo;  // everything at lo -> sum minimal
  const double t = detail::bisect_decreasing(clamped_sum, t_lo, t_hi, 96);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i)
    y[i] = std::min(std::max(x[i] - t, lo), hi);
  // Exact-sum finish: spread the residual over coordinates that stay inside
  // the box. The residual is at rounding scale after 96 halvings.
  double residual = budget - y.sum();
  if (residual != 0.0) {
    for (Eigen::Index i = 0; i < n && residual != 0.0; ++i) {
      const double room = residual > 0.0 ? hi - y[i] : lo - y[i];
      const double give = residual > 0.0 ? std::min(residual, room)
                                         : std::max(residual, room);
      y[i] += give;
      residual -= give;
    }
  }
  return y;
}

/// Euclidean projection onto the feasible offer set further intersected with
/// the half-space {y : <normal, y> <= offset}. Used by the solver's
/// separating-hyperplane step. The half-space multiplier is located by an
/// outer bisection; monotonicity of <normal, P(x - nu*normal)> in nu follows
/// from the monotonicity of the projection operator.
inline Vector project_box_budget_halfspace(const Vector& x, const Vector& caps,
                                           double budget, const Vector& normal,
                                           double offset) {
  Vector q = project_box_budget(x, caps, budget);
  const double scale = normal.norm();
  if (scale < 1e-300 || normal.dot(q) <= offset) return q;

  // March along the unit normal so the search variable carries the
  // geometric distance; this keeps the inner projections well conditioned.
  const Vector unit = normal / scale;
  auto violation = [&](double s) {
    return normal.dot(project_box_budget(x - s * unit, caps, budget)) - offset;
  };
  double lo = 0.0;
  double hi = 1.0;
  int guard = 0;
  while (violation(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 120)
      throw std::logic_error("project_box_budget_halfspace: no bracket found");
  }
  const double s = detail::bisect_decreasing(violation, lo, hi, 72);
  return project_box_budget(x - s * unit, caps, budget);
}

}  // namespace emes
