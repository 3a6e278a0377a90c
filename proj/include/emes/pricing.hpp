#pragma once

#include <cmath>

#include "emes/model.hpp"
#include "emes/projection.hpp"
#include "emes/types.hpp"

namespace emes {

struct PricingNonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Energy floor applied before pricing so that a consumer offering nothing
/// still receives a (maximal-weight) price instead of dividing by zero.
inline constexpr double kPricingEnergyFloor = 1e-9;  // kWh

/// Optimal discriminate unit prices for the offered energies: the interior
/// stationarity condition makes p_n proportional to e_n^(1/(1-r)), so small
/// sellers receive higher unit prices. Prices are realized as
///
///   p_n = clamp(kappa * e_n^(1/(1-r)), price_min, price_max)
///
/// with the common scale kappa chosen by bisection so the prices sum to the
/// budget exactly. Working on the log scale keeps the weights finite for
/// exponents close to 1 and for the floored zero offers. When no bound is
/// active this reduces to the pure proportional rule.
inline Vector closed_form_prices(const Vector& energies, const GridConfig& cfg) {
  const Eigen::Index n = energies.size();
  validate(cfg, static_cast<int>(n));
  if ((energies.array() < 0.0).any())
    throw ConfigError("closed_form_prices: negative energy");

  const double beta = 1.0 / (1.0 - cfg.cost_exponent);  // < 0
  Vector log_weight(n);
  for (Eigen::Index i = 0; i < n; ++i)
    log_weight[i] = beta * std::log(std::max(energies[i], kPricingEnergyFloor));

  const double lo_bound = std::max(cfg.price_min, 1e-18 * cfg.price_budget);
  auto price_at = [&](double theta) {
    Vector p(n);
    for (Eigen::Index i = 0; i < n; ++i)
      p[i] = std::min(std::max(std::exp(theta + log_weight[i]), cfg.price_min),
                      cfg.price_max);
    return p;
  };

  double theta_lo = std::log(lo_bound) - log_weight.maxCoeff() - 4.0;
  double theta_hi = std::log(cfg.price_max) - log_weight.minCoeff() + 4.0;
  for (int k = 0; k < 160; ++k) {
    const double mid = 0.5 * (theta_lo + theta_hi);
    if (price_at(mid).sum() < cfg.price_budget)
      theta_lo = mid;
    else
      theta_hi = mid;
  }
  Vector p = price_at(theta_hi);

  // The bisection leaves only rounding dust in the budget; settle it on
  // coordinates with box room.
  double residual = cfg.price_budget - p.sum();
  for (Eigen::Index i = 0; i < n && residual != 0.0; ++i) {
    const double room =
        residual > 0.0 ? cfg.price_max - p[i] : cfg.price_min - p[i];
    const double give =
        residual > 0.0 ? std::min(residual, room) : std::max(residual, room);
    p[i] += give;
    residual -= give;
  }
  return p;
}

/// Projected-gradient minimizer of the purchasing cost over
/// {sum p = budget, price_min <= p <= price_max}; the independent numeric
/// route used to cross-check the closed form. Constant step 1/L with L the
/// largest curvature of the direct-cost term over the box. Stops when the
/// unit-step natural residual ||p - P(p - grad)||_inf drops below `tol`.
inline Vector numeric_prices(const Vector& energies, const GridConfig& cfg,
                             double tol, int max_iterations = 100000) {
  const Eigen::Index n = energies.size();
  validate(cfg, static_cast<int>(n));
  if (!(tol > 0.0)) throw ConfigError("numeric_prices: tol must be positive");

  const double r = cfg.cost_exponent;
  Vector p = project_price_simplex(
      uniform_vector(static_cast<int>(n), cfg.price_budget / double(n)),
      cfg.price_budget, cfg.price_min, cfg.price_max);

  const double e_max = energies.maxCoeff();
  if (e_max <= 0.0) return p;  // flat objective: any feasible point is optimal

  const double p_ref =
      r >= 2.0 ? cfg.price_max : std::max(cfg.price_min, 1e-6 * cfg.price_max);
  const double curvature = r * (r - 1.0) * e_max * std::pow(p_ref, r - 2.0);
  const double step = 1.0 / curvature;

  auto gradient = [&](const Vector& q) {
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i)
      g[i] = r * energies[i] * std::pow(q[i], r - 1.0) +
             cfg.linear_price_cost[i];
    return g;
  };

  for (int k = 0; k < max_iterations; ++k) {
    const Vector g = gradient(p);
    if (k % 16 == 0) {
      const Vector nat = p - project_price_simplex(p - g, cfg.price_budget,
                                                   cfg.price_min, cfg.price_max);
      if (nat.lpNorm<Eigen::Infinity>() <= tol) return p;
    }
    p = project_price_simplex(p - step * g, cfg.price_budget, cfg.price_min,
                              cfg.price_max);
  }
  const Vector g = gradient(p);
  const Vector nat = p - project_price_simplex(p - g, cfg.price_budget,
                                               cfg.price_min, cfg.price_max);
  if (nat.lpNorm<Eigen::Infinity>() <= tol) return p;
  throw PricingNonConvergence("numeric_prices: iteration cap exceeded");
}

/// Stationarity diagnostic: relative spread of r * e_n * p_n^(r-1) across
/// consumers. At an interior optimum with equal linear coefficients the
/// products coincide and the spread vanishes.
inline double price_product_check(const Vector& prices, const Vector& energies,
                                  double exponent) {
  if (prices.size() != energies.size())
    throw DimensionError("price_product_check: size mismatch");
  if (prices.size() == 0) return 0.0;
  Vector q(prices.size());
  for (Eigen::Index i = 0; i < prices.size(); ++i)
    q[i] = exponent * energies[i] * std::pow(prices[i], exponent - 1.0);
  const double mean = q.mean();
  if (mean == 0.0) return 0.0;
  return (q.array() - mean).abs().maxCoeff() / std::abs(mean);
}

}  // namespace emes
