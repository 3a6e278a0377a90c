#pragma once

#include <cmath>

#include "emes/types.hpp"

namespace emes {

/// Benefit a consumer draws from selling `supplied` kWh at unit price
/// `price`, out of `available` kWh, with reluctance constant `preference`:
///
///   price * supplied + (available - preference * supplied) * supplied
///
/// The first term is direct income; the second is concave in `supplied`
/// and models battery-wear pressure against excessive supply.
template <class Scalar>
constexpr Scalar utility(Scalar supplied, Scalar available, Scalar price,
                         Scalar preference) {
  return price * supplied + (available - preference * supplied) * supplied;
}

/// Supply level that maximizes the unconstrained utility:
/// (available + price) / (2 * preference).
template <class Scalar>
constexpr Scalar utility_peak(Scalar available, Scalar price, Scalar preference) {
  return (available + price) / (Scalar(2) * preference);
}

/// Joint objective of the consumers: the sum of individual utilities.
inline double total_utility(const Vector& energies,
                            const std::vector<ECParams>& params,
                            const Vector& prices) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (energies.size() != n || prices.size() != n)
    throw DimensionError("total_utility: vector sizes must match consumer count");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    sum += utility(energies[i], params[i].available_energy, prices[i],
                   params[i].preference);
  return sum;
}

/// Station-side cost of one purchase:
///   supplied * price^exponent + linear_coeff * price + fixed.
template <class Scalar>
Scalar individual_cost(Scalar price, Scalar supplied, Scalar exponent,
                       Scalar linear_coeff, Scalar fixed) {
  using std::pow;
  return supplied * pow(price, exponent) + linear_coeff * price + fixed;
}

/// Total purchasing cost: sum of individual costs.
inline double total_cost(const Vector& prices, const Vector& energies,
                         const GridConfig& cfg) {
  const Eigen::Index n = prices.size();
  if (energies.size() != n)
    throw DimensionError("total_cost: price and energy vectors must match");
  if (cfg.linear_price_cost.size() != n || cfg.fixed_cost.size() != n)
    throw DimensionError("total_cost: cost coefficients must match vector size");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    sum += individual_cost(prices[i], energies[i], cfg.cost_exponent,
                           cfg.linear_price_cost[i], cfg.fixed_cost[i]);
  return sum;
}

/// Diagnostic cost variant with explicit transmission and shortfall terms:
///   sum_n (e_n p_n^r + a_n p_n + beta_n e_n + b_n) + alpha (deficiency - sum e_n)
/// Never optimized over; with alpha = beta_n = 0 it equals total_cost, and
/// with beta_n = alpha it equals total_cost + alpha * deficiency.
inline double general_cost(const Vector& prices, const Vector& energies,
                           const GridConfig& cfg) {
  const Eigen::Index n = prices.size();
  if (energies.size() != n)
    throw DimensionError("general_cost: price and energy vectors must match");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double beta =
        cfg.transmission_weight.size() == n ? cfg.transmission_weight[i] : 0.0;
    sum += energies[i] * std::pow(prices[i], cfg.cost_exponent) +
           cfg.linear_price_cost[i] * prices[i] + beta * energies[i] +
           cfg.fixed_cost[i];
  }
  sum += cfg.shortfall_weight * (cfg.deficiency - energies.sum());
  return sum;
}

/// Feasibility of an energy vector: 0 <= e_n <= available_n for every n and
/// sum e_n <= deficiency, with a small relative slack for rounding.
inline bool energy_feasible(const Vector& energies,
                            const std::vector<ECParams>& params,
                            double deficiency, double rel_tol = 1e-9) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (energies.size() != n) return false;
  const double slack = rel_tol * std::max(1.0, deficiency);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (energies[i] < -slack) return false;
    if (energies[i] > params[i].available_energy + slack) return false;
  }
  return energies.sum() <= deficiency + slack;
}

/// Feasibility of a price vector: per-entry bounds and the budget identity
/// |sum p_n - budget| <= 1e-9 * budget.
inline bool price_feasible(const Vector& prices, const GridConfig& cfg,
                           double rel_tol = 1e-9) {
  const double slack = rel_tol * std::max(1.0, cfg.price_budget);
  for (Eigen::Index i = 0; i < prices.size(); ++i) {
    if (prices[i] < cfg.price_min - slack) return false;
    if (prices[i] > cfg.price_max + slack) return false;
  }
  return std::abs(prices.sum() - cfg.price_budget) <= 1e-9 * cfg.price_budget;
}

}  // namespace emes
