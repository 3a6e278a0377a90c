#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace emes {

using Vector = Eigen::VectorXd;

/// Raised when two vectors that must be index-aligned have different sizes.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a configuration violates its feasibility preconditions.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// One consumer's private parameters: the energy it has available for sale
/// in the current time slot and its supply-reluctance constant. A larger
/// preference value makes the marginal benefit of selling fall off faster.
struct ECParams {
  int id = 0;
  double available_energy = 0.0;  // kWh
  double preference = 0.0;        // dimensionless, > 0
};

/// Station-side and global market parameters for one time slot.
///
/// Unit prices are in cents/kWh. `price_budget` is the total of all unit
/// prices the station distributes across consumers; `cost_exponent` (> 1)
/// weights the direct purchase term of the cost and controls how strongly
/// prices discriminate between large and small sellers. `shortfall_weight`
/// and `transmission_weight` only enter the diagnostic cost variant.
struct GridConfig {
  double deficiency = 0.0;    // kWh the station wants to buy
  double price_budget = 0.0;  // sum of unit prices, cents/kWh
  double price_min = 0.0;
  double price_max = 0.0;
  double cost_exponent = 2.0;    // r > 1
  Vector linear_price_cost;      // a_n >= 0, one per consumer
  Vector fixed_cost;             // b_n >= 0, one per consumer
  double shortfall_weight = 0.0; // alpha >= 0
  Vector transmission_weight;    // beta_n >= 0
};

inline void validate(const ECParams& ec) {
  if (!(ec.available_energy > 0.0))
    throw ConfigError("consumer " + std::to_string(ec.id) +
                      ": available_energy must be positive");
  if (!(ec.preference > 0.0))
    throw ConfigError("consumer " + std::to_string(ec.id) +
                      ": preference must be positive");
}

inline void validate(const std::vector<ECParams>& params) {
  if (params.empty()) throw ConfigError("at least one consumer is required");
  for (const auto& ec : params) validate(ec);
}

inline void validate(const GridConfig& cfg, int n_consumers) {
  if (n_consumers < 1) throw ConfigError("need at least one consumer");
  if (!(cfg.deficiency > 0.0)) throw ConfigError("deficiency must be positive");
  if (!(cfg.cost_exponent > 1.0))
    throw ConfigError("cost_exponent must exceed 1");
  if (cfg.price_min < 0.0 || cfg.price_min > cfg.price_max)
    throw ConfigError("require 0 <= price_min <= price_max");
  if (cfg.price_max > cfg.price_budget * (1.0 + 1e-12))
    throw ConfigError("price_max must not exceed the price budget");
  const double slack = 1e-9 * cfg.price_budget;
  if (n_consumers * cfg.price_min > cfg.price_budget + slack ||
      n_consumers * cfg.price_max < cfg.price_budget - slack)
    throw ConfigError("price budget is infeasible for the price bounds");
  auto check_coeff = [&](const Vector& v, const char* name) {
    if (v.size() != n_consumers)
      throw DimensionError(std::string(name) + " must have one entry per consumer");
    if ((v.array() < 0.0).any())
      throw ConfigError(std::string(name) + " entries must be non-negative");
  };
  check_coeff(cfg.linear_price_cost, "linear_price_cost");
  check_coeff(cfg.fixed_cost, "fixed_cost");
  if (cfg.transmission_weight.size() != 0)
    check_coeff(cfg.transmission_weight, "transmission_weight");
  if (cfg.shortfall_weight < 0.0)
    throw ConfigError("shortfall_weight must be non-negative");
}

inline Vector available_energies(const std::vector<ECParams>& params) {
  Vector e(static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) e[static_cast<Eigen::Index>(i)] = params[i].available_energy;
  return e;
}

inline Vector preferences(const std::vector<ECParams>& params) {
  Vector c(static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) c[static_cast<Eigen::Index>(i)] = params[i].preference;
  return c;
}

inline Vector uniform_vector(int n, double value) {
  return Vector::Constant(n, value);
}

}  // namespace emes
