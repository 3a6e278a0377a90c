#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "emes/engine.hpp"
#include "emes/types.hpp"

namespace emes {

enum class FitDispatch { AscendingId, Proportional };

/// Reproducible experiment description. The sweep runs the cartesian
/// product of n_values x e_def_values x p_values x p_max_values; replicate
/// i of every point draws its consumer energies from the SplitMix64 stream
/// seeded with `seed ^ i`, so points share common random numbers.
struct ScenarioSpec {
  std::uint64_t seed = 1;
  int replicates = 1000;
  std::vector<int> n_values{5};
  std::vector<double> e_def_values{700.0};
  std::vector<double> p_values{185.0};
  double p_min = 8.45;

  /// Price-cap rule: an absolute cap, or a fraction of the budget P.
  struct PMaxRule {
    bool fraction_of_budget = true;
    double value = 1.0;
    double resolve(double budget) const {
      return fraction_of_budget ? value * budget : value;
    }
  };
  std::vector<PMaxRule> p_max_values{PMaxRule{}};

  double r = 2.0;
  double c_n = 0.5;
  double a_n = 1.0;
  double b_n = 1.0;
  double e_n_low = 64.0;
  double e_n_high = 240.0;

  /// Baseline tariff: an absolute value, or the equal budget share P/N.
  struct TariffRule {
    bool budget_share = false;
    double value = 60.0;
    double resolve(double budget, int n) const {
      return budget_share ? budget / double(n) : value;
    }
  };
  TariffRule fit_tariff;
  FitDispatch fit_dispatch = FitDispatch::AscendingId;
};

void validate(const ScenarioSpec& spec);

/// Parse `key = value` lines (comments with '#', lists comma-separated).
/// Unknown keys are rejected. Values of p_max_values may use the forms
/// `0.4P` / `P` for budget fractions; fit_tariff accepts `P/N`.
ScenarioSpec parse_scenario(std::istream& is);
ScenarioSpec load_scenario(const std::string& path);

struct SweepPoint {
  int n = 0;
  double e_def = 0.0;
  double p_budget = 0.0;
  double p_max = 0.0;
};

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
};

struct PointStats {
  SweepPoint point;
  int replicates = 0;
  Stat ec_utility;       // per-consumer mean utility of the proposed scheme
  Stat total_cost;       // station cost of the proposed scheme
  Stat outer_iterations;
  Stat price_spread;     // max price - min price at equilibrium
  Stat fit_ec_utility;   // per-consumer mean utility under the baseline
  Stat fit_total_cost;   // station cost under the baseline
};

using AggregateStats = std::vector<PointStats>;

class ReplicateError : public std::runtime_error {
 public:
  ReplicateError(const std::string& what, SweepPoint point, int replicate,
                 std::uint64_t stream_seed)
      : std::runtime_error(what),
        point(point),
        replicate(replicate),
        stream_seed(stream_seed) {}
  SweepPoint point;
  int replicate = 0;
  std::uint64_t stream_seed = 0;
};

/// Flat-tariff baseline: consumers supply under fixed contracts at one
/// uniform unit price. Dispatch fills the deficiency in ascending id order
/// (or proportionally to capacity), utilities and cost are evaluated with
/// the same utility/cost models at the tariff. `shortfall` flags a slot in
/// which the contracted capacity cannot cover the deficiency.
struct FitResult {
  Vector energies;
  Vector utilities;
  double total_cost = 0.0;
  bool shortfall = false;
};

FitResult fit_baseline(const std::vector<ECParams>& params,
                       const GridConfig& cfg, double tariff,
                       FitDispatch dispatch = FitDispatch::AscendingId);

/// Draw one replicate's consumer parameters from the given stream seed.
std::vector<ECParams> draw_consumers(std::uint64_t stream_seed, int n,
                                     double low, double high,
                                     double preference);

/// Grid configuration for one sweep point. When n * p_min exceeds the
/// nominal budget the station still owes every consumer the minimum price,
/// so the effective budget expands to n * p_min.
GridConfig make_grid_config(const ScenarioSpec& spec, const SweepPoint& point);

/// Run the full sweep: every point, every replicate, proposed scheme plus
/// baseline, aggregated with pairwise summation. Deterministic given the
/// seed; any replicate failure aborts with the replicate's stream seed.
AggregateStats monte_carlo(const ScenarioSpec& spec,
                           const SshpmConfig& solver_cfg = {},
                           const EngineOptions& options = {});

/// The four built-in experiment descriptions:
///   0: single-run convergence trace (N = 5);
///   1: sweep of N and deficiency;
///   2: sweep of the price cap from P/N to P for several budgets;
///   3: baseline comparison sweeping N (utilities, tariff 60) and the
///      budget (costs, tariff P/N).
std::array<ScenarioSpec, 4> figure_scenarios();

void write_stats_csv(std::ostream& os, const AggregateStats& stats);

/// Emit the four figure datasets as CSV files under `dir`:
/// convergence.csv, utility_vs_deficiency.csv, cost_vs_n.csv,
/// cost_vs_pmax.csv, utility_comparison.csv, cost_comparison.csv.
void write_figure_datasets(const std::string& dir, int replicates_override = 0,
                           std::uint64_t seed_override = 0);

}  // namespace emes
