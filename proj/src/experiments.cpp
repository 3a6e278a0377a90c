#include "emes/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "emes/model.hpp"
#include "emes/rng.hpp"

namespace emes {

namespace {

/// Order-independent pairwise summation.
double pairwise_sum(const std::vector<double>& v, std::size_t lo,
                    std::size_t hi) {
  if (hi - lo <= 8) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i];
    return s;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

Stat aggregate(const std::vector<double>& samples) {
  Stat s;
  const std::size_t n = samples.size();
  if (n == 0) return s;
  s.mean = pairwise_sum(samples, 0, n) / double(n);
  if (n > 1) {
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = samples[i] - s.mean;
      sq[i] = d * d;
    }
    s.stddev = std::sqrt(pairwise_sum(sq, 0, n) / double(n - 1));
  }
  return s;
}

std::vector<SweepPoint> sweep_points(const ScenarioSpec& spec) {
  std::vector<SweepPoint> points;
  for (int n : spec.n_values)
    for (double e_def : spec.e_def_values)
      for (double p : spec.p_values)
        for (const auto& rule : spec.p_max_values)
          points.push_back({n, e_def, p, rule.resolve(p)});
  return points;
}

void format_row(std::ostream& os, const PointStats& ps) {
  char buf[512];
  std::snprintf(
      buf, sizeof(buf),
      "%d,%.12g,%.12g,%.12g,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,"
      "%.12g,%.12g,%.12g,%.12g,%.12g\n",
      ps.point.n, ps.point.e_def, ps.point.p_budget, ps.point.p_max,
      ps.replicates, ps.ec_utility.mean, ps.ec_utility.stddev,
      ps.total_cost.mean, ps.total_cost.stddev, ps.outer_iterations.mean,
      ps.outer_iterations.stddev, ps.price_spread.mean, ps.price_spread.stddev,
      ps.fit_ec_utility.mean, ps.fit_ec_utility.stddev,
      ps.fit_total_cost.mean, ps.fit_total_cost.stddev);
  os << buf;
}

}  // namespace

void validate(const ScenarioSpec& spec) {
  if (spec.replicates < 1) throw ConfigError("scenario: replicates must be >= 1");
  if (!(spec.e_n_low > 0.0 && spec.e_n_low < spec.e_n_high))
    throw ConfigError("scenario: require 0 < e_n_low < e_n_high");
  if (!(spec.r > 1.0)) throw ConfigError("scenario: r must exceed 1");
  if (!(spec.c_n > 0.0)) throw ConfigError("scenario: c_n must be positive");
  if (spec.a_n < 0.0 || spec.b_n < 0.0)
    throw ConfigError("scenario: a_n and b_n must be non-negative");
  if (spec.p_min < 0.0) throw ConfigError("scenario: p_min must be non-negative");
  if (spec.n_values.empty() || spec.e_def_values.empty() ||
      spec.p_values.empty() || spec.p_max_values.empty())
    throw ConfigError("scenario: every sweep axis needs at least one value");
  if (!spec.fit_tariff.budget_share && spec.fit_tariff.value < 0.0)
    throw ConfigError("scenario: fit_tariff must be non-negative");
  for (const auto& point : sweep_points(spec)) {
    if (point.n < 1) throw ConfigError("scenario: n must be >= 1");
    validate(make_grid_config(spec, point), point.n);
  }
}

FitResult fit_baseline(const std::vector<ECParams>& params,
                       const GridConfig& cfg, double tariff,
                       FitDispatch dispatch) {
  validate(params);
  if (tariff < 0.0) throw ConfigError("fit_baseline: tariff must be non-negative");
  const auto n = static_cast<Eigen::Index>(params.size());

  FitResult out;
  out.energies = Vector::Zero(n);
  double capacity = 0.0;
  for (const auto& ec : params) capacity += ec.available_energy;
  out.shortfall = capacity < cfg.deficiency;

  if (dispatch == FitDispatch::AscendingId) {
    double remaining = cfg.deficiency;
    for (Eigen::Index i = 0; i < n; ++i) {
      out.energies[i] = std::min(params[i].available_energy, remaining);
      remaining -= out.energies[i];
    }
  } else {
    const double scale = std::min(1.0, cfg.deficiency / capacity);
    for (Eigen::Index i = 0; i < n; ++i)
      out.energies[i] = params[i].available_energy * scale;
  }

  out.utilities.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.utilities[i] = utility(out.energies[i], params[i].available_energy,
                               tariff, params[i].preference);
  out.total_cost = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    out.total_cost +=
        individual_cost(tariff, out.energies[i], cfg.cost_exponent,
                        cfg.linear_price_cost[i], cfg.fixed_cost[i]);
  return out;
}

std::vector<ECParams> draw_consumers(std::uint64_t stream_seed, int n,
                                     double low, double high,
                                     double preference) {
  SplitMix64 rng(stream_seed);
  std::vector<ECParams> params(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    params[static_cast<std::size_t>(i)] = {i, rng.uniform(low, high),
                                           preference};
  }
  return params;
}

GridConfig make_grid_config(const ScenarioSpec& spec, const SweepPoint& point) {
  GridConfig cfg;
  cfg.deficiency = point.e_def;
  // The station owes every consumer at least the minimum price, so when
  // n * p_min exceeds the nominal budget the budget expands to cover the
  // mandatory minimum payments.
  cfg.price_budget = std::max(point.p_budget, point.n * spec.p_min);
  cfg.price_min = spec.p_min;
  cfg.price_max = point.p_max;
  cfg.cost_exponent = spec.r;
  cfg.linear_price_cost = uniform_vector(point.n, spec.a_n);
  cfg.fixed_cost = uniform_vector(point.n, spec.b_n);
  return cfg;
}

AggregateStats monte_carlo(const ScenarioSpec& spec,
                           const SshpmConfig& solver_cfg,
                           const EngineOptions& options) {
  validate(spec);
  AggregateStats stats;
  for (const auto& point : sweep_points(spec)) {
    const GridConfig cfg = make_grid_config(spec, point);
    const double tariff = spec.fit_tariff.resolve(point.p_budget, point.n);

    std::vector<double> v_util, v_cost, v_iter, v_spread, v_fit_util,
        v_fit_cost;
    v_util.reserve(spec.replicates);
    v_cost.reserve(spec.replicates);
    v_iter.reserve(spec.replicates);
    v_spread.reserve(spec.replicates);
    v_fit_util.reserve(spec.replicates);
    v_fit_cost.reserve(spec.replicates);

    for (int rep = 0; rep < spec.replicates; ++rep) {
      const std::uint64_t stream =
          spec.seed ^ static_cast<std::uint64_t>(rep);
      const auto params = draw_consumers(stream, point.n, spec.e_n_low,
                                         spec.e_n_high, spec.c_n);
      try {
        const EmesResult res = run_emes(params, cfg, solver_cfg, options);
        const FitResult fit =
            fit_baseline(params, cfg, tariff, spec.fit_dispatch);
        v_util.push_back(res.utilities.mean());
        v_cost.push_back(res.total_cost);
        v_iter.push_back(double(res.outer_iterations));
        v_spread.push_back(res.prices.maxCoeff() - res.prices.minCoeff());
        v_fit_util.push_back(fit.utilities.mean());
        v_fit_cost.push_back(fit.total_cost);
      } catch (const std::exception& err) {
        throw ReplicateError(std::string("replicate failed: ") + err.what(),
                             point, rep, stream);
      }
    }

    PointStats ps;
    ps.point = point;
    ps.replicates = spec.replicates;
    ps.ec_utility = aggregate(v_util);
    ps.total_cost = aggregate(v_cost);
    ps.outer_iterations = aggregate(v_iter);
    ps.price_spread = aggregate(v_spread);
    ps.fit_ec_utility = aggregate(v_fit_util);
    ps.fit_total_cost = aggregate(v_fit_cost);
    stats.push_back(ps);
  }
  return stats;
}

std::array<ScenarioSpec, 4> figure_scenarios() {
  std::array<ScenarioSpec, 4> specs;

  // Single-run convergence trace.
  specs[0].replicates = 1;
  specs[0].seed = 7;

  // Effect of the consumer count and the deficiency.
  specs[1].n_values = {5, 10, 15, 20, 25};
  specs[1].e_def_values = {400.0, 500.0, 600.0, 700.0};

  // Effect of the price cap, for several budgets.
  specs[2].p_values = {135.0, 185.0, 235.0};
  specs[2].p_max_values.clear();
  for (int k = 0; k < 20; ++k)
    specs[2].p_max_values.push_back(
        {true, 0.2 + 0.8 * double(k) / 19.0});  // from P/N (N = 5) to P

  // Baseline comparison across consumer counts and budgets, tariff 60.
  specs[3].n_values = {5, 10, 15, 20, 25};
  specs[3].p_values = {135.0, 160.0, 185.0, 210.0, 235.0};
  specs[3].fit_tariff = {false, 60.0};

  return specs;
}

void write_stats_csv(std::ostream& os, const AggregateStats& stats) {
  os << "n,e_def,p_budget,p_max,replicates,ec_utility_mean,ec_utility_std,"
        "total_cost_mean,total_cost_std,outer_iterations_mean,"
        "outer_iterations_std,price_spread_mean,price_spread_std,"
        "fit_ec_utility_mean,fit_ec_utility_std,fit_total_cost_mean,"
        "fit_total_cost_std\n";
  for (const auto& ps : stats) format_row(os, ps);
}

void write_figure_datasets(const std::string& dir, int replicates_override,
                           std::uint64_t seed_override) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto specs = figure_scenarios();
  for (auto& spec : specs) {
    if (replicates_override > 0 && spec.replicates > 1)
      spec.replicates = replicates_override;
    if (seed_override != 0) spec.seed = seed_override;
  }

  {  // Convergence trace of a single run.
    const auto& spec = specs[0];
    const SweepPoint point{spec.n_values[0], spec.e_def_values[0],
                           spec.p_values[0],
                           spec.p_max_values[0].resolve(spec.p_values[0])};
    const auto params = draw_consumers(spec.seed, point.n, spec.e_n_low,
                                       spec.e_n_high, spec.c_n);
    const EmesResult res = run_emes(params, make_grid_config(spec, point));
    std::ofstream os(fs::path(dir) / "convergence.csv");
    write_trace_csv(os, res, params);
  }

  {  // Utility vs deficiency (small consumer counts) and cost vs count.
    const AggregateStats stats = monte_carlo(specs[1]);
    std::ofstream util(fs::path(dir) / "utility_vs_deficiency.csv");
    std::ofstream cost(fs::path(dir) / "cost_vs_n.csv");
    AggregateStats util_rows, cost_rows;
    for (const auto& ps : stats) {
      if (ps.point.n <= 15) util_rows.push_back(ps);
      if (ps.point.e_def == 700.0) cost_rows.push_back(ps);
    }
    write_stats_csv(util, util_rows);
    write_stats_csv(cost, cost_rows);
  }

  {  // Cost vs price cap.
    const AggregateStats stats = monte_carlo(specs[2]);
    std::ofstream os(fs::path(dir) / "cost_vs_pmax.csv");
    write_stats_csv(os, stats);
  }

  {  // Baseline comparison: utilities at the default budget across N.
    ScenarioSpec util_spec = specs[3];
    util_spec.p_values = {185.0};
    const AggregateStats util_stats = monte_carlo(util_spec);
    std::ofstream util(fs::path(dir) / "utility_comparison.csv");
    write_stats_csv(util, util_stats);

    // Costs across the budget at N = 5, with the baseline paying the same
    // total unit price (tariff = P/N) so both schemes spend comparably.
    ScenarioSpec cost_spec = specs[3];
    cost_spec.n_values = {5};
    cost_spec.fit_tariff = {true, 0.0};
    const AggregateStats cost_stats = monte_carlo(cost_spec);
    std::ofstream cost(fs::path(dir) / "cost_comparison.csv");
    write_stats_csv(cost, cost_stats);
  }
}

}  // namespace emes
