#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "emes/engine.hpp"
#include "emes/experiments.hpp"
#include "emes/model.hpp"
#include "emes/rng.hpp"

namespace {

namespace fs = std::filesystem;
using namespace emes;

int cmd_run(int n, double e_def, double p_budget, double p_min,
            double p_max_frac, double r, double c, double a, double b,
            double e_low, double e_high, std::uint64_t seed,
            const std::string& trace_path, bool verify) {
  ScenarioSpec spec;
  spec.seed = seed;
  spec.replicates = 1;
  spec.n_values = {n};
  spec.e_def_values = {e_def};
  spec.p_values = {p_budget};
  spec.p_min = p_min;
  spec.p_max_values = {{true, p_max_frac}};
  spec.r = r;
  spec.c_n = c;
  spec.a_n = a;
  spec.b_n = b;
  spec.e_n_low = e_low;
  spec.e_n_high = e_high;

  const SweepPoint point{n, e_def, p_budget, p_max_frac * p_budget};
  const GridConfig cfg = make_grid_config(spec, point);
  const auto params = draw_consumers(seed, n, e_low, e_high, c);

  const EmesResult res = run_emes(params, cfg);

  std::printf("equilibrium after %d outer iterations (%llu messages)%s\n",
              res.outer_iterations,
              static_cast<unsigned long long>(res.message_count),
              res.two_cycle ? " [period-2 price cycle, cheaper phase kept]"
                            : "");
  std::printf("%4s %12s %12s %12s %12s %12s\n", "ec", "available", "energy",
              "price", "slack", "utility");
  for (int i = 0; i < n; ++i)
    std::printf("%4d %12.4f %12.4f %12.4f %12.4f %12.2f\n", params[i].id,
                params[i].available_energy, res.energies[i], res.prices[i],
                res.slacks[i], res.utilities[i]);
  std::printf("supplied %.4f / %.4f kWh, station cost %.2f\n",
              res.energies.sum(), cfg.deficiency, res.total_cost);

  if (!trace_path.empty()) {
    std::ofstream os(trace_path);
    if (!os) {
      std::fprintf(stderr, "cannot open %s\n", trace_path.c_str());
      return 1;
    }
    write_trace_csv(os, res, params);
    std::printf("trace written to %s\n", trace_path.c_str());
  }
  if (verify) {
    const VerificationReport rep = verify_emes(res, params, cfg);
    std::printf("stability: followers %s (worst gain %.3g), leader %s "
                "(worst drop %.3g)\n",
                rep.follower_ok ? "ok" : "VIOLATED", rep.worst_follower_gain,
                rep.leader_ok ? "ok" : "VIOLATED", rep.worst_leader_drop);
    return rep.follower_ok && rep.leader_ok ? 0 : 1;
  }
  return 0;
}

int cmd_sweep(const std::string& scenario_path, std::uint64_t seed,
              int replicates, const std::string& out_dir) {
  ScenarioSpec spec = load_scenario(scenario_path);
  if (seed != 0) spec.seed = seed;
  if (replicates > 0) spec.replicates = replicates;
  const AggregateStats stats = monte_carlo(spec);
  fs::create_directories(out_dir);
  const fs::path out = fs::path(out_dir) / "sweep.csv";
  std::ofstream os(out);
  if (!os) {
    std::fprintf(stderr, "cannot open %s\n", out.string().c_str());
    return 1;
  }
  write_stats_csv(os, stats);
  std::printf("%zu sweep points x %d replicates -> %s\n", stats.size(),
              spec.replicates, out.string().c_str());
  return 0;
}

int cmd_figures(const std::string& out_dir, int replicates,
                std::uint64_t seed) {
  write_figure_datasets(out_dir, replicates, seed);
  std::printf("figure datasets written to %s\n", out_dir.c_str());
  return 0;
}

bool report(const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %s%s%s\n", pass ? "PASS" : "FAIL", name,
              detail.empty() ? "" : ": ", detail.c_str());
  return pass;
}

int cmd_verify(std::uint64_t seed) {
  bool all = true;
  SplitMix64 rng(seed);
  char buf[160];

  {  // Solver agrees with the independent multiplier-bisection solution.
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
      const int n = rng.uniform_int(2, 10);
      const auto params =
          draw_consumers(rng.next(), n, 64.0, 240.0, 0.5);
      const double deficiency = 700.0;
      Vector raw(n);
      for (int i = 0; i < n; ++i) raw[i] = rng.uniform(0.0, 1.0);
      const Vector prices =
          project_price_simplex(raw * 185.0, 185.0, 8.45, 185.0);
      const Vector a = sshpm_solve(prices, params, deficiency).energies;
      const Vector b = ve_oracle(prices, params, deficiency);
      worst = std::max(worst, (a - b).lpNorm<Eigen::Infinity>() / deficiency);
    }
    std::snprintf(buf, sizeof(buf), "max relative gap %.3g", worst);
    all &= report("solver vs bisection oracle (200 instances)", worst <= 1e-5,
                  buf);
  }

  {  // Closed-form prices agree with the projected-gradient minimizer.
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const int n = rng.uniform_int(2, 8);
      Vector e(n);
      for (int i = 0; i < n; ++i) e[i] = rng.uniform(20.0, 240.0);
      GridConfig cfg;
      cfg.deficiency = 700.0;
      cfg.price_budget = 185.0;
      cfg.price_min = rng.uniform(0.0, 10.0);
      cfg.price_max = rng.uniform(185.0 / n * 1.2, 185.0);
      cfg.cost_exponent = 2.0;
      cfg.linear_price_cost = uniform_vector(n, 1.0);
      cfg.fixed_cost = uniform_vector(n, 1.0);
      if (n * cfg.price_min > cfg.price_budget ||
          n * cfg.price_max < cfg.price_budget)
        continue;
      const Vector pc = closed_form_prices(e, cfg);
      const Vector pn = numeric_prices(e, cfg, 1e-9 * cfg.price_budget);
      worst = std::max(worst, (pc - pn).lpNorm<Eigen::Infinity>() /
                                  cfg.price_budget);
    }
    std::snprintf(buf, sizeof(buf), "max relative gap %.3g", worst);
    all &= report("closed-form vs numeric prices (100 instances)",
                  worst <= 1e-5, buf);
  }

  {  // Equilibrium stability on full runs.
    bool ok = true;
    for (int k = 0; k < 20 && ok; ++k) {
      ScenarioSpec spec;
      const SweepPoint point{5, 700.0, 185.0, 185.0};
      const auto params = draw_consumers(rng.next(), 5, 64.0, 240.0, 0.5);
      const GridConfig cfg = make_grid_config(spec, point);
      const EmesResult res = run_emes(params, cfg);
      const VerificationReport rep = verify_emes(res, params, cfg, rng.next());
      ok = rep.follower_ok && rep.leader_ok;
    }
    all &= report("equilibrium stability (20 random runs)", ok, "");
  }

  {  // Produced vectors keep their feasibility invariants.
    bool ok = true;
    for (int k = 0; k < 10000 && ok; ++k) {
      const int n = rng.uniform_int(1, 8);
      const auto params = draw_consumers(rng.next(), n, 64.0, 240.0,
                                         rng.uniform(0.2, 1.5));
      const double deficiency = rng.uniform(50.0, 1500.0);
      const Vector caps = available_energies(params);
      Vector x(n);
      for (int i = 0; i < n; ++i) x[i] = rng.uniform(-100.0, 400.0);
      ok = ok && energy_feasible(project_box_budget(x, caps, deficiency),
                                 params, deficiency);
      Vector prices(n);
      for (int i = 0; i < n; ++i) prices[i] = rng.uniform(0.0, 60.0);
      ok = ok && energy_feasible(
                     ve_oracle(prices.cwiseMax(1.0), params, deficiency),
                     params, deficiency);
      GridConfig cfg;
      cfg.deficiency = deficiency;
      cfg.price_budget = 185.0;
      cfg.price_min = 0.0;
      cfg.price_max = 185.0;
      cfg.cost_exponent = 2.0;
      cfg.linear_price_cost = uniform_vector(n, 1.0);
      cfg.fixed_cost = uniform_vector(n, 1.0);
      Vector e(n);
      for (int i = 0; i < n; ++i) e[i] = rng.uniform(0.0, caps[i]);
      ok = ok && price_feasible(closed_form_prices(e, cfg), cfg);
    }
    all &= report("invariant fuzz (10000 operations)", ok, "");
  }

  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stackelberg energy-trading engine: consumers sell surplus "
               "energy to a station under discriminate unit pricing"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "solve one market instance and "
                                        "print/trace the equilibrium");
  int n = 5;
  double e_def = 700.0, p_budget = 185.0, p_min = 8.45, p_max_frac = 1.0;
  double r = 2.0, c = 0.5, a = 1.0, b = 1.0, e_low = 64.0, e_high = 240.0;
  std::uint64_t seed = 1;
  std::string trace_path;
  bool verify_flag = false;
  run->add_option("--n", n, "number of consumers");
  run->add_option("--e-def", e_def, "energy deficiency, kWh");
  run->add_option("--p", p_budget, "total unit-price budget, cents/kWh");
  run->add_option("--p-min", p_min, "minimum unit price");
  run->add_option("--p-max-frac", p_max_frac,
                  "price cap as a fraction of the budget");
  run->add_option("--r", r, "cost exponent (> 1)");
  run->add_option("--c", c, "consumer preference constant");
  run->add_option("--a", a, "linear price cost coefficient");
  run->add_option("--b", b, "fixed cost per consumer");
  run->add_option("--e-low", e_low, "lower bound of the capacity draw");
  run->add_option("--e-high", e_high, "upper bound of the capacity draw");
  run->add_option("--seed", seed, "capacity draw seed");
  run->add_option("--trace", trace_path, "write the iteration trace CSV here");
  run->add_flag("--verify", verify_flag, "check equilibrium stability");

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep", "run a scenario file and write aggregate statistics");
  std::string scenario_path, out_dir = ".";
  std::uint64_t sweep_seed = 0;
  int sweep_replicates = 0;
  sweep->add_option("--scenario", scenario_path, "scenario file")->required();
  sweep->add_option("--seed", sweep_seed, "override the scenario seed");
  sweep->add_option("--replicates", sweep_replicates,
                    "override the replicate count");
  sweep->add_option("--out", out_dir, "output directory");

  // figures
  auto* figures = app.add_subcommand(
      "figures", "emit the built-in experiment datasets as CSV");
  std::string fig_dir = "figures-out";
  int fig_replicates = 0;
  std::uint64_t fig_seed = 0;
  figures->add_option("--out", fig_dir, "output directory");
  figures->add_option("--replicates", fig_replicates,
                      "override the replicate count");
  figures->add_option("--seed", fig_seed, "override the scenario seeds");

  // verify
  auto* verify = app.add_subcommand(
      "verify", "run the oracle and invariant verification suites");
  std::uint64_t verify_seed = 2024;
  verify->add_option("--seed", verify_seed, "suite seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(n, e_def, p_budget, p_min, p_max_frac, r, c, a, b, e_low,
                     e_high, seed, trace_path, verify_flag);
    if (sweep->parsed())
      return cmd_sweep(scenario_path, sweep_seed, sweep_replicates, out_dir);
    if (figures->parsed()) return cmd_figures(fig_dir, fig_replicates, fig_seed);
    if (verify->parsed()) return cmd_verify(verify_seed);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
