#include "emes/engine.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <ostream>

#include "emes/model.hpp"
#include "emes/rng.hpp"

namespace emes {

namespace {

Vector assemble_caps(const std::vector<EcAgent>& agents) {
  Vector caps(static_cast<Eigen::Index>(agents.size()));
  for (std::size_t i = 0; i < agents.size(); ++i)
    caps[static_cast<Eigen::Index>(i)] = agents[i].capacity();
  return caps;
}

double registered_curvature(const std::vector<EcAgent>& agents) {
  double max_slope = 0.0;
  for (const auto& a : agents) max_slope = std::max(max_slope, a.curvature_bound());
  return max_slope;
}

OuterIterate snapshot(int iteration, const Vector& energies,
                      const Vector& prices,
                      const std::vector<ECParams>& params,
                      const GridConfig& cfg) {
  OuterIterate it;
  it.iteration = iteration;
  it.energies = energies;
  it.prices = prices;
  it.slacks = slack_vector(energies, params, prices);
  it.utilities.resize(energies.size());
  for (Eigen::Index i = 0; i < energies.size(); ++i)
    it.utilities[i] = utility(energies[i], params[i].available_energy,
                              prices[i], params[i].preference);
  it.total_cost = total_cost(prices, energies, cfg);
  return it;
}

}  // namespace

SolveResult gnep_mediated(const Vector& prices, std::vector<EcAgent>& agents,
                          double deficiency, const SshpmConfig& solver_cfg,
                          MessageLog* log) {
  const auto n = static_cast<Eigen::Index>(agents.size());
  if (prices.size() != n) throw DimensionError("gnep_mediated: size mismatch");
  for (Eigen::Index i = 0; i < n; ++i) agents[i].receive_price(prices[i]);

  const Vector caps = assemble_caps(agents);
  const double curvature = registered_curvature(agents);
  const double gamma =
      solver_cfg.step_scale ? *solver_cfg.step_scale : 1.0 / curvature;

  auto op = [&agents, n](const Vector& e) {
    Vector f(n);
    for (Eigen::Index i = 0; i < n; ++i)
      f[i] = agents[i].operator_value(e[i]);
    return f;
  };
  auto slacks = [&agents, n](const Vector& e) {
    Vector xi(n);
    for (Eigen::Index i = 0; i < n; ++i) xi[i] = agents[i].slack(e[i]);
    return xi;
  };

  IterationHook hook;
  if (log) {
    hook = [log, &agents, n](int, const Vector& e, const Vector& xi,
                             bool converged) {
      for (Eigen::Index i = 0; i < n; ++i)
        log->post(agents[i].id(), kCps, Offer{agents[i].id(), e[i]});
      for (Eigen::Index i = 0; i < n; ++i)
        log->post(agents[i].id(), kCps, SlackReport{agents[i].id(), xi[i]});
      if (converged)
        log->post(kCps, kBroadcast, Converged{});
      else
        log->post(kCps, kBroadcast, ContinueIteration{});
    };
  }
  return sshpm_iterate(op, slacks, caps, deficiency, gamma, curvature,
                       solver_cfg, hook);
}

EmesResult run_emes(const std::vector<ECParams>& params, const GridConfig& cfg,
                    const SshpmConfig& solver_cfg,
                    const EngineOptions& options) {
  validate(params);
  const int n = static_cast<int>(params.size());
  validate(cfg, n);
  validate(solver_cfg);

  MessageLog log(options.record_messages);
  std::vector<EcAgent> agents;
  agents.reserve(params.size());
  for (const auto& ec : params) agents.emplace_back(ec);

  log.post(kCps, kBroadcast, Announce{cfg.deficiency, cfg.price_budget});

  EmesResult result;
  const double fp_tol = options.fixed_point_tol * cfg.price_budget;

  // Step 1: every consumer assumes the equal share of the budget.
  Vector prices = uniform_vector(n, cfg.price_budget / double(n));
  SolveResult phase = gnep_mediated(prices, agents, cfg.deficiency, solver_cfg,
                                    &log);
  result.phase_traces.push_back(std::move(phase.trace));
  Vector energies = phase.energies;
  result.outer_trace.push_back(snapshot(0, energies, prices, params, cfg));

  Vector prev_prices = prices;
  bool have_prev = false;
  bool converged = false;

  for (int t = 1; t <= options.outer_cap; ++t) {
    Vector next_prices =
        options.pricing == PricingPath::ClosedForm
            ? closed_form_prices(energies, cfg)
            : numeric_prices(energies, cfg, 1e-9 * cfg.price_budget);
    for (int i = 0; i < n; ++i) {
      log.post(kCps, params[i].id, PriceUpdate{params[i].id, next_prices[i]});
      agents[i].receive_price(next_prices[i]);
    }
    SolveResult re =
        gnep_mediated(next_prices, agents, cfg.deficiency, solver_cfg, &log);
    result.phase_traces.push_back(std::move(re.trace));
    result.outer_trace.push_back(
        snapshot(t, re.energies, next_prices, params, cfg));
    result.outer_iterations = t;

    const double price_move =
        (next_prices - prices).lpNorm<Eigen::Infinity>();
    if (price_move <= fp_tol) {
      prices = next_prices;
      energies = re.energies;
      converged = true;
      break;
    }
    // A marginal seller can flip between selling and idling when the lower
    // price bound binds, locking the alternation into a period-2 cycle of
    // station-indifferent price vectors. Detect it and keep the cheaper
    // phase.
    if (have_prev &&
        (next_prices - prev_prices).lpNorm<Eigen::Infinity>() <= fp_tol) {
      const double cost_a = total_cost(prices, energies, cfg);
      const double cost_b = total_cost(next_prices, re.energies, cfg);
      if (cost_b <= cost_a) {
        prices = next_prices;
        energies = re.energies;
      }
      result.two_cycle = true;
      converged = true;
      break;
    }
    prev_prices = prices;
    have_prev = true;
    prices = next_prices;
    energies = re.energies;
  }

  if (!converged)
    throw FixedPointError("run_emes: price alternation did not reach a fixed point",
                          std::move(result.outer_trace));

  log.post(kCps, kBroadcast, Converged{});

  result.energies = energies;
  result.prices = prices;
  result.slacks = slack_vector(energies, params, prices);
  result.utilities.resize(n);
  for (int i = 0; i < n; ++i)
    result.utilities[i] = utility(energies[i], params[i].available_energy,
                                  prices[i], params[i].preference);
  result.total_cost = total_cost(prices, energies, cfg);
  result.message_count = log.count();
  if (options.record_messages) result.messages = log.entries();
  return result;
}

VerificationReport verify_emes(const EmesResult& result,
                               const std::vector<ECParams>& params,
                               const GridConfig& cfg, std::uint64_t seed,
                               int grid_points, int directions,
                               double rel_tol) {
  const auto n = static_cast<Eigen::Index>(params.size());
  VerificationReport report;

  // Followers: sweep each consumer's offer over its feasible interval with
  // the others held fixed; the joint utility must not improve.
  const double base_utility = total_utility(result.energies, params,
                                            result.prices);
  const double total = result.energies.sum();
  double worst_gain = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double others = total - result.energies[i];
    const double upper = std::max(
        0.0, std::min(params[i].available_energy, cfg.deficiency - others));
    Vector candidate = result.energies;
    for (int g = 0; g < grid_points; ++g) {
      candidate[i] = upper * double(g) / double(grid_points - 1);
      const double u = total_utility(candidate, params, result.prices);
      worst_gain = std::max(worst_gain, u - base_utility);
      ++report.follower_checks;
    }
  }
  report.worst_follower_gain = worst_gain / (1.0 + std::abs(base_utility));
  report.follower_ok = report.worst_follower_gain <= rel_tol;

  // Leader: random budget-preserving, box-feasible price perturbations must
  // not lower the cost.
  const double base_cost = total_cost(result.prices, result.energies, cfg);
  SplitMix64 rng(seed);
  double worst_drop = 0.0;
  int produced = 0;
  int attempts = 0;
  while (produced < directions && attempts < directions * 50) {
    ++attempts;
    Vector d(n);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = rng.normal();
    d.array() -= d.mean();  // keep the budget
    const double norm = d.lpNorm<Eigen::Infinity>();
    if (norm < 1e-12) continue;
    d /= norm;
    double step_max = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d[i] > 1e-15)
        step_max = std::min(step_max, (cfg.price_max - result.prices[i]) / d[i]);
      else if (d[i] < -1e-15)
        step_max = std::min(step_max, (cfg.price_min - result.prices[i]) / d[i]);
    }
    if (!(step_max > 1e-12) || !std::isfinite(step_max)) continue;
    ++produced;
    for (double tau = step_max; tau > step_max / 128.0; tau /= 4.0) {
      const Vector p = result.prices + tau * d;
      const double c = total_cost(p, result.energies, cfg);
      worst_drop = std::max(worst_drop, base_cost - c);
      ++report.leader_checks;
    }
  }
  report.worst_leader_drop = worst_drop / (1.0 + std::abs(base_cost));
  report.leader_ok = report.worst_leader_drop <= rel_tol;
  return report;
}

void write_trace_csv(std::ostream& os, const EmesResult& result,
                     const std::vector<ECParams>& params) {
  os << "iteration,ec_id,energy,price,slack,utility,cost\n";
  char buf[256];
  for (const auto& it : result.outer_trace) {
    for (Eigen::Index i = 0; i < it.energies.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                    it.iteration, params[static_cast<std::size_t>(i)].id,
                    it.energies[i], it.prices[i], it.slacks[i],
                    it.utilities[i], it.total_cost);
      os << buf;
    }
  }
}

}  // namespace emes
