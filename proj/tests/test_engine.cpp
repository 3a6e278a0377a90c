#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <sstream>

#include "emes/engine.hpp"
#include "emes/experiments.hpp"
#include "emes/rng.hpp"

using namespace emes;

namespace {

GridConfig default_config(int n) {
  GridConfig cfg;
  cfg.deficiency = 700.0;
  cfg.price_budget = 185.0;
  cfg.price_min = 8.45;
  cfg.price_max = 185.0;
  cfg.cost_exponent = 2.0;
  cfg.linear_price_cost = uniform_vector(n, 1.0);
  cfg.fixed_cost = uniform_vector(n, 1.0);
  return cfg;
}

std::vector<ECParams> random_consumers(SplitMix64& rng, int n) {
  std::vector<ECParams> params;
  for (int i = 0; i < n; ++i) params.push_back({i, rng.uniform(64.0, 240.0), 0.5});
  return params;
}

}  // namespace

TEST_CASE("degenerate single-consumer game") {
  std::vector<ECParams> params = {{0, 100.0, 0.5}};
  GridConfig cfg = default_config(1);
  const EmesResult res = run_emes(params, cfg);
  CHECK(res.outer_iterations == 1);
  CHECK(res.prices[0] == doctest::Approx(185.0));
  const double expected =
      std::min({100.0, (100.0 + 185.0) / (2.0 * 0.5), 700.0});
  CHECK(res.energies[0] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("symmetric consumers are a fixed point of both phases") {
  std::vector<ECParams> params = {{0, 150.0, 0.5}, {1, 150.0, 0.5},
                                  {2, 150.0, 0.5}};
  GridConfig cfg = default_config(3);
  cfg.deficiency = 300.0;
  const EmesResult res = run_emes(params, cfg);
  CHECK(res.outer_iterations == 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(res.prices[i] == doctest::Approx(185.0 / 3.0).epsilon(1e-9));
    CHECK(res.energies[i] == doctest::Approx(100.0).epsilon(1e-8));
  }
}

TEST_CASE("mediated iteration equals the synchronous solver bit for bit") {
  SplitMix64 rng(51);
  for (int k = 0; k < 50; ++k) {
    const int n = rng.uniform_int(2, 10);
    auto params = random_consumers(rng, n);
    for (auto& ec : params) ec.preference = rng.uniform(0.3, 1.2);
    Vector raw(n);
    for (int i = 0; i < n; ++i) raw[i] = rng.uniform(8.45, 185.0);
    const Vector prices = project_price_simplex(raw, 185.0, 8.45, 185.0);

    std::vector<EcAgent> agents;
    for (const auto& ec : params) agents.emplace_back(ec);
    const SshpmConfig solver_cfg;
    const SolveResult a =
        gnep_mediated(prices, agents, 700.0, solver_cfg, nullptr);
    const SolveResult b = sshpm_solve(prices, params, 700.0, solver_cfg);

    REQUIRE(a.energies.size() == b.energies.size());
    CHECK((a.energies.array() == b.energies.array()).all());
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("protocol arithmetic: 2N + 1 messages per iteration") {
  SplitMix64 rng(52);
  const int n = 5;
  auto params = random_consumers(rng, n);
  std::vector<EcAgent> agents;
  for (const auto& ec : params) agents.emplace_back(ec);
  MessageLog log(true);
  const Vector prices = uniform_vector(n, 37.0);
  const SolveResult res = gnep_mediated(prices, agents, 700.0, {}, &log);
  const auto iterations = static_cast<std::uint64_t>(res.iterations) + 1;
  CHECK(log.count() == iterations * (2 * n + 1));

  std::map<int, int> offers_per_iter;
  int broadcasts = 0;
  for (const auto& m : log.entries()) {
    if (std::holds_alternative<Offer>(m.payload)) {
      CHECK(m.to == kCps);
      ++offers_per_iter[broadcasts];
    } else if (std::holds_alternative<ContinueIteration>(m.payload) ||
               std::holds_alternative<Converged>(m.payload)) {
      CHECK(m.to == kBroadcast);
      ++broadcasts;
    }
  }
  for (const auto& [iter, count] : offers_per_iter) CHECK(count == n);
}

TEST_CASE("privacy: no consumer ever receives another consumer's offer") {
  SplitMix64 rng(53);
  auto params = random_consumers(rng, 6);
  GridConfig cfg = default_config(6);
  EngineOptions opt;
  opt.record_messages = true;
  const EmesResult res = run_emes(params, cfg, {}, opt);

  MessageLog log(true);
  for (const auto& m : res.messages) log.post(m.from, m.to, m.payload);
  for (int ec = 0; ec < 6; ++ec) {
    for (const auto& m : log.received_by(ec)) {
      CHECK_FALSE(std::holds_alternative<Offer>(m.payload));
      if (std::holds_alternative<PriceUpdate>(m.payload))
        CHECK(std::get<PriceUpdate>(m.payload).ec_id == ec);
    }
  }
}

TEST_CASE("every mediated offer vector is feasible and every price batch valid") {
  SplitMix64 rng(54);
  auto params = random_consumers(rng, 5);
  GridConfig cfg = default_config(5);
  EngineOptions opt;
  opt.record_messages = true;
  const EmesResult res = run_emes(params, cfg, {}, opt);

  Vector current = Vector::Zero(5);
  int filled = 0;
  std::map<int, double> price_batch;
  for (const auto& m : res.messages) {
    if (std::holds_alternative<Offer>(m.payload)) {
      const auto& o = std::get<Offer>(m.payload);
      current[o.ec_id] = o.energy;
      if (++filled == 5) {
        CHECK(energy_feasible(current, params, cfg.deficiency));
        filled = 0;
      }
    } else if (std::holds_alternative<PriceUpdate>(m.payload)) {
      const auto& p = std::get<PriceUpdate>(m.payload);
      price_batch[p.ec_id] = p.price;
      if (price_batch.size() == 5) {
        Vector batch(5);
        for (const auto& [id, price] : price_batch) batch[id] = price;
        CHECK(price_feasible(batch, cfg));
        price_batch.clear();
      }
    }
  }
}

TEST_CASE("determinism: identical inputs give identical results") {
  SplitMix64 rng(55);
  auto params = random_consumers(rng, 5);
  GridConfig cfg = default_config(5);
  const EmesResult a = run_emes(params, cfg);
  const EmesResult b = run_emes(params, cfg);
  CHECK((a.energies.array() == b.energies.array()).all());
  CHECK((a.prices.array() == b.prices.array()).all());
  CHECK(a.total_cost == b.total_cost);
  CHECK(a.message_count == b.message_count);
  CHECK(a.outer_iterations == b.outer_iterations);
}

TEST_CASE("stored utilities and cost reproduce exactly from the equilibrium") {
  SplitMix64 rng(56);
  auto params = random_consumers(rng, 5);
  GridConfig cfg = default_config(5);
  const EmesResult res = run_emes(params, cfg);
  for (int i = 0; i < 5; ++i) {
    const double u = utility(res.energies[i], params[i].available_energy,
                             res.prices[i], params[i].preference);
    CHECK(res.utilities[i] == u);
  }
  CHECK(res.total_cost == total_cost(res.prices, res.energies, cfg));
  CHECK(energy_feasible(res.energies, params, cfg.deficiency));
  CHECK(price_feasible(res.prices, cfg));
}

TEST_CASE("smaller sellers get strictly higher unclamped prices") {
  SplitMix64 rng(57);
  for (int k = 0; k < 20; ++k) {
    auto params = random_consumers(rng, 5);
    GridConfig cfg = default_config(5);
    const EmesResult res = run_emes(params, cfg);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        const bool clamped_i = res.prices[i] <= cfg.price_min + 1e-9 ||
                               res.prices[i] >= cfg.price_max - 1e-9;
        const bool clamped_j = res.prices[j] <= cfg.price_min + 1e-9 ||
                               res.prices[j] >= cfg.price_max - 1e-9;
        if (clamped_i || clamped_j) continue;
        if (res.energies[i] < res.energies[j] - 1e-9)
          CHECK(res.prices[i] > res.prices[j]);
      }
  }
}

TEST_CASE("offers at equal prices reflect the supply capacities") {
  SplitMix64 rng(58);
  auto params = random_consumers(rng, 6);
  GridConfig cfg = default_config(6);
  const EmesResult res = run_emes(params, cfg);
  const auto& first = res.outer_trace.front();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (params[i].available_energy < params[j].available_energy)
        CHECK(first.energies[i] <= first.energies[j] + 1e-9);
}

TEST_CASE("equilibrium stability holds; constructed deviations are caught") {
  SplitMix64 rng(59);
  auto params = random_consumers(rng, 5);
  GridConfig cfg = default_config(5);
  const EmesResult res = run_emes(params, cfg);

  const VerificationReport ok = verify_emes(res, params, cfg);
  CHECK(ok.follower_ok);
  CHECK(ok.leader_ok);

  EmesResult perturbed = res;
  // shift supply toward a consumer with headroom; the joint utility check
  // must flag the deviation
  int donor = 0, receiver = 0;
  for (int i = 0; i < 5; ++i) {
    if (perturbed.energies[i] > 5.0) donor = i;
    if (params[i].available_energy - perturbed.energies[i] > 5.0) receiver = i;
  }
  perturbed.energies[donor] -= 5.0;
  perturbed.energies[receiver] += 5.0;
  const VerificationReport bad = verify_emes(perturbed, params, cfg);
  CHECK_FALSE(bad.follower_ok);
}

TEST_CASE("trace export format") {
  SplitMix64 rng(60);
  auto params = random_consumers(rng, 4);
  GridConfig cfg = default_config(4);
  const EmesResult res = run_emes(params, cfg);
  std::ostringstream os;
  write_trace_csv(os, res, params);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "iteration,ec_id,energy,price,slack,utility,cost");
  int rows = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == static_cast<int>(res.outer_trace.size()) * 4);
}

TEST_CASE("paper-style defaults converge in a handful of rounds") {
  SplitMix64 rng(61);
  for (int k = 0; k < 25; ++k) {
    auto params = random_consumers(rng, 5);
    GridConfig cfg = default_config(5);
    const EmesResult res = run_emes(params, cfg);
    CHECK(res.outer_iterations <= 20);
  }
}
