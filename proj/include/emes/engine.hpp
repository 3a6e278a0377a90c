#pragma once

#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

#include "emes/gnep.hpp"
#include "emes/pricing.hpp"
#include "emes/types.hpp"

namespace emes {

// ---------------------------------------------------------------------------
// Message protocol between the station (CPS) and the consumer agents (ECs).
// Consumers never see each other's traffic; every offer travels consumer ->
// station only, and the station replies with per-consumer price updates and
// broadcast continue/converged signals.
// ---------------------------------------------------------------------------

struct Announce {
  double deficiency = 0.0;
  double price_budget = 0.0;
};
struct Offer {
  int ec_id = 0;
  double energy = 0.0;
};
struct SlackReport {
  int ec_id = 0;
  double slack = 0.0;
};
struct PriceUpdate {
  int ec_id = 0;
  double price = 0.0;
};
struct ContinueIteration {};
struct Converged {};

using MessagePayload = std::variant<Announce, Offer, SlackReport, PriceUpdate,
                                    ContinueIteration, Converged>;

inline constexpr int kCps = -1;
inline constexpr int kBroadcast = -2;

struct Message {
  int from = 0;
  int to = 0;
  MessagePayload payload;
};

/// Counts every message; optionally keeps the full ordered log so tests can
/// audit the privacy guarantees and protocol arithmetic.
class MessageLog {
 public:
  explicit MessageLog(bool record = false) : record_(record) {}

  void post(int from, int to, MessagePayload payload) {
    ++count_;
    if (record_) entries_.push_back({from, to, std::move(payload)});
  }

  std::uint64_t count() const { return count_; }
  const std::vector<Message>& entries() const { return entries_; }
  bool recording() const { return record_; }

  /// Messages visible to consumer `ec`: addressed to it or broadcast.
  std::vector<Message> received_by(int ec) const {
    std::vector<Message> seen;
    for (const auto& m : entries_)
      if (m.to == ec || m.to == kBroadcast) seen.push_back(m);
    return seen;
  }

 private:
  bool record_;
  std::uint64_t count_ = 0;
  std::vector<Message> entries_;
};

/// A consumer agent. Holds the private parameters and performs all local
/// per-coordinate computations of the solver iteration; only the resulting
/// offers and slack reports leave the agent.
class EcAgent {
 public:
  explicit EcAgent(const ECParams& ec)
      : id_(ec.id),
        available_(ec.available_energy),
        preference_(ec.preference),
        slope_(2.0 * ec.preference) {
    receive_price(0.0);
  }

  void receive_price(double price) {
    price_ = price;
    offset_ = available_ + price;
  }

  double operator_value(double energy) const {
    return slope_ * energy - offset_;
  }
  double slack(double energy) const {
    return (available_ - slope_ * energy) + price_;
  }

  int id() const { return id_; }
  double capacity() const { return available_; }
  double curvature_bound() const { return slope_; }
  double price() const { return price_; }

 private:
  int id_;
  double available_;
  double preference_;
  double slope_;
  double price_ = 0.0;
  double offset_ = 0.0;
};

enum class PricingPath { ClosedForm, Numeric };

struct EngineOptions {
  bool record_messages = false;
  int outer_cap = 100;
  double fixed_point_tol = 1e-6;  // relative to the price budget
  PricingPath pricing = PricingPath::ClosedForm;
};

/// Snapshot of one leader/followers alternation round.
struct OuterIterate {
  int iteration = 0;
  Vector energies;
  Vector prices;
  Vector slacks;
  Vector utilities;
  double total_cost = 0.0;
};

/// Converged equilibrium record.
struct EmesResult {
  Vector energies;
  Vector prices;
  Vector slacks;
  Vector utilities;
  double total_cost = 0.0;
  int outer_iterations = 0;
  bool two_cycle = false;  // stopped on a period-2 price cycle (see run_emes)
  std::uint64_t message_count = 0;
  std::vector<GnepTrace> phase_traces;
  std::vector<OuterIterate> outer_trace;
  std::vector<Message> messages;  // populated when record_messages is set
};

class FixedPointError : public std::runtime_error {
 public:
  FixedPointError(const std::string& what, std::vector<OuterIterate> trace)
      : std::runtime_error(what), outer_trace(std::move(trace)) {}
  std::vector<OuterIterate> outer_trace;
};

/// Run the consumers' game at the given prices with each consumer updating
/// only its own coordinate and the station mediating the coupled projection
/// and the termination test. Numerically identical to sshpm_solve on the
/// same inputs. Messages per iteration: one Offer and one SlackReport per
/// consumer plus one broadcast.
SolveResult gnep_mediated(const Vector& prices, std::vector<EcAgent>& agents,
                          double deficiency, const SshpmConfig& solver_cfg,
                          MessageLog* log = nullptr);

/// Execute the full leader/followers procedure:
///   1. the station announces the deficiency and the price budget; every
///      consumer starts from the equal share budget/N and the consumers
///      reach their equilibrium offers;
///   2. the station optimizes the unit prices for the observed offers and
///      the consumers re-solve at the new prices.
/// The two steps alternate until the price vector is a fixed point. When a
/// marginal seller makes the alternation oscillate between two price
/// vectors (possible when the lower price bound binds), the lower-cost
/// phase of the period-2 cycle is returned and flagged.
EmesResult run_emes(const std::vector<ECParams>& params, const GridConfig& cfg,
                    const SshpmConfig& solver_cfg = {},
                    const EngineOptions& options = {});

/// Equilibrium stability report: no unilateral consumer deviation may raise
/// the joint utility, and no feasible price perturbation may lower the
/// station's cost, beyond the stated relative tolerance.
struct VerificationReport {
  bool follower_ok = false;
  bool leader_ok = false;
  double worst_follower_gain = 0.0;  // relative
  double worst_leader_drop = 0.0;    // relative
  int follower_checks = 0;
  int leader_checks = 0;
};

VerificationReport verify_emes(const EmesResult& result,
                               const std::vector<ECParams>& params,
                               const GridConfig& cfg,
                               std::uint64_t seed = 0x90a75u,
                               int grid_points = 101, int directions = 100,
                               double rel_tol = 1e-6);

/// Write the per-iteration trace as CSV with the fixed header
/// `iteration,ec_id,energy,price,slack,utility,cost`, one row per consumer
/// per outer iteration; `cost` repeats the station total for the iteration.
void write_trace_csv(std::ostream& os, const EmesResult& result,
                     const std::vector<ECParams>& params);

}  // namespace emes
