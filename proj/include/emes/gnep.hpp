#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <utility>

#include "emes/model.hpp"
#include "emes/projection.hpp"
#include "emes/types.hpp"

namespace emes {

/// The affine operator of the consumers' variational inequality,
/// F_n(e) = 2 c_n e_n - (E_n + p_n), i.e. the negated utility gradient.
/// It is strongly monotone with modulus 2 min_n c_n and Lipschitz constant
/// 2 max_n c_n.
struct ViOperator {
  Vector slope;   // 2 c_n
  Vector offset;  // E_n + p_n

  static ViOperator build(const std::vector<ECParams>& params,
                          const Vector& prices) {
    const auto n = static_cast<Eigen::Index>(params.size());
    if (prices.size() != n)
      throw DimensionError("ViOperator: price vector size mismatch");
    ViOperator op;
    op.slope.resize(n);
    op.offset.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      op.slope[i] = 2.0 * params[i].preference;
      op.offset[i] = params[i].available_energy + prices[i];
    }
    return op;
  }

  Vector operator()(const Vector& e) const {
    Vector f(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i)
      f[i] = slope[i] * e[i] - offset[i];
    return f;
  }

  double lipschitz() const { return slope.maxCoeff(); }
  double strong_monotonicity() const { return slope.minCoeff(); }
};

/// Solver parameters. `tolerance` is relative to the deficiency; the solver
/// stops once the natural residual falls below tolerance * deficiency and
/// the interior slack spread is negligible. `step_scale` overrides the
/// default step 1 / (2 max_n c_n) when set.
struct SshpmConfig {
  int max_iterations = 10000;
  double tolerance = 1e-8;
  double line_search_shrink = 0.5;   // in (0, 1)
  double line_search_target = 0.5;   // in (0, 1)
  std::optional<double> step_scale;  // > 0 when set
};

inline void validate(const SshpmConfig& cfg) {
  if (cfg.max_iterations < 1)
    throw ConfigError("sshpm: max_iterations must be positive");
  if (!(cfg.tolerance > 0.0)) throw ConfigError("sshpm: tolerance must be positive");
  if (!(cfg.line_search_shrink > 0.0 && cfg.line_search_shrink < 1.0))
    throw ConfigError("sshpm: line_search_shrink must lie in (0,1)");
  if (!(cfg.line_search_target > 0.0 && cfg.line_search_target < 1.0))
    throw ConfigError("sshpm: line_search_target must lie in (0,1)");
  if (cfg.step_scale && !(*cfg.step_scale > 0.0))
    throw ConfigError("sshpm: step_scale must be positive");
}

struct GnepIterate {
  int iteration = 0;
  Vector energies;
  double residual = 0.0;      // infinity norm of the natural residual
  double slack_spread = 0.0;  // max interior deviation from the mean slack
};

struct GnepTrace {
  std::vector<GnepIterate> iterates;
};

struct SolveResult {
  Vector energies;
  GnepTrace trace;
  int iterations = 0;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, GnepTrace trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  GnepTrace trace;
};

/// Slack value per consumer, xi_n = E_n - 2 c_n e_n + p_n. At the
/// variational equilibrium all interior consumers share the same value:
/// it equals the multiplier of the coupled supply constraint.
inline Vector slack_vector(const Vector& energies,
                           const std::vector<ECParams>& params,
                           const Vector& prices) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (energies.size() != n || prices.size() != n)
    throw DimensionError("slack_vector: size mismatch");
  Vector xi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double slope = 2.0 * params[i].preference;
    xi[i] = (params[i].available_energy - slope * energies[i]) + prices[i];
  }
  return xi;
}

namespace detail {

struct SlackSpread {
  double spread = 0.0;  // max |xi_n - mean| over interior consumers
  double mean = 0.0;
};

/// Slack agreement over interior consumers (0 < e_n < cap_n). Consumers
/// pinned at a box bound are excluded: complementary slackness only
/// equalizes the multiplier where the bound constraints are inactive.
inline SlackSpread interior_slack_spread(const Vector& xi,
                                         const Vector& energies,
                                         const Vector& caps) {
  SlackSpread out;
  int count = 0;
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    if (energies[i] > 0.0 && energies[i] < caps[i]) {
      out.mean += xi[i];
      ++count;
    }
  }
  if (count == 0) return out;
  out.mean /= count;
  for (Eigen::Index i = 0; i < xi.size(); ++i)
    if (energies[i] > 0.0 && energies[i] < caps[i])
      out.spread = std::max(out.spread, std::abs(xi[i] - out.mean));
  return out;
}

}  // namespace detail

/// Per-iteration hook: receives the current iterate and its slack vector
/// before the update, plus whether this iteration declared convergence.
/// The engine uses it to drive the station/consumer message protocol.
using IterationHook =
    std::function<void(int iteration, const Vector& energies,
                       const Vector& slacks, bool converged)>;

/// Hyperplane-projection iteration for the monotone VI over the offer set
/// {0 <= e <= caps, sum e <= deficiency}. One iteration:
///   1. y = P(e - gamma F(e)); r = e - y. Stop once the natural residual
///      ||e - P(e - F(e))||_inf is below tolerance and the interior slacks
///      agree.
///   2. Backtrack z = e - eta r, eta in {1, s, s^2, ...}, until
///      <F(z), r> >= target/gamma ||r||^2, which makes the hyperplane
///      through z with normal F(z) separate e from the solution set.
///   3. Project e onto the offer set intersected with that half-space.
///
/// The operator and slack callbacks let the distributed realization supply
/// per-consumer local computations while sharing this exact loop, keeping
/// both paths numerically identical. `curvature` is the operator's largest
/// diagonal slope (2 max_n c_n); it bounds the slack error a residual-sized
/// energy error can induce, which keeps the two stopping conditions
/// consistent when the coupled constraint is slack and the shared
/// multiplier is near zero.
template <class OperatorFn, class SlackFn>
SolveResult sshpm_iterate(OperatorFn&& op, SlackFn&& slacks, const Vector& caps,
                          double deficiency, double gamma, double curvature,
                          const SshpmConfig& cfg,
                          const IterationHook& hook = {}) {
  validate(cfg);
  if (!(gamma > 0.0)) throw ConfigError("sshpm: step scale must be positive");
  const double tol_abs = cfg.tolerance * deficiency;

  SolveResult out;
  Vector e = Vector::Zero(caps.size());
  GnepTrace& trace = out.trace;

  for (int k = 0; k < cfg.max_iterations; ++k) {
    const Vector fe = op(e);
    const Vector xi = slacks(e);
    const Vector y = project_box_budget(e - gamma * fe, caps, deficiency);
    const Vector r = e - y;

    double residual;
    if (gamma == 1.0)
      residual = r.lpNorm<Eigen::Infinity>();
    else
      residual = (e - project_box_budget(e - fe, caps, deficiency))
                     .lpNorm<Eigen::Infinity>();
    const auto slack = detail::interior_slack_spread(xi, e, caps);
    trace.iterates.push_back({k, e, residual, slack.spread});

    const double spread_tol =
        std::max(1e-6 * (1.0 + std::abs(slack.mean)), curvature * tol_abs);
    const bool converged = residual <= tol_abs && slack.spread <= spread_tol;
    if (hook) hook(k, e, xi, converged);
    if (converged) {
      out.energies = e;
      out.iterations = k;
      return out;
    }

    const double rho = r.squaredNorm();
    double eta = 1.0;
    Vector z = e - eta * r;
    Vector fz = op(z);
    int backtracks = 0;
    while (fz.dot(r) < (cfg.line_search_target / gamma) * rho) {
      eta *= cfg.line_search_shrink;
      z = e - eta * r;
      fz = op(z);
      if (++backtracks > 200)
        throw NonConvergenceError("sshpm: line search failed", trace);
    }
    const Vector next =
        project_box_budget_halfspace(e, caps, deficiency, fz, fz.dot(z));
    if ((next.array() == e.array()).all())
      throw NonConvergenceError("sshpm: stalled at the numerical floor",
                                trace);
    e = next;
  }
  throw NonConvergenceError("sshpm: iteration cap exceeded", trace);
}

/// Solve the consumers' game for a fixed price vector with the synchronous
/// whole-vector iteration. Starts from the zero offer (always feasible).
inline SolveResult sshpm_solve(const Vector& prices,
                               const std::vector<ECParams>& params,
                               double deficiency,
                               const SshpmConfig& cfg = {}) {
  validate(params);
  const ViOperator op = ViOperator::build(params, prices);
  const Vector caps = available_energies(params);
  const double gamma = cfg.step_scale ? *cfg.step_scale : 1.0 / op.lipschitz();
  return sshpm_iterate(
      op, [&](const Vector& e) { return slack_vector(e, params, prices); },
      caps, deficiency, gamma, op.lipschitz(), cfg);
}

/// Independent closed-form/bisection solution of the same game, used for
/// verification. For a multiplier xi >= 0 each consumer's stationary offer
/// is clamp((E_n + p_n - xi) / (2 c_n), 0, E_n); the sum of offers is
/// continuous and non-increasing in xi, so the multiplier that makes the
/// coupled constraint tight is found by bisection. xi = 0 applies whenever
/// the constraint is slack.
inline Vector ve_oracle(const Vector& prices,
                        const std::vector<ECParams>& params,
                        double deficiency) {
  validate(params);
  const auto n = static_cast<Eigen::Index>(params.size());
  if (prices.size() != n) throw DimensionError("ve_oracle: size mismatch");

  auto offers = [&](double xi) {
    Vector e(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double raw = (params[i].available_energy + prices[i] - xi) /
                         (2.0 * params[i].preference);
      e[i] = std::min(std::max(raw, 0.0), params[i].available_energy);
    }
    return e;
  };

  if (offers(0.0).sum() <= deficiency) return offers(0.0);

  double lo = 0.0;
  double hi = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    hi = std::max(hi, params[i].available_energy + prices[i]);
  const double tol = 1e-10 * deficiency;
  double xi = 0.5 * (lo + hi);
  for (int k = 0; k < 200; ++k) {
    xi = 0.5 * (lo + hi);
    const double gap = offers(xi).sum() - deficiency;
    if (std::abs(gap) <= tol) break;
    if (gap > 0.0)
      lo = xi;
    else
      hi = xi;
  }
  return offers(xi);
}

}  // namespace emes
