#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "vidattack/boundary.hpp"
#include "vidattack/tensor.hpp"
#include "vidattack/victim.hpp"

namespace vidattack {

struct OptimizerConfig {
  double beta = 0.005;
  int n_samples = 20;
  double eta0 = 0.2;
  double eta_min = 1e-4;
  double beta_min = 5e-6;
  int max_iterations = 1000;
  /// Cap on the session counter while optimizing; unset means unlimited.
  std::optional<std::uint64_t> query_budget;
  /// Stop once an iteration is rejected with beta already at beta_min.
  bool stop_on_stall = true;
  /// Line-search doublings allowed per accepted step.
  int max_doublings = 15;
  /// Stop when the best g improved by less than this fraction over the last
  /// convergence_window iterations. Zero disables the test.
  double convergence_tolerance = 1e-3;
  int convergence_window = 10;
  /// Bisection tolerance of the g evaluations inside an iteration, relative
  /// to beta * g; never coarser than the boundary tolerance.
  double tolerance_ratio = 5e-4;

  void validate() const {
    if (!(beta > 0.0)) throw Error(Errc::InvalidConfig, "beta must be > 0");
    if (n_samples < 1) throw Error(Errc::InvalidConfig, "n_samples must be >= 1");
    if (!(eta_min > 0.0) || eta0 < eta_min) throw Error(Errc::InvalidConfig, "need eta0 >= eta_min > 0");
    if (!(beta_min > 0.0) || beta_min > beta) throw Error(Errc::InvalidConfig, "need 0 < beta_min <= beta");
    if (max_iterations < 0) throw Error(Errc::InvalidConfig, "max_iterations must be >= 0");
    if (convergence_tolerance < 0.0 || convergence_window < 1) {
      throw Error(Errc::InvalidConfig, "need convergence_tolerance >= 0 and convergence_window >= 1");
    }
    if (!(tolerance_ratio > 0.0)) throw Error(Errc::InvalidConfig, "tolerance_ratio must be > 0");
  }
};

/// Objective oracle: g at a direction, or nullopt when the direction never
/// reaches the goal (g = +inf).
using GFunction = std::function<std::optional<double>(const Direction&)>;

using Rng = std::mt19937_64;

struct GradientEstimate {
  Direction gradient;
  double g_theta = 0.0;
  int failed_draws = 0;
};

/// Averaged single-draw estimators (g(theta + beta u) - g(theta)) / beta * u
/// with u a Gaussian draw scaled to unit length. g(theta) is evaluated once and shared by all draws.
/// When `support` is given, u is restricted to it so the estimate never
/// leaves the masked subspace. Draws whose g is infinite are dropped from
/// the average.
inline GradientEstimate estimate_gradient(const GFunction& g_eval, const Direction& theta, double beta,
                                          int n_samples, Rng& rng, const BinaryMask* support = nullptr) {
  if (!(beta > 0.0)) throw Error(Errc::InvalidArgument, "beta must be > 0");
  if (support) require_same_shape(support->shape(), theta.shape());
  const auto g0 = g_eval(theta);
  if (!g0) throw Error(Errc::NotAdversarialWithinCap, "g(theta) is not finite");

  GradientEstimate est{Direction(theta.shape()), *g0, 0};
  std::normal_distribution<double> normal(0.0, 1.0);
  Direction u(theta.shape());
  int used = 0;
  for (int i = 0; i < n_samples; ++i) {
    for (std::size_t j = 0; j < u.size(); ++j) {
      const double z = normal(rng);
      u[j] = (support && !(*support)[j]) ? 0.0 : z;
    }
    const double u_norm = l2_norm(u);
    if (!(u_norm > 0.0)) throw Error(Errc::ZeroDirection, "empty gradient support");
    u *= 1.0 / u_norm;
    Direction probe = theta;
    for (std::size_t j = 0; j < u.size(); ++j) probe[j] += beta * u[j];
    const auto g1 = g_eval(probe);
    if (!g1) {
      ++est.failed_draws;
      continue;
    }
    const double slope = (*g1 - *g0) / beta;
    for (std::size_t j = 0; j < u.size(); ++j) est.gradient[j] += slope * u[j];
    ++used;
  }
  if (used == 0) throw Error(Errc::AllDrawsFailed, "every perturbed direction missed the goal region");
  est.gradient *= 1.0 / used;
  return est;
}

struct LineSearchResult {
  Direction theta;
  double eta = 0.0;
  double g = 0.0;
  bool accepted = false;
};

/// Backtracking on theta - eta * grad: double eta while g keeps dropping,
/// otherwise halve until something improves on g_current or eta < eta_min.
inline LineSearchResult line_search_step(const GFunction& g_eval, const Direction& theta,
                                         const Direction& grad, double eta, double g_current,
                                         double eta_min, int max_doublings = 15) {
  LineSearchResult result{theta, eta, g_current, false};
  if (l2_norm(grad) == 0.0) return result;

  auto step = [&](double e) {
    Direction t = theta;
    for (std::size_t j = 0; j < t.size(); ++j) t[j] -= e * grad[j];
    return t;
  };
  auto try_eta = [&](double e) -> std::optional<std::pair<Direction, double>> {
    Direction t = step(e);
    if (l2_norm(t) == 0.0) return std::nullopt;
    const auto g = g_eval(t);
    if (!g) return std::nullopt;
    return std::make_pair(std::move(t), *g);
  };

  if (auto first = try_eta(eta); first && first->second < g_current) {
    result = {std::move(first->first), eta, first->second, true};
    double e = eta;
    for (int i = 0; i < max_doublings; ++i) {
      e *= 2.0;
      auto next = try_eta(e);
      if (!next || !(next->second < result.g)) break;
      result = {std::move(next->first), e, next->second, true};
    }
    return result;
  }

  double e = eta;
  for (;;) {
    e /= 2.0;
    if (e < eta_min) break;
    auto next = try_eta(e);
    if (next && next->second < g_current) return {std::move(next->first), e, next->second, true};
  }
  result.eta = e;
  return result;
}

struct TraceRecord {
  int iteration = 0;
  double g_best = 0.0;
  double g_current = 0.0;
  std::uint64_t queries = 0;
  double eta = 0.0;
  double beta = 0.0;
  bool accepted = false;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct OptimizationTrace {
  std::vector<TraceRecord> records;

  friend bool operator==(const OptimizationTrace&, const OptimizationTrace&) = default;
};

struct OptimizationResult {
  Direction theta;
  double g = 0.0;
  OptimizationTrace trace;
  bool budget_exhausted = false;
  bool converged = false;
  int iterations = 0;
};

/// Zeroth-order descent of g over directions. theta is kept at unit length
/// after every accepted step so beta stays a fixed relative perturbation.
/// Every g evaluation is warm-started from the current boundary distance.
inline OptimizationResult optimize_direction(QuerySession& session, const VideoTensor& x, const AttackGoal& goal,
                                             const Direction& theta_init, double g_init,
                                             const OptimizerConfig& config, const BoundaryOptions& bounds,
                                             std::uint64_t seed, const BinaryMask* support = nullptr) {
  config.validate();
  OptimizationResult out{theta_init, g_init, {}, false, false, 0};
  Rng rng(seed);

  Direction theta = theta_init;
  double g_current = g_init;
  double beta = config.beta;
  double eta = config.eta0;

  // Finite differences over beta need g resolved well below beta * |grad g|.
  BoundaryOptions local = bounds;
  auto g_eval = [&](const Direction& d) -> std::optional<double> {
    auto r = search_boundary(session, x, goal, d, g_current, local);
    if (!r) return std::nullopt;
    return r->g;
  };

  const auto saved_limit = session.limit();
  if (config.query_budget) session.set_limit(*config.query_budget);
  try {
    for (int it = 0; it < config.max_iterations; ++it) {
      local.tolerance = std::min(bounds.tolerance, config.tolerance_ratio * beta * g_current);
      LineSearchResult ls{theta, eta, g_current, false};
      bool have_gradient = true;
      GradientEstimate est;
      {
        PurposeScope scope(session, QueryPurpose::GEval);
        try {
          est = estimate_gradient(g_eval, theta, beta, config.n_samples, rng, support);
        } catch (const Error& e) {
          // beta too large for the local geometry, or the warm start lost the
          // boundary: treated like a rejected step.
          if (e.code() != Errc::AllDrawsFailed && e.code() != Errc::NotAdversarialWithinCap) throw;
          have_gradient = false;
        }
      }
      if (have_gradient) {
        g_current = est.g_theta;
        PurposeScope scope(session, QueryPurpose::LineSearch);
        ls = line_search_step(g_eval, theta, est.gradient, eta, g_current, config.eta_min, config.max_doublings);
      }

      const double beta_used = beta;
      bool stalled = false;
      if (ls.accepted) {
        theta = normalize(ls.theta);
        g_current = ls.g;
        eta = ls.eta;
        beta = config.beta;
      } else {
        stalled = beta <= config.beta_min;
        beta = std::max(beta / 10.0, config.beta_min);
        eta = config.eta0;
      }
      if (g_current < out.g) {
        out.g = g_current;
        out.theta = theta;
      }
      out.iterations = it + 1;
      out.trace.records.push_back({it, out.g, g_current, session.count(), ls.eta, beta_used, ls.accepted});
      if (stalled && config.stop_on_stall) {
        out.converged = true;
        break;
      }
      const auto& recs = out.trace.records;
      const auto window = static_cast<std::size_t>(config.convergence_window);
      if (config.convergence_tolerance > 0.0 && recs.size() > window) {
        const double before = recs[recs.size() - 1 - window].g_best;
        if (before - out.g < config.convergence_tolerance * before) {
          out.converged = true;
          break;
        }
      }
    }
  } catch (const Error& e) {
    session.set_limit(saved_limit);
    if (e.code() != Errc::BudgetExhausted) throw;
    out.budget_exhausted = true;
    return out;
  }
  session.set_limit(saved_limit);
  return out;
}

}  // namespace vidattack
