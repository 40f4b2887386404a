#pragma once

#include <optional>
#include <string>

#include "vidattack/tensor.hpp"
#include "vidattack/victim.hpp"

namespace vidattack {

/// Untargeted: leave the true class. Targeted: land on a chosen class.
class AttackGoal {
 public:
  static AttackGoal untargeted(Label true_label) { return AttackGoal(false, true_label, true_label); }
  static AttackGoal targeted(Label true_label, Label target) {
    if (target == true_label) throw Error(Errc::InvalidArgument, "target class equals the true class");
    return AttackGoal(true, true_label, target);
  }

  bool is_targeted() const noexcept { return targeted_; }
  Label true_label() const noexcept { return true_label_; }
  /// Only meaningful for targeted goals.
  Label target() const noexcept { return target_; }

  bool admits_candidate(Label candidate_class) const noexcept {
    return targeted_ ? candidate_class == target_ : candidate_class != true_label_;
  }

  friend bool operator==(const AttackGoal&, const AttackGoal&) = default;

 private:
  AttackGoal(bool targeted, Label y, Label target) : targeted_(targeted), true_label_(y), target_(target) {}

  bool targeted_;
  Label true_label_;
  Label target_;
};

inline bool is_success(Label label, const AttackGoal& goal) noexcept {
  return goal.is_targeted() ? label == goal.target() : label != goal.true_label();
}

struct BoundaryOptions {
  /// Absolute width of the final bracket, 0-255 pixel scale.
  double tolerance = 0.01;
  /// No search beyond this step length.
  double lambda_max = 1e4;
  /// Start at initial_scale * ||theta|| when no hint is given.
  double initial_scale = 1.0;
};

/// g(theta) with its certified bracket: the goal holds at x + hi * unit and
/// fails at x + lo * unit (lo = 0 stands for x itself, never queried).
struct BoundaryDistance {
  double g = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::uint64_t queries_used = 0;
};

/// Distance from x to the goal region along theta / ||theta||: geometric
/// (factor 2) bracketing from the start point, then bisection down to the
/// tolerance. Returns nullopt when nothing up to lambda_max satisfies the
/// goal; callers treat that direction as g = +inf.
inline std::optional<BoundaryDistance> search_boundary(QuerySession& session, const VideoTensor& x,
                                                       const AttackGoal& goal, const Direction& theta,
                                                       std::optional<double> hint,
                                                       const BoundaryOptions& opts = {}) {
  const Direction unit = normalize(theta);
  if (hint && !(*hint > 0.0)) throw Error(Errc::InvalidArgument, "boundary hint must be > 0");
  const std::uint64_t start = session.count();
  auto adversarial = [&](double lambda) {
    return is_success(session.query(point_along(x, unit, lambda)).label, goal);
  };

  double lambda0 = hint ? *hint : opts.initial_scale * l2_norm(theta);
  lambda0 = std::min(lambda0, opts.lambda_max);
  double lo = 0.0;
  double hi = 0.0;
  if (adversarial(lambda0)) {
    hi = lambda0;
    while (hi > opts.tolerance) {
      const double half = hi / 2.0;
      if (adversarial(half)) {
        hi = half;
      } else {
        lo = half;
        break;
      }
    }
  } else {
    lo = lambda0;
    for (;;) {
      const double next = std::min(lo * 2.0, opts.lambda_max);
      if (!(next > lo)) return std::nullopt;
      if (adversarial(next)) {
        hi = next;
        break;
      }
      lo = next;
    }
  }

  while (hi - lo > opts.tolerance) {
    const double mid = lo + (hi - lo) / 2.0;
    if (adversarial(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return BoundaryDistance{hi, lo, hi, session.count() - start};
}

/// Throwing form of search_boundary.
inline BoundaryDistance evaluate_g(QuerySession& session, const VideoTensor& x, const AttackGoal& goal,
                                   const Direction& theta, std::optional<double> hint = std::nullopt,
                                   const BoundaryOptions& opts = {}) {
  auto d = search_boundary(session, x, goal, theta, hint, opts);
  if (!d) {
    throw Error(Errc::NotAdversarialWithinCap,
                "no goal-satisfying step up to " + std::to_string(opts.lambda_max));
  }
  return *d;
}

}  // namespace vidattack
