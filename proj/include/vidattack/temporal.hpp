#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

#include "vidattack/boundary.hpp"
#include "vidattack/metrics.hpp"
#include "vidattack/tensor.hpp"
#include "vidattack/victim.hpp"

namespace vidattack {

struct FrameScore {
  std::size_t frame = 0;
  double probability = 0.0;

  friend bool operator==(const FrameScore&, const FrameScore&) = default;
};

/// Frames whose removal keeps the goal satisfied, least important first
/// (highest remaining top-1 probability). Ties go to the lower index.
struct FrameRanking {
  std::vector<FrameScore> entries;

  friend bool operator==(const FrameRanking&, const FrameRanking&) = default;
};

inline VideoTensor add_perturbation(const VideoTensor& x, const Direction& p) {
  require_same_shape(x.shape(), p.shape());
  VideoTensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  return out;
}

/// Leave-one-frame-out probing: one query per frame of x + p * del_frame(m, t).
inline FrameRanking rank_frames(QuerySession& session, const VideoTensor& x, const Direction& p,
                                const BinaryMask& m, const AttackGoal& goal) {
  require_same_shape(x.shape(), p.shape());
  require_same_shape(x.shape(), m.shape());
  PurposeScope scope(session, QueryPurpose::Ranking);
  FrameRanking ranking;
  for (std::size_t t = 0; t < x.shape().frames; ++t) {
    const VictimResponse r = session.query(add_perturbation(x, apply_mask(p, del_frame(m, t))));
    if (is_success(r.label, goal)) ranking.entries.push_back({t, r.probability});
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const FrameScore& a, const FrameScore& b) { return a.probability > b.probability; });
  return ranking;
}

/// Mean absolute perturbation of g * unit over the whole video.
inline double boundary_map(double g, const Direction& unit) { return g * map(unit); }

struct PruneStep {
  std::size_t frame = 0;
  double map = 0.0;
  std::size_t key_frames = 0;
  bool within_bound = false;
};

struct PruneResult {
  BinaryMask mask;
  Direction theta_init;  // unit length
  /// Boundary distance of theta_init when pruning already measured it.
  std::optional<double> g;
  std::vector<PruneStep> accepted;
};

/// Greedy key-frame search over a ranking. A candidate mask (current mask
/// minus one more frame) must keep x + p * mask on the goal side. Below the
/// MAP bound omega it is taken whenever it has fewer key frames; above the
/// bound only if its MAP beats the incumbent's.
inline PruneResult prune_frames(QuerySession& session, const VideoTensor& x, const Direction& p,
                                const BinaryMask& m, const FrameRanking& ranking, double omega,
                                const AttackGoal& goal, const BoundaryOptions& bounds = {}) {
  if (omega < 0.0) throw Error(Errc::InvalidArgument, "omega must be >= 0");
  PurposeScope scope(session, QueryPurpose::Prune);
  const Direction start = apply_mask(p, m);
  PruneResult out{m, normalize(start), std::nullopt, {}};

  // The incumbent's MAP is measured once, only if the over-bound branch needs it.
  std::optional<double> incumbent_map;
  auto measure = [&](const Direction& unit, double hint) -> std::optional<double> {
    auto d = search_boundary(session, x, goal, unit, hint, bounds);
    if (!d) return std::nullopt;
    return d->g;
  };

  for (const auto& entry : ranking.entries) {
    BinaryMask candidate = del_frame(out.mask, entry.frame);
    const Direction perturbation = apply_mask(p, candidate);
    const double norm = l2_norm(perturbation);
    if (!(norm > 0.0)) continue;
    const Direction theta = normalize(perturbation);

    if (!is_success(session.query(add_perturbation(x, perturbation)).label, goal)) continue;
    const auto g = measure(theta, norm);
    if (!g) continue;
    const double cand_map = boundary_map(*g, theta);
    const std::size_t cand_frames = key_frame_count(candidate);

    bool take = false;
    if (cand_map <= omega) {
      take = cand_frames < key_frame_count(out.mask);
    } else {
      if (!incumbent_map) {
        const auto g_inc = out.g ? out.g : measure(out.theta_init, l2_norm(apply_mask(p, out.mask)));
        out.g = g_inc;
        incumbent_map = g_inc ? boundary_map(*g_inc, out.theta_init) : std::numeric_limits<double>::infinity();
      }
      take = cand_map < *incumbent_map;
    }
    if (take) {
      out.mask = std::move(candidate);
      out.theta_init = theta;
      out.g = g;
      incumbent_map = cand_map;
      out.accepted.push_back({entry.frame, cand_map, cand_frames, cand_map <= omega});
    }
  }
  return out;
}

}  // namespace vidattack
