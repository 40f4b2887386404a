#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vidattack/boundary.hpp"
#include "vidattack/metrics.hpp"
#include "vidattack/saliency.hpp"
#include "vidattack/temporal.hpp"
#include "vidattack/tensor.hpp"
#include "vidattack/victim.hpp"
#include "vidattack/zoo.hpp"

namespace vidattack {

struct LabeledVideo {
  std::string id;
  VideoTensor video;
  Label label = 0;
};

using Dataset = std::vector<LabeledVideo>;

struct AttackConfig {
  bool targeted = false;
  Label target = 0;  // used when targeted
  double omega = 3.0;
  double phi = 0.6;
  OptimizerConfig optimizer{};
  BoundaryOptions boundary{};
  SaliencyOptions saliency{};
  int n_init_candidates = 5;
  std::uint64_t seed = 0;
  bool enable_temporal = true;
  bool enable_spatial = true;
  /// Re-classify a [0, 255]-clamped copy of x_adv after the run (one extra query).
  bool clamp_output = false;

  /// omega = 3, phi = 0.6 untargeted; omega = 30, phi = 0.8 targeted.
  static AttackConfig defaults(bool targeted) {
    AttackConfig c;
    c.targeted = targeted;
    c.omega = targeted ? 30.0 : 3.0;
    c.phi = targeted ? 0.8 : 0.6;
    return c;
  }

  void validate() const {
    optimizer.validate();
    if (n_init_candidates < 1) throw Error(Errc::InvalidConfig, "n_init_candidates must be >= 1");
    if (omega < 0.0) throw Error(Errc::InvalidConfig, "omega must be >= 0");
    if (!(phi > 0.0) || phi > 1.0) throw Error(Errc::InvalidConfig, "phi must lie in (0, 1]");
    if (!(boundary.tolerance > 0.0)) throw Error(Errc::InvalidConfig, "boundary tolerance must be > 0");
  }

  AttackGoal goal_for(Label true_label) const {
    return targeted ? AttackGoal::targeted(true_label, target) : AttackGoal::untargeted(true_label);
  }
};

/// Seeded choice of n distinct dataset samples usable as starting points:
/// the target class when targeted, any other class otherwise.
inline std::vector<VideoTensor> sample_candidates(const Dataset& dataset, const VideoTensor& x,
                                                  const AttackGoal& goal, int n, Rng& rng) {
  std::vector<std::size_t> admissible;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (goal.admits_candidate(dataset[i].label) && dataset[i].video.shape() == x.shape() &&
        !(dataset[i].video == x)) {
      admissible.push_back(i);
    }
  }
  if (n < 0 || admissible.size() < static_cast<std::size_t>(n)) {
    throw Error(Errc::InsufficientCandidates, "need " + std::to_string(n) + " candidates, have " +
                                                  std::to_string(admissible.size()));
  }
  std::shuffle(admissible.begin(), admissible.end(), rng);
  std::vector<VideoTensor> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(dataset[admissible[static_cast<std::size_t>(i)]].video);
  return out;
}

struct Initialization {
  Direction theta;  // unit length, supported on mask
  BinaryMask mask;
  double g = 0.0;
  double lambda_max = 0.0;
  std::uint64_t queries = 0;
  std::size_t ranked_frames = 0;
};

/// Turns one starting sample into a masked unit direction and its boundary
/// distance. `spatial` is the precomputed saliency mask of x, or null.
inline Initialization initialize_direction(QuerySession& session, const VideoTensor& x, const AttackGoal& goal,
                                           const VideoTensor& x_hat, const AttackConfig& config,
                                           const BinaryMask* spatial = nullptr) {
  const std::uint64_t start = session.count();
  const Direction p = difference(x_hat, x);
  const double p_norm = l2_norm(p);
  if (!(p_norm > 0.0)) throw Error(Errc::ZeroDirection, "candidate equals the clean video");

  BoundaryOptions bounds = config.boundary;
  bounds.lambda_max = 10.0 * p_norm;

  BinaryMask mask = (config.enable_spatial && spatial) ? *spatial : BinaryMask::ones(x.shape());
  Direction masked = apply_mask(p, mask);
  Direction theta = normalize(masked);
  std::optional<double> g;
  std::size_t ranked = 0;

  if (config.enable_temporal) {
    {
      PurposeScope scope(session, QueryPurpose::Init);
      if (!is_success(session.query(add_perturbation(x, masked)).label, goal)) {
        throw Error(Errc::StartingDirectionNotAdversarial, "x + p * M does not meet the goal");
      }
    }
    const FrameRanking ranking = rank_frames(session, x, p, mask, goal);
    ranked = ranking.entries.size();
    PruneResult pruned = prune_frames(session, x, p, mask, ranking, config.omega, goal, bounds);
    mask = std::move(pruned.mask);
    theta = std::move(pruned.theta_init);
    g = pruned.g;
    masked = apply_mask(p, mask);
  }

  if (!g) {
    PurposeScope scope(session, QueryPurpose::Init);
    g = evaluate_g(session, x, goal, theta, l2_norm(masked), bounds).g;
  }
  return {std::move(theta), std::move(mask), *g, bounds.lambda_max, session.count() - start, ranked};
}

struct CandidateReport {
  std::uint64_t queries = 0;
  std::optional<double> g;  // empty when initialization failed
  std::string failure;
  std::size_t key_frames = 0;

  friend bool operator==(const CandidateReport&, const CandidateReport&) = default;
};

struct AttackResult {
  bool success = false;
  bool budget_exhausted = false;
  VideoTensor x_adv;
  std::uint64_t queries = 0;
  double g = 0.0;
  double map = 0.0;
  double map_masked = 0.0;
  double sparsity = 0.0;
  BinaryMask mask;
  OptimizationTrace trace;
  std::optional<Label> clamped_label;
  Label final_label = 0;
  std::vector<CandidateReport> candidates;
  std::size_t chosen_candidate = 0;
  std::array<std::uint64_t, kQueryPurposeCount> queries_by_purpose{};

  friend bool operator==(const AttackResult&, const AttackResult&) = default;
};

/// Full pipeline: clean-sample gate, masked initialization over several
/// starting samples, zeroth-order refinement of the best one, reconstruction
/// x_adv = x + g * theta / ||theta|| and a final audited query.
inline AttackResult attack(QuerySession& session, const VideoTensor& x, Label y, const AttackConfig& config,
                           const Dataset& dataset) {
  config.validate();
  const AttackGoal goal = config.goal_for(y);
  {
    PurposeScope scope(session, QueryPurpose::Clean);
    const VictimResponse clean = session.query(x);
    if (clean.label != y) {
      throw Error(Errc::CleanSampleMisclassified,
                  "victim predicts " + std::to_string(clean.label) + " for true class " + std::to_string(y));
    }
  }

  std::optional<BinaryMask> spatial;
  if (config.enable_spatial && config.phi < 1.0) spatial = spatial_mask(x, config.phi, config.saliency);

  Rng rng(config.seed);
  const auto candidates = sample_candidates(dataset, x, goal, config.n_init_candidates, rng);

  AttackResult result;
  std::optional<Initialization> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::uint64_t before = session.count();
    CandidateReport report;
    try {
      Initialization init =
          initialize_direction(session, x, goal, candidates[i], config, spatial ? &*spatial : nullptr);
      report.g = init.g;
      report.key_frames = key_frame_count(init.mask);
      if (!best || init.g < best->g) {
        best = std::move(init);
        result.chosen_candidate = i;
      }
    } catch (const Error& e) {
      if (e.code() != Errc::StartingDirectionNotAdversarial && e.code() != Errc::ZeroDirection &&
          e.code() != Errc::NotAdversarialWithinCap) {
        throw;
      }
      report.failure = std::string(to_string(e.code()));
    }
    report.queries = session.count() - before;
    result.candidates.push_back(std::move(report));
  }
  if (!best) throw Error(Errc::NoViableInitialization, "no starting sample produced a usable direction");

  BoundaryOptions bounds = config.boundary;
  bounds.lambda_max = best->lambda_max;
  OptimizationResult opt = optimize_direction(session, x, goal, best->theta, best->g, config.optimizer, bounds,
                                              config.seed ^ 0x9E3779B97F4A7C15ull, &best->mask);

  const Direction unit = normalize(opt.theta);
  result.x_adv = point_along(x, unit, opt.g);
  result.g = opt.g;
  result.budget_exhausted = opt.budget_exhausted;
  result.trace = std::move(opt.trace);
  {
    PurposeScope scope(session, QueryPurpose::Verify);
    const VictimResponse r = session.query(result.x_adv);
    result.final_label = r.label;
    result.success = is_success(r.label, goal);
    if (config.clamp_output) result.clamped_label = session.query(clamp_pixels(result.x_adv)).label;
  }

  const Direction perturbation = difference(result.x_adv, x);
  result.map = map(perturbation);
  result.map_masked = map_masked(perturbation, best->mask);
  result.sparsity = sparsity(best->mask);
  result.mask = std::move(best->mask);
  result.queries = session.count();
  for (std::size_t i = 0; i < kQueryPurposeCount; ++i) {
    result.queries_by_purpose[i] = session.count(static_cast<QueryPurpose>(i));
  }
  return result;
}

inline ResultRow to_row(const std::string& id, const AttackResult& r) {
  return {id, r.success, false, r.queries, r.map, r.map_masked, r.sparsity};
}

}  // namespace vidattack
