#pragma once

#include <random>

#include "vidattack/attack.hpp"
#include "vidattack/synthetic.hpp"

namespace testing_helpers {

using namespace vidattack;

/// label 1 iff the mean pixel exceeds `threshold`; probability grows with the margin.
inline std::shared_ptr<FunctionVictim> mean_threshold_victim(Shape shape, double threshold) {
  return std::make_shared<FunctionVictim>(shape, 2, [threshold](const VideoTensor& x) {
    double sum = 0.0;
    for (double v : x.values()) sum += v;
    const double mean = sum / static_cast<double>(x.size());
    const double p = 1.0 / (1.0 + std::exp(-std::abs(mean - threshold)));
    return VictimResponse{mean > threshold ? 1 : 0, p};
  });
}

inline VideoTensor random_video(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 255.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  VideoTensor v(shape);
  for (double& x : v.values()) x = dist(rng);
  return v;
}

inline Direction random_direction(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Direction d(shape);
  for (double& x : d.values()) x = dist(rng);
  return d;
}

/// Small frame-oblivious synthetic set: 8 frames of 8x8x1, 4 of them ignored.
inline SyntheticSpec small_spec(std::uint64_t seed = 0) {
  SyntheticSpec s;
  s.shape = Shape{8, 8, 8, 1};
  s.samples = 10;
  s.ignored_frames = 4;
  s.seed = seed;
  return s;
}

}  // namespace testing_helpers
