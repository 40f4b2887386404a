#pragma once

// Seeded toy datasets: each class stamps a fixed random +/- texture into a
// central patch of every frame over a noisy gray background. The matching
// victim is linear in those textures and blind to a subset of frames.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vidattack/attack.hpp"
#include "vidattack/tensor.hpp"
#include "vidattack/victim.hpp"

namespace vidattack {

struct SyntheticSpec {
  Shape shape{16, 32, 32, 3};
  int classes = 2;
  int samples = 20;
  std::uint64_t seed = 0;
  /// Frames the victim never looks at.
  int ignored_frames = 8;
  /// Side of the central textured patch as a fraction of width/height.
  double patch_fraction = 0.5;
  double amplitude = 40.0;
  double noise = 8.0;
  double background = 128.0;
  /// Logit margin of a typical clean sample.
  double margin = 8.0;
  double temperature = 1.0;

  void validate() const {
    if (!shape.valid()) throw Error(Errc::InvalidConfig, "synthetic dims must be >= 1");
    if (classes < 2) throw Error(Errc::InvalidConfig, "synthetic classes must be >= 2");
    if (samples < 1) throw Error(Errc::InvalidConfig, "synthetic samples must be >= 1");
    if (ignored_frames < 0 || ignored_frames >= static_cast<int>(shape.frames)) {
      throw Error(Errc::InvalidConfig, "ignored_frames must leave at least one frame");
    }
    if (!(patch_fraction > 0.0) || patch_fraction > 1.0) throw Error(Errc::InvalidConfig, "patch_fraction in (0,1]");
  }
};

struct LinearVictimSpec {
  std::vector<VideoTensor> weights;
  std::vector<double> biases;
  double temperature = 1.0;
  std::set<std::size_t> ignored_frames;

  std::shared_ptr<const Victim> build() const {
    auto inner = std::make_shared<LinearSoftmaxVictim>(weights, biases, temperature);
    if (ignored_frames.empty()) return inner;
    return std::make_shared<FrameObliviousVictim>(inner, ignored_frames);
  }
};

struct SyntheticBundle {
  Dataset dataset;
  LinearVictimSpec victim;
};

namespace detail {
inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }
}  // namespace detail

/// Bit-identical for a given spec. Samples are stored at float32 precision so
/// what gets written to disk is exactly what was checked for accuracy.
inline SyntheticBundle generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Shape& s = spec.shape;
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<std::size_t> frames(s.frames);
  std::iota(frames.begin(), frames.end(), 0);
  std::shuffle(frames.begin(), frames.end(), rng);
  std::set<std::size_t> ignored(frames.begin(), frames.begin() + spec.ignored_frames);

  const auto side_w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(spec.patch_fraction * s.width)));
  const auto side_h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(spec.patch_fraction * s.height)));
  const std::size_t w0 = (s.width - side_w) / 2;
  const std::size_t h0 = (s.height - side_h) / 2;
  auto in_patch = [&](std::size_t w, std::size_t h) {
    return w >= w0 && w < w0 + side_w && h >= h0 && h < h0 + side_h;
  };

  // Per-class +/-1 texture over the patch, repeated in every frame.
  std::vector<VideoTensor> patterns;
  for (int k = 0; k < spec.classes; ++k) {
    VideoTensor pat(s, 0.0);
    Shape frame_shape{1, s.width, s.height, s.channels};
    std::vector<double> texture(frame_shape.size(), 0.0);
    for (std::size_t w = 0; w < s.width; ++w) {
      for (std::size_t h = 0; h < s.height; ++h) {
        if (!in_patch(w, h)) continue;
        const double v = coin(rng) ? 1.0 : -1.0;
        for (std::size_t c = 0; c < s.channels; ++c) texture[frame_shape.index(0, w, h, c)] = v;
      }
    }
    for (std::size_t t = 0; t < s.frames; ++t) {
      std::copy(texture.begin(), texture.end(), pat.values().begin() + static_cast<std::ptrdiff_t>(t * s.frame_size()));
    }
    patterns.push_back(std::move(pat));
  }

  VideoTensor mean_pattern(s, 0.0);
  for (const auto& p : patterns) mean_pattern += p;
  mean_pattern *= 1.0 / spec.classes;

  const double informative = static_cast<double>(s.frames - ignored.size());
  const double patch_elems = static_cast<double>(side_w * side_h * s.channels);
  const double scale = spec.margin / (spec.amplitude * patch_elems * informative);

  LinearVictimSpec victim;
  victim.temperature = spec.temperature;
  victim.ignored_frames = ignored;
  for (int k = 0; k < spec.classes; ++k) {
    VideoTensor w = patterns[static_cast<std::size_t>(k)] - mean_pattern;
    w *= scale;
    for (double& v : w.values()) v = detail::to_f32(v);
    // Centre the logits on the gray background as the victim sees it, with
    // ignored frames already blanked.
    double bias = 0.0;
    for (std::size_t t = 0; t < s.frames; ++t) {
      if (ignored.count(t)) continue;
      for (double v : w.frame(t)) bias -= v * spec.background;
    }
    victim.weights.push_back(std::move(w));
    victim.biases.push_back(bias);
  }
  const auto model = victim.build();

  SyntheticBundle bundle;
  bundle.victim = victim;
  for (int i = 0; i < spec.samples; ++i) {
    const Label label = i % spec.classes;
    for (;;) {
      VideoTensor x(s, 0.0);
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double v = spec.background + spec.amplitude * patterns[static_cast<std::size_t>(label)][j] +
                         spec.noise * normal(rng);
        x[j] = detail::to_f32(v);
      }
      if (model->classify(x).label != label) continue;  // redraw until the victim is right
      char id[32];
      std::snprintf(id, sizeof id, "s%03d", i);
      bundle.dataset.push_back({id, std::move(x), label});
      break;
    }
  }
  return bundle;
}

}  // namespace vidattack
