#pragma once

// Spectral-residual saliency (log-amplitude spectrum minus its local average,
// recombined with the original phase) and top-k pixel selection.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <vector>

#include "vidattack/tensor.hpp"

namespace vidattack {

struct SaliencyOptions {
  std::size_t resolution = 64;  // longer side of the working image
  int box = 3;
  double sigma = 2.5;
  /// Added to every amplitude before the log, as a fraction of the mean
  /// amplitude. Exact spectral nulls (any hard-edged synthetic shape has
  /// them) would otherwise dominate the residual.
  double log_floor = 0.25;
};

/// Non-negative per-pixel scores for one frame, indexed [w * height + h].
struct SaliencyMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
  /// Set for constant frames, which carry no structure and get a flat map.
  bool degenerate = false;
};

namespace detail {

using Complex = std::complex<double>;

/// Plane of doubles with rows x cols, row-major.
struct Plane {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

/// Bilinear resampling with half-pixel centers, edges clamped.
inline Plane resize_bilinear(const Plane& src, std::size_t rows, std::size_t cols) {
  Plane dst(rows, cols);
  const double sr = static_cast<double>(src.rows) / static_cast<double>(rows);
  const double sc = static_cast<double>(src.cols) / static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double fr = std::clamp((static_cast<double>(r) + 0.5) * sr - 0.5, 0.0, static_cast<double>(src.rows - 1));
    const auto r0 = static_cast<std::size_t>(fr);
    const std::size_t r1 = std::min(r0 + 1, src.rows - 1);
    const double ar = fr - static_cast<double>(r0);
    for (std::size_t c = 0; c < cols; ++c) {
      double fc = std::clamp((static_cast<double>(c) + 0.5) * sc - 0.5, 0.0, static_cast<double>(src.cols - 1));
      const auto c0 = static_cast<std::size_t>(fc);
      const std::size_t c1 = std::min(c0 + 1, src.cols - 1);
      const double ac = fc - static_cast<double>(c0);
      dst(r, c) = (1 - ar) * ((1 - ac) * src(r0, c0) + ac * src(r0, c1)) +
                  ar * ((1 - ac) * src(r1, c0) + ac * src(r1, c1));
    }
  }
  return dst;
}

/// In-place 1-D DFT along a strided line; naive O(n^2) with a twiddle table,
/// which is plenty at a 64-sample working resolution.
inline void dft_line(std::vector<Complex>& data, std::size_t offset, std::size_t stride, std::size_t n,
                     const std::vector<Complex>& twiddle, std::vector<Complex>& scratch) {
  scratch.assign(n, Complex{});
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{};
    for (std::size_t j = 0; j < n; ++j) acc += data[offset + j * stride] * twiddle[(j * k) % n];
    scratch[k] = acc;
  }
  for (std::size_t k = 0; k < n; ++k) data[offset + k * stride] = scratch[k];
}

inline void dft2(std::vector<Complex>& data, std::size_t rows, std::size_t cols, bool inverse) {
  const double sign = inverse ? 1.0 : -1.0;
  auto table = [sign](std::size_t n) {
    std::vector<Complex> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return t;
  };
  const auto tw_cols = table(cols);
  const auto tw_rows = table(rows);
  std::vector<Complex> scratch;
  for (std::size_t r = 0; r < rows; ++r) dft_line(data, r * cols, 1, cols, tw_cols, scratch);
  for (std::size_t c = 0; c < cols; ++c) dft_line(data, c, cols, rows, tw_rows, scratch);
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(rows * cols);
    for (auto& z : data) z *= scale;
  }
}

/// Mean over a box window with periodic wrap; the spectrum is periodic.
inline Plane box_filter_periodic(const Plane& src, int size) {
  Plane dst(src.rows, src.cols);
  const int half = size / 2;
  const auto R = static_cast<long>(src.rows);
  const auto C = static_cast<long>(src.cols);
  for (long r = 0; r < R; ++r) {
    for (long c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int dr = -half; dr <= half; ++dr) {
        for (int dc = -half; dc <= half; ++dc) {
          acc += src(static_cast<std::size_t>(((r + dr) % R + R) % R), static_cast<std::size_t>(((c + dc) % C + C) % C));
        }
      }
      dst(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc / static_cast<double>(size * size);
    }
  }
  return dst;
}

inline long reflect101(long i, long n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

inline Plane gaussian_blur(const Plane& src, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  const double total = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& w : k) w /= total;

  const auto R = static_cast<long>(src.rows);
  const auto C = static_cast<long>(src.cols);
  Plane tmp(src.rows, src.cols);
  for (long r = 0; r < R; ++r) {
    for (long c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * src(static_cast<std::size_t>(r), static_cast<std::size_t>(reflect101(c + i, C)));
      }
      tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  }
  Plane dst(src.rows, src.cols);
  for (long r = 0; r < R; ++r) {
    for (long c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp(static_cast<std::size_t>(reflect101(r + i, R)), static_cast<std::size_t>(c));
      }
      dst(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
    }
  }
  return dst;
}

}  // namespace detail

/// Saliency of one W x H x C frame (values laid out as in VideoTensor).
inline SaliencyMap spectral_residual(std::span<const double> frame, std::size_t width, std::size_t height,
                                     std::size_t channels, const SaliencyOptions& opts = {}) {
  if (width < 8 || height < 8) throw Error(Errc::InvalidArgument, "saliency needs frames of at least 8x8");
  if (frame.size() != width * height * channels) throw Error(Errc::ShapeMismatch, "frame size");

  detail::Plane gray(width, height);
  for (std::size_t i = 0; i < width * height; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += frame[i * channels + c];
    gray.v[i] = acc / static_cast<double>(channels);
  }
  const auto [lo, hi] = std::minmax_element(gray.v.begin(), gray.v.end());
  SaliencyMap out{width, height, std::vector<double>(width * height, 1.0), false};
  if (*hi - *lo <= 1e-12 * (1.0 + std::abs(*hi))) {
    out.degenerate = true;
    return out;
  }
  // Only the DC term would see a constant offset; removing the mean pins it.
  const double mean = std::accumulate(gray.v.begin(), gray.v.end(), 0.0) / static_cast<double>(gray.v.size());
  for (double& v : gray.v) v -= mean;

  const double scale = static_cast<double>(opts.resolution) / static_cast<double>(std::max(width, height));
  const auto rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(width) * scale)));
  const auto cols = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(height) * scale)));
  const detail::Plane small = detail::resize_bilinear(gray, rows, cols);

  std::vector<detail::Complex> spec(small.v.begin(), small.v.end());
  detail::dft2(spec, rows, cols, false);
  double mean_amp = 0.0;
  for (const auto& z : spec) mean_amp += std::abs(z);
  const double floor = opts.log_floor * mean_amp / static_cast<double>(spec.size());
  detail::Plane log_amp(rows, cols);
  std::vector<double> phase(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    log_amp.v[i] = std::log(std::abs(spec[i]) + floor);
    phase[i] = std::arg(spec[i]);
  }
  const detail::Plane avg = detail::box_filter_periodic(log_amp, opts.box);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = std::polar(std::exp(log_amp.v[i] - avg.v[i]), phase[i]);
  detail::dft2(spec, rows, cols, true);

  detail::Plane energy(rows, cols);
  for (std::size_t i = 0; i < spec.size(); ++i) energy.v[i] = std::norm(spec[i]);
  const detail::Plane full = detail::resize_bilinear(detail::gaussian_blur(energy, opts.sigma), width, height);

  const double peak = *std::max_element(full.v.begin(), full.v.end());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double v = std::max(0.0, full.v[i]);
    out.values[i] = peak > 0.0 ? v / peak : 1.0;
  }
  return out;
}

/// Number of pixels kept for a ratio phi of n pixels: ceil(phi * n).
inline std::size_t salient_count(double phi, std::size_t n) {
  if (!(phi > 0.0) || phi > 1.0) throw Error(Errc::InvalidArgument, "phi must lie in (0, 1]");
  // The small slack keeps products such as 0.25 * 16 from rounding up to 5.
  const auto k = static_cast<std::size_t>(std::ceil(phi * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

/// Exactly ceil(phi * W * H) ones at the highest scores; ties resolved in
/// favor of the lower row-major index.
inline std::vector<std::uint8_t> select_salient(const SaliencyMap& map, double phi) {
  const std::size_t n = map.values.size();
  const std::size_t k = salient_count(phi, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (map.values[a] != map.values[b]) return map.values[a] > map.values[b];
                      return a < b;
                    });
  std::vector<std::uint8_t> selected(n, 0);
  for (std::size_t i = 0; i < k; ++i) selected[order[i]] = 1;
  return selected;
}

inline std::vector<SaliencyMap> saliency_maps(const VideoTensor& x, const SaliencyOptions& opts = {}) {
  const Shape& s = x.shape();
  std::vector<SaliencyMap> maps;
  maps.reserve(s.frames);
  for (std::size_t t = 0; t < s.frames; ++t) {
    maps.push_back(spectral_residual(x.frame(t), s.width, s.height, s.channels, opts));
  }
  return maps;
}

/// Per-frame salient pixels; a selected (w, h) switches on every channel.
inline BinaryMask spatial_mask(const VideoTensor& x, double phi, const SaliencyOptions& opts = {}) {
  const Shape& s = x.shape();
  salient_count(phi, std::size_t{s.width} * s.height);  // validates phi before any work
  BinaryMask mask = BinaryMask::zeros(s);
  if (phi == 1.0) return BinaryMask::ones(s);
  for (std::size_t t = 0; t < s.frames; ++t) {
    const auto selected = select_salient(spectral_residual(x.frame(t), s.width, s.height, s.channels, opts), phi);
    for (std::size_t p = 0; p < selected.size(); ++p) {
      if (!selected[p]) continue;
      for (std::size_t c = 0; c < s.channels; ++c) mask.set(t * s.frame_size() + p * s.channels + c, true);
    }
  }
  return mask;
}

/// Stacks per-frame maps into a T x W x H x 1 tensor for export.
inline VideoTensor stack_maps(const std::vector<SaliencyMap>& maps) {
  if (maps.empty()) throw Error(Errc::InvalidArgument, "no maps");
  Shape shape{static_cast<std::uint32_t>(maps.size()), static_cast<std::uint32_t>(maps.front().width),
              static_cast<std::uint32_t>(maps.front().height), 1};
  std::vector<double> data;
  data.reserve(shape.size());
  for (const auto& m : maps) data.insert(data.end(), m.values.begin(), m.values.end());
  return VideoTensor(shape, std::move(data));
}

}  // namespace vidattack
