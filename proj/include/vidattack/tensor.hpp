#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "vidattack/error.hpp"

namespace vidattack {

/// Extent of a video tensor: frames x width x height x channels.
struct Shape {
  std::uint32_t frames = 1;
  std::uint32_t width = 1;
  std::uint32_t height = 1;
  std::uint32_t channels = 1;

  constexpr std::size_t frame_size() const noexcept {
    return std::size_t{width} * height * channels;
  }
  constexpr std::size_t size() const noexcept { return frames * frame_size(); }
  constexpr bool valid() const noexcept {
    return frames >= 1 && width >= 1 && height >= 1 && channels >= 1;
  }
  constexpr std::size_t index(std::size_t t, std::size_t w, std::size_t h,
                              std::size_t c) const noexcept {
    return ((t * width + w) * height + h) * channels + c;
  }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.frames) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.height) + "x" + std::to_string(s.channels);
}

inline void require_same_shape(const Shape& a, const Shape& b) {
  if (a != b) {
    throw Error(Errc::ShapeMismatch, to_string(a) + " vs " + to_string(b));
  }
}

struct VideoTag {};
struct DirectionTag {};

/// Dense real tensor stored row-major by (t, w, h, c). The tag keeps pixel
/// data and search directions from being mixed up by accident.
template <class Tag>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {
    if (!shape.valid()) throw Error(Errc::InvalidArgument, "all dims must be >= 1");
    if (!std::isfinite(fill)) throw Error(Errc::InvalidArgument, "non-finite tensor value");
  }

  Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
    if (!shape.valid()) throw Error(Errc::InvalidArgument, "all dims must be >= 1");
    if (data_.size() != shape.size()) {
      throw Error(Errc::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                           " does not match " + to_string(shape));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "non-finite tensor value");
    }
  }

  /// Reinterprets the values of a tensor with another tag.
  template <class Other>
  explicit Tensor(const Tensor<Other>& other) : shape_(other.shape()), data_(other.values().begin(), other.values().end()) {}

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }

  double at(std::size_t t, std::size_t w, std::size_t h, std::size_t c) const {
    return data_[shape_.index(t, w, h, c)];
  }
  double& at(std::size_t t, std::size_t w, std::size_t h, std::size_t c) {
    return data_[shape_.index(t, w, h, c)];
  }

  std::span<const double> frame(std::size_t t) const {
    return std::span<const double>(data_).subspan(t * shape_.frame_size(), shape_.frame_size());
  }

  Tensor& operator+=(const Tensor& rhs) {
    require_same_shape(shape_, rhs.shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& rhs) {
    require_same_shape(shape_, rhs.shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor lhs, const Tensor& rhs) { return lhs += rhs; }
  friend Tensor operator-(Tensor lhs, const Tensor& rhs) { return lhs -= rhs; }
  friend Tensor operator*(Tensor lhs, double s) { return lhs *= s; }
  friend Tensor operator*(double s, Tensor rhs) { return rhs *= s; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

using VideoTensor = Tensor<VideoTag>;
using Direction = Tensor<DirectionTag>;

/// {0,1} selection congruent to a video.
class BinaryMask {
 public:
  BinaryMask() = default;

  explicit BinaryMask(Shape shape, bool fill = true)
      : shape_(shape), data_(shape.size(), fill ? 1 : 0) {
    if (!shape.valid()) throw Error(Errc::InvalidArgument, "all dims must be >= 1");
  }

  BinaryMask(Shape shape, std::vector<std::uint8_t> bits) : shape_(shape), data_(std::move(bits)) {
    if (data_.size() != shape.size()) throw Error(Errc::ShapeMismatch, "mask length mismatch");
    for (auto b : data_) {
      if (b > 1) throw Error(Errc::InvalidArgument, "mask values must be 0 or 1");
    }
  }

  static BinaryMask ones(Shape shape) { return BinaryMask(shape, true); }
  static BinaryMask zeros(Shape shape) { return BinaryMask(shape, false); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool operator[](std::size_t i) const noexcept { return data_[i] != 0; }
  std::span<const std::uint8_t> bits() const noexcept { return data_; }

  void set(std::size_t i, bool on) noexcept { data_[i] = on ? 1 : 0; }
  void set(std::size_t t, std::size_t w, std::size_t h, std::size_t c, bool on) noexcept {
    set(shape_.index(t, w, h, c), on);
  }
  bool at(std::size_t t, std::size_t w, std::size_t h, std::size_t c) const noexcept {
    return data_[shape_.index(t, w, h, c)] != 0;
  }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
  }
  std::size_t frame_count(std::size_t t) const noexcept {
    auto begin = data_.begin() + static_cast<std::ptrdiff_t>(t * shape_.frame_size());
    return static_cast<std::size_t>(
        std::count(begin, begin + static_cast<std::ptrdiff_t>(shape_.frame_size()), std::uint8_t{1}));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Shape shape_{};
  std::vector<std::uint8_t> data_;
};

template <class Tag>
double l2_norm(const Tensor<Tag>& v) noexcept {
  double sum = 0.0;
  for (double x : v.values()) sum += x * x;
  return std::sqrt(sum);
}

template <class Tag>
double dot(const Tensor<Tag>& a, const Tensor<Tag>& b) {
  require_same_shape(a.shape(), b.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

/// Scales v to unit length. Throws ZeroDirection for a null tensor, which
/// upstream means x_hat == x or the mask removed every perturbed pixel.
inline Direction normalize(const Direction& v) {
  const double n = l2_norm(v);
  if (!(n > 0.0)) throw Error(Errc::ZeroDirection, "cannot normalize a zero direction");
  Direction out = v;
  for (double& x : out.values()) x /= n;
  return out;
}

/// Entries where the mask is 0 become exactly +0.0.
template <class Tag>
Tensor<Tag> apply_mask(const Tensor<Tag>& v, const BinaryMask& m) {
  require_same_shape(v.shape(), m.shape());
  Tensor<Tag> out = v;
  auto values = out.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!m[i]) values[i] = 0.0;
  }
  return out;
}

inline BinaryMask del_frame(const BinaryMask& m, std::size_t t) {
  if (t >= m.shape().frames) {
    throw Error(Errc::FrameOutOfRange,
                "frame " + std::to_string(t) + " outside [0," + std::to_string(m.shape().frames) + ")");
  }
  BinaryMask out = m;
  const std::size_t fs = m.shape().frame_size();
  for (std::size_t i = t * fs; i < (t + 1) * fs; ++i) out.set(i, false);
  return out;
}

/// Frames holding at least one selected element; a spatially sparse frame
/// still counts as one key frame.
inline std::size_t key_frame_count(const BinaryMask& m) noexcept {
  std::size_t n = 0;
  for (std::size_t t = 0; t < m.shape().frames; ++t) {
    if (m.frame_count(t) > 0) ++n;
  }
  return n;
}

inline Direction difference(const VideoTensor& a, const VideoTensor& b) {
  require_same_shape(a.shape(), b.shape());
  Direction out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

/// x + lambda * unit. Boundary search and adversarial reconstruction both go
/// through here so that they produce bit-identical points.
inline VideoTensor point_along(const VideoTensor& x, const Direction& unit, double lambda) {
  require_same_shape(x.shape(), unit.shape());
  VideoTensor out(x.shape());
  const double* a = x.values().data();
  const double* u = unit.values().data();
  double* o = out.values().data();
  for (std::size_t i = 0, n = out.size(); i < n; ++i) o[i] = a[i] + lambda * u[i];
  return out;
}

inline VideoTensor clamp_pixels(const VideoTensor& x, double lo = 0.0, double hi = 255.0) {
  VideoTensor out = x;
  for (double& v : out.values()) v = std::clamp(v, lo, hi);
  return out;
}

// ---------------------------------------------------------------------------
// VBT1 container: "VBT1", u32 T, W, H, C (little endian), then float32 data.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

}  // namespace detail

struct RawTensor {
  Shape shape;
  std::vector<float> data;
};

inline std::string encode_vbt(const Shape& shape, std::span<const float> data) {
  if (data.size() != shape.size()) throw Error(Errc::ShapeMismatch, "VBT1 payload length");
  std::string out = "VBT1";
  out.reserve(20 + 4 * data.size());
  detail::put_u32(out, shape.frames);
  detail::put_u32(out, shape.width);
  detail::put_u32(out, shape.height);
  detail::put_u32(out, shape.channels);
  for (float f : data) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline RawTensor decode_vbt(std::string_view bytes) {
  if (bytes.size() < 20 || bytes.substr(0, 4) != "VBT1") {
    throw Error(Errc::InvalidFile, "missing VBT1 header");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  RawTensor raw;
  raw.shape = Shape{detail::get_u32(p + 4), detail::get_u32(p + 8), detail::get_u32(p + 12),
                    detail::get_u32(p + 16)};
  if (!raw.shape.valid()) throw Error(Errc::InvalidFile, "VBT1 dims must be >= 1");
  const std::size_t n = raw.shape.size();
  if (bytes.size() != 20 + 4 * n) {
    throw Error(Errc::InvalidFile, "VBT1 payload size does not match dims " + to_string(raw.shape));
  }
  raw.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) raw.data[i] = std::bit_cast<float>(detail::get_u32(p + 20 + 4 * i));
  return raw;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidFile, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::InvalidFile, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::InvalidFile, "short write to " + path);
}

template <class Tag>
std::string encode_vbt(const Tensor<Tag>& v) {
  std::vector<float> data(v.values().begin(), v.values().end());
  return encode_vbt(v.shape(), data);
}

inline std::string encode_vbt(const BinaryMask& m) {
  std::vector<float> data(m.bits().begin(), m.bits().end());
  return encode_vbt(m.shape(), data);
}

template <class Tag = VideoTag>
Tensor<Tag> decode_tensor(std::string_view bytes) {
  RawTensor raw = decode_vbt(bytes);
  return Tensor<Tag>(raw.shape, std::vector<double>(raw.data.begin(), raw.data.end()));
}

inline BinaryMask decode_mask(std::string_view bytes) {
  RawTensor raw = decode_vbt(bytes);
  std::vector<std::uint8_t> bits(raw.data.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (raw.data[i] == 0.0f) {
      bits[i] = 0;
    } else if (raw.data[i] == 1.0f) {
      bits[i] = 1;
    } else {
      throw Error(Errc::InvalidFile, "mask file holds a value other than 0.0/1.0");
    }
  }
  return BinaryMask(raw.shape, std::move(bits));
}

template <class Tag>
void save_vbt(const std::string& path, const Tensor<Tag>& v) {
  write_file(path, encode_vbt(v));
}
inline void save_vbt(const std::string& path, const BinaryMask& m) { write_file(path, encode_vbt(m)); }

inline VideoTensor load_video(const std::string& path) { return decode_tensor<VideoTag>(read_file(path)); }
inline BinaryMask load_mask(const std::string& path) { return decode_mask(read_file(path)); }

}  // namespace vidattack
