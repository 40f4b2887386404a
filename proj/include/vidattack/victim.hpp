#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vidattack/error.hpp"
#include "vidattack/tensor.hpp"

namespace vidattack {

using Label = int;

/// Everything an attack may learn from one forward pass.
struct VictimResponse {
  Label label = 0;
  double probability = 0.0;

  friend bool operator==(const VictimResponse&, const VictimResponse&) = default;
};

/// A black-box classifier. Implementations must be reentrant; sessions call
/// classify() from whatever thread drives the attack.
class Victim {
 public:
  virtual ~Victim() = default;
  virtual Shape input_shape() const = 0;
  virtual int num_classes() const = 0;
  virtual VictimResponse classify(const VideoTensor& x) const = 0;
};

/// argmax_k <w_k, x> + b_k, probability from a softmax at temperature tau.
class LinearSoftmaxVictim final : public Victim {
 public:
  LinearSoftmaxVictim(std::vector<VideoTensor> weights, std::vector<double> biases,
                      double temperature = 1.0)
      : weights_(std::move(weights)), biases_(std::move(biases)), temperature_(temperature) {
    if (weights_.size() < 2) throw Error(Errc::InvalidArgument, "need at least two classes");
    if (biases_.size() != weights_.size()) throw Error(Errc::InvalidArgument, "one bias per class");
    if (!(temperature_ > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be > 0");
    for (const auto& w : weights_) require_same_shape(w.shape(), weights_.front().shape());
  }

  Shape input_shape() const override { return weights_.front().shape(); }
  int num_classes() const override { return static_cast<int>(weights_.size()); }

  std::vector<double> scores(const VideoTensor& x) const {
    require_same_shape(x.shape(), input_shape());
    std::vector<double> s(weights_.size());
    for (std::size_t k = 0; k < weights_.size(); ++k) s[k] = dot(weights_[k], x) + biases_[k];
    return s;
  }

  VictimResponse classify(const VideoTensor& x) const override {
    const auto s = scores(x);
    // Lowest index wins ties.
    const auto best = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    double denom = 0.0;
    for (double v : s) denom += std::exp((v - s[best]) / temperature_);
    return {static_cast<Label>(best), 1.0 / denom};
  }

  const std::vector<VideoTensor>& weights() const noexcept { return weights_; }
  const std::vector<double>& biases() const noexcept { return biases_; }
  double temperature() const noexcept { return temperature_; }

 private:
  std::vector<VideoTensor> weights_;
  std::vector<double> biases_;
  double temperature_;
};

/// Zeroes a fixed set of frames before delegating, so the output cannot
/// depend on anything inside those frames.
class FrameObliviousVictim final : public Victim {
 public:
  FrameObliviousVictim(std::shared_ptr<const Victim> inner, std::set<std::size_t> ignored)
      : inner_(std::move(inner)), ignored_(std::move(ignored)) {
    for (auto t : ignored_) {
      if (t >= inner_->input_shape().frames) throw Error(Errc::FrameOutOfRange, "ignored frame");
    }
    // A linear model can absorb the blanking into its weights, which saves a
    // full copy of the input per query and yields identical scores.
    if (const auto* linear = dynamic_cast<const LinearSoftmaxVictim*>(inner_.get())) {
      std::vector<VideoTensor> weights = linear->weights();
      for (auto& w : weights) {
        const std::size_t fs = w.shape().frame_size();
        for (auto t : ignored_) std::fill_n(w.values().begin() + static_cast<std::ptrdiff_t>(t * fs), fs, 0.0);
      }
      folded_ = std::make_shared<LinearSoftmaxVictim>(std::move(weights), linear->biases(), linear->temperature());
    }
  }

  Shape input_shape() const override { return inner_->input_shape(); }
  int num_classes() const override { return inner_->num_classes(); }

  VictimResponse classify(const VideoTensor& x) const override {
    require_same_shape(x.shape(), input_shape());
    if (folded_) return folded_->classify(x);
    VideoTensor blanked = x;
    const std::size_t fs = x.shape().frame_size();
    for (auto t : ignored_) {
      std::fill_n(blanked.values().begin() + static_cast<std::ptrdiff_t>(t * fs), fs, 0.0);
    }
    return inner_->classify(blanked);
  }

  const std::set<std::size_t>& ignored_frames() const noexcept { return ignored_; }
  const Victim& inner() const noexcept { return *inner_; }

 private:
  std::shared_ptr<const Victim> inner_;
  std::set<std::size_t> ignored_;
  std::shared_ptr<const LinearSoftmaxVictim> folded_;
};

/// Wraps an arbitrary callable; mostly useful for tests and scripted oracles.
class FunctionVictim final : public Victim {
 public:
  using Fn = std::function<VictimResponse(const VideoTensor&)>;

  FunctionVictim(Shape shape, int classes, Fn fn) : shape_(shape), classes_(classes), fn_(std::move(fn)) {}

  Shape input_shape() const override { return shape_; }
  int num_classes() const override { return classes_; }
  VictimResponse classify(const VideoTensor& x) const override {
    require_same_shape(x.shape(), shape_);
    return fn_(x);
  }

 private:
  Shape shape_;
  int classes_;
  Fn fn_;
};

enum class QueryPurpose : std::uint8_t {
  Clean,
  Init,
  Ranking,
  Prune,
  GEval,
  LineSearch,
  Verify,
  Other,
};
inline constexpr std::size_t kQueryPurposeCount = 8;

constexpr std::string_view to_string(QueryPurpose p) noexcept {
  switch (p) {
    case QueryPurpose::Clean: return "clean";
    case QueryPurpose::Init: return "init";
    case QueryPurpose::Ranking: return "ranking";
    case QueryPurpose::Prune: return "prune";
    case QueryPurpose::GEval: return "g-eval";
    case QueryPurpose::LineSearch: return "line-search";
    case QueryPurpose::Verify: return "verify";
    case QueryPurpose::Other: return "other";
  }
  return "other";
}

struct QueryRecord {
  std::uint64_t index;
  QueryPurpose purpose;
  Label label;
  double probability;
};

/// One attack's view of a victim. The counter moves by exactly one per
/// completed forward pass; rejected inputs and transport failures leave it
/// untouched. Single consumer.
class QuerySession {
 public:
  explicit QuerySession(const Victim& victim) : victim_(&victim) {}

  VictimResponse query(const VideoTensor& x) {
    require_same_shape(x.shape(), victim_->input_shape());
    if (limit_ && count_ >= *limit_) {
      throw Error(Errc::BudgetExhausted, "query budget of " + std::to_string(*limit_) + " reached");
    }
    VictimResponse r = victim_->classify(x);
    ++count_;
    ++by_purpose_[static_cast<std::size_t>(purpose_)];
    if (log_enabled_) log_.push_back({count_, purpose_, r.label, r.probability});
    return r;
  }

  std::uint64_t count() const noexcept { return count_; }
  void reset_count() noexcept {
    count_ = 0;
    by_purpose_.fill(0);
    log_.clear();
  }

  std::uint64_t count(QueryPurpose p) const noexcept { return by_purpose_[static_cast<std::size_t>(p)]; }

  /// Cap on the absolute counter; queries beyond it throw BudgetExhausted.
  void set_limit(std::optional<std::uint64_t> limit) noexcept { limit_ = limit; }
  std::optional<std::uint64_t> limit() const noexcept { return limit_; }

  QueryPurpose purpose() const noexcept { return purpose_; }
  void set_purpose(QueryPurpose p) noexcept { purpose_ = p; }

  void enable_log(bool on) noexcept { log_enabled_ = on; }
  const std::vector<QueryRecord>& log() const noexcept { return log_; }

  const Victim& victim() const noexcept { return *victim_; }

 private:
  const Victim* victim_;
  std::uint64_t count_ = 0;
  std::optional<std::uint64_t> limit_;
  QueryPurpose purpose_ = QueryPurpose::Other;
  std::array<std::uint64_t, kQueryPurposeCount> by_purpose_{};
  bool log_enabled_ = false;
  std::vector<QueryRecord> log_;
};

/// Tags queries issued inside a scope, restoring the previous tag on exit.
class PurposeScope {
 public:
  PurposeScope(QuerySession& s, QueryPurpose p) : session_(s), saved_(s.purpose()) { s.set_purpose(p); }
  ~PurposeScope() { session_.set_purpose(saved_); }
  PurposeScope(const PurposeScope&) = delete;
  PurposeScope& operator=(const PurposeScope&) = delete;

 private:
  QuerySession& session_;
  QueryPurpose saved_;
};

}  // namespace vidattack
