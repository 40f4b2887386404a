#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidattack/tensor.hpp"

namespace vidattack {

/// Mean absolute perturbation over every element of the video.
template <class Tag>
double map(const Tensor<Tag>& perturbation) noexcept {
  double sum = 0.0;
  for (double v : perturbation.values()) sum += std::abs(v);
  return sum / static_cast<double>(perturbation.size());
}

/// Mean absolute perturbation over the selected elements only.
template <class Tag>
double map_masked(const Tensor<Tag>& perturbation, const BinaryMask& mask) {
  require_same_shape(perturbation.shape(), mask.shape());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < perturbation.size(); ++i) {
    if (mask[i]) {
      sum += std::abs(perturbation[i]);
      ++n;
    }
  }
  if (n == 0) throw Error(Errc::EmptyMask, "MAP* needs at least one selected element");
  return sum / static_cast<double>(n);
}

/// S = 1 - mean over frames of the per-frame selected fraction.
inline double sparsity(const BinaryMask& mask) noexcept {
  // Every frame has the same size, so the mean of the per-frame ratios is
  // the overall ratio; one division keeps the result correctly rounded.
  return 1.0 - static_cast<double>(mask.count()) / static_cast<double>(mask.size());
}

/// One attacked video as it enters the aggregate.
struct ResultRow {
  std::string id;
  bool success = false;
  bool errored = false;
  std::uint64_t queries = 0;
  double map = 0.0;
  double map_masked = 0.0;
  double sparsity = 0.0;
};

struct MetricsSummary {
  std::size_t attempted = 0;
  std::size_t errored = 0;
  double fooling_rate = 0.0;
  double median_queries = 0.0;
  // Over successful attacks.
  double map_mean = std::numeric_limits<double>::quiet_NaN();
  double map_masked_mean = std::numeric_limits<double>::quiet_NaN();
  double sparsity_mean = std::numeric_limits<double>::quiet_NaN();
  // Over every attempted attack, failures included.
  double map_mean_all = std::numeric_limits<double>::quiet_NaN();
  double map_masked_mean_all = std::numeric_limits<double>::quiet_NaN();
  double sparsity_mean_all = std::numeric_limits<double>::quiet_NaN();
  std::vector<ResultRow> rows;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error(Errc::EmptyBatch, "median of nothing");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

/// FR and MQ over attempted (non-errored) rows; the perturbation means are
/// reported both over successes and over all attempted rows.
inline MetricsSummary aggregate(std::vector<ResultRow> rows) {
  if (rows.empty()) throw Error(Errc::EmptyBatch, "no results to aggregate");
  MetricsSummary s;
  // Sorting by id makes every floating-point sum independent of input order.
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.id < b.id; });

  std::vector<double> queries;
  std::size_t successes = 0;
  double map_s = 0, mapm_s = 0, sp_s = 0, map_a = 0, mapm_a = 0, sp_a = 0;
  for (const auto& r : rows) {
    if (r.errored) {
      ++s.errored;
      continue;
    }
    ++s.attempted;
    queries.push_back(static_cast<double>(r.queries));
    map_a += r.map;
    mapm_a += r.map_masked;
    sp_a += r.sparsity;
    if (r.success) {
      ++successes;
      map_s += r.map;
      mapm_s += r.map_masked;
      sp_s += r.sparsity;
    }
  }
  s.rows = std::move(rows);
  if (s.attempted == 0) throw Error(Errc::EmptyBatch, "every run errored");
  const auto n = static_cast<double>(s.attempted);
  s.fooling_rate = static_cast<double>(successes) / n;
  s.median_queries = median(std::move(queries));
  s.map_mean_all = map_a / n;
  s.map_masked_mean_all = mapm_a / n;
  s.sparsity_mean_all = sp_a / n;
  if (successes > 0) {
    const auto k = static_cast<double>(successes);
    s.map_mean = map_s / k;
    s.map_masked_mean = mapm_s / k;
    s.sparsity_mean = sp_s / k;
  }
  return s;
}

namespace detail {
inline nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}
}  // namespace detail

inline nlohmann::ordered_json to_json(const ResultRow& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["success"] = r.success;
  j["queries"] = r.queries;
  j["map"] = detail::number_or_null(r.map);
  j["map_masked"] = detail::number_or_null(r.map_masked);
  j["sparsity"] = detail::number_or_null(r.sparsity);
  if (r.errored) j["errored"] = true;
  return j;
}

inline nlohmann::ordered_json summary_json(const MetricsSummary& s) {
  nlohmann::ordered_json j;
  j["fr"] = s.fooling_rate;
  j["mq"] = s.median_queries;
  j["map"] = detail::number_or_null(s.map_mean);
  j["map_masked"] = detail::number_or_null(s.map_masked_mean);
  j["s"] = detail::number_or_null(s.sparsity_mean);
  j["map_all"] = detail::number_or_null(s.map_mean_all);
  j["map_masked_all"] = detail::number_or_null(s.map_masked_mean_all);
  j["s_all"] = detail::number_or_null(s.sparsity_mean_all);
  j["attempted"] = s.attempted;
  j["errored"] = s.errored;
  return j;
}

/// {"config":..., "rows":[...], "summary":{...}} with a fixed key order.
inline nlohmann::ordered_json report_json(const nlohmann::ordered_json& config, const MetricsSummary& s) {
  nlohmann::ordered_json j;
  j["config"] = config;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : s.rows) j["rows"].push_back(to_json(r));
  j["summary"] = summary_json(s);
  return j;
}

/// Whitespace-separated flat export, one row per line, for gnuplot and friends.
inline std::string rows_tsv(const MetricsSummary& s) {
  std::string out = "id\tsuccess\tqueries\tmap\tmap_masked\tsparsity\n";
  for (const auto& r : s.rows) {
    out += r.id + '\t' + (r.success ? "1" : "0") + '\t' + std::to_string(r.queries) + '\t' +
           std::to_string(r.map) + '\t' + std::to_string(r.map_masked) + '\t' + std::to_string(r.sparsity) + '\n';
  }
  return out;
}

}  // namespace vidattack
