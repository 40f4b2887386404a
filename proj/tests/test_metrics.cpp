#include <gtest/gtest.h>

#include "helpers.hpp"
#include "vidattack/metrics.hpp"

using namespace vidattack;

namespace {

ResultRow row(std::string id, bool success, std::uint64_t queries, double map = 1.0) {
  return {std::move(id), success, false, queries, map, 2.0 * map, 0.5};
}

}  // namespace

TEST(Map, HandValues) {
  const Shape s{2, 2, 1, 1};
  EXPECT_EQ(map(Direction(s)), 0.0);
  EXPECT_EQ(map(Direction(s, -2.0)), 2.0);
  EXPECT_EQ(map(Direction(s, {0.0, 4.0, 0.0, 4.0})), 2.0);
}

TEST(MapMasked, HandValues) {
  const Shape s{2, 2, 1, 1};
  const Direction p(s, {1.0, -3.0, 5.0, 8.0});
  EXPECT_EQ(map_masked(p, BinaryMask::ones(s)), map(p));
  BinaryMask one = BinaryMask::zeros(s);
  one.set(3, true);
  EXPECT_EQ(map_masked(p, one), 8.0);
  try {
    map_masked(p, BinaryMask::zeros(s));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyMask);
  }
}

TEST(Sparsity, HandValues) {
  const Shape s{16, 5, 2, 1};
  EXPECT_EQ(sparsity(BinaryMask::ones(s)), 0.0);
  BinaryMask four = BinaryMask::zeros(s);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t i = 0; i < s.frame_size(); ++i) four.set(t * s.frame_size() + i, true);
  }
  EXPECT_EQ(sparsity(four), 0.75);
  BinaryMask forty = BinaryMask::zeros(s);
  for (std::size_t t = 0; t < 16; ++t) {
    for (std::size_t i = 0; i < 4; ++i) forty.set(t * s.frame_size() + (i * 7 + t) % 10, true);
  }
  EXPECT_EQ(sparsity(forty), 0.6);
}

TEST(Sparsity, InvariantUnderFramePermutation) {
  const Shape s{5, 3, 2, 1};
  std::mt19937_64 rng(1);
  BinaryMask m = BinaryMask::zeros(s);
  for (std::size_t i = 0; i < s.size(); ++i) m.set(i, rng() % 3 == 0);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  BinaryMask p = BinaryMask::zeros(s);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t i = 0; i < s.frame_size(); ++i) p.set(perm[t] * s.frame_size() + i, m[t * s.frame_size() + i]);
  }
  EXPECT_EQ(sparsity(p), sparsity(m));
}

TEST(MapMasked, RelatesToMapOnMaskedSupport) {
  const Shape s{4, 4, 4, 2};
  std::mt19937_64 rng(2);
  BinaryMask m = BinaryMask::zeros(s);
  for (std::size_t i = 0; i < s.size(); ++i) m.set(i, rng() % 2 == 0);
  const Direction p = apply_mask(testing_helpers::random_direction(s, 3), m);
  const double fraction = static_cast<double>(m.count()) / static_cast<double>(s.size());
  EXPECT_NEAR(map(p), map_masked(p, m) * fraction, 1e-12);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({10, 30, 20}), 20.0);
  EXPECT_EQ(median({10, 20, 30, 40}), 25.0);
  EXPECT_THROW(median({}), Error);
}

TEST(Aggregate, FoolingRateMedianAndMeans) {
  const auto s = aggregate({row("a", true, 10, 1.0), row("b", false, 20, 3.0), row("c", true, 30, 5.0),
                            row("d", false, 40, 7.0)});
  EXPECT_EQ(s.attempted, 4u);
  EXPECT_EQ(s.fooling_rate, 0.5);
  EXPECT_EQ(s.median_queries, 25.0);
  EXPECT_EQ(s.map_mean, 3.0);
  EXPECT_EQ(s.map_masked_mean, 6.0);
  EXPECT_EQ(s.map_mean_all, 4.0);
  EXPECT_EQ(s.sparsity_mean, 0.5);
}

TEST(Aggregate, ErroredRowsAreExcluded) {
  ResultRow broken = row("e", false, 999);
  broken.errored = true;
  const auto s = aggregate({row("a", true, 10), row("b", true, 30), broken});
  EXPECT_EQ(s.attempted, 2u);
  EXPECT_EQ(s.errored, 1u);
  EXPECT_EQ(s.median_queries, 20.0);
  EXPECT_EQ(s.fooling_rate, 1.0);
  EXPECT_THROW(aggregate({}), Error);
  EXPECT_THROW(aggregate({broken}), Error);
}

TEST(Aggregate, NoSuccessesGivesNullMeans) {
  const auto s = aggregate({row("a", false, 10)});
  EXPECT_TRUE(std::isnan(s.map_mean));
  EXPECT_TRUE(summary_json(s)["map"].is_null());
  EXPECT_EQ(summary_json(s)["map_all"], 1.0);
}

TEST(Aggregate, OrderInvariant) {
  std::vector<ResultRow> rows;
  for (int i = 0; i < 9; ++i) rows.push_back(row("r" + std::to_string(i), i % 3 != 0, 100 + i * 7, 0.1 * i + 0.01));
  const auto a = report_json({}, aggregate(rows)).dump();
  std::reverse(rows.begin(), rows.end());
  std::swap(rows[1], rows[5]);
  EXPECT_EQ(report_json({}, aggregate(rows)).dump(), a);
}

TEST(Report, SchemaAndKeyOrder) {
  const auto j = report_json({{"k", 1}}, aggregate({row("a", true, 10)}));
  std::vector<std::string> keys;
  for (const auto& item : j.items()) keys.push_back(item.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"config", "rows", "summary"}));
  std::vector<std::string> row_keys;
  for (const auto& item : j["rows"][0].items()) row_keys.push_back(item.key());
  EXPECT_EQ(row_keys, (std::vector<std::string>{"id", "success", "queries", "map", "map_masked", "sparsity"}));
  for (const char* k : {"fr", "mq", "map", "map_masked", "s"}) EXPECT_TRUE(j["summary"].contains(k)) << k;
}

TEST(Report, FlatExport) {
  const auto tsv = rows_tsv(aggregate({row("a", true, 10), row("b", false, 12)}));
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 3);
  EXPECT_EQ(tsv.rfind("b\t0\t12\t", std::string::npos) != std::string::npos, true);
}
