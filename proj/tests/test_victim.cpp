#include <gtest/gtest.h>

#include "helpers.hpp"
#include "vidattack/victim.hpp"

using namespace vidattack;
using testing_helpers::random_video;

namespace {

LinearSoftmaxVictim plus_minus_victim(Shape s) {
  return LinearSoftmaxVictim({VideoTensor(s, 1.0), VideoTensor(s, -1.0)}, {0.0, 0.0});
}

}  // namespace

TEST(LinearSoftmaxVictim, SignOfScoreDifference) {
  const Shape s{2, 2, 2, 1};
  const auto v = plus_minus_victim(s);
  const VictimResponse r = v.classify(VideoTensor(s, 10.0));
  EXPECT_EQ(r.label, 0);
  EXPECT_GT(r.probability, 0.5);
  EXPECT_LE(r.probability, 1.0);
  EXPECT_EQ(v.classify(VideoTensor(s, -10.0)).label, 1);
}

TEST(LinearSoftmaxVictim, SoftmaxProbabilityAndTemperature) {
  const Shape s{1, 1, 1, 1};
  const LinearSoftmaxVictim v({VideoTensor(s, 1.0), VideoTensor(s, 0.0)}, {0.0, 0.0}, 2.0);
  const VictimResponse r = v.classify(VideoTensor(s, 2.0));
  EXPECT_EQ(r.label, 0);
  EXPECT_NEAR(r.probability, 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(LinearSoftmaxVictim, LowestIndexWinsTies) {
  const Shape s{1, 1, 1, 1};
  const LinearSoftmaxVictim v({VideoTensor(s, 0.0), VideoTensor(s, 0.0), VideoTensor(s, 0.0)}, {1.0, 1.0, 1.0});
  const VictimResponse r = v.classify(VideoTensor(s, 5.0));
  EXPECT_EQ(r.label, 0);
  EXPECT_NEAR(r.probability, 1.0 / 3.0, 1e-15);
}

TEST(LinearSoftmaxVictim, LabelInvariantToCommonWeightShift) {
  const Shape s{2, 3, 3, 1};
  std::vector<VideoTensor> w;
  for (int k = 0; k < 4; ++k) w.push_back(random_video(s, 100 + k, -1.0, 1.0));
  const LinearSoftmaxVictim base(w, {0.1, -0.2, 0.3, 0.0});
  const VideoTensor shift = random_video(s, 99, -5.0, 5.0);
  for (auto& wk : w) wk += shift;
  const LinearSoftmaxVictim shifted(w, {0.1, -0.2, 0.3, 0.0});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const VideoTensor x = random_video(s, seed, -10.0, 10.0);
    EXPECT_EQ(base.classify(x).label, shifted.classify(x).label);
  }
}

TEST(LinearSoftmaxVictim, RejectsBadConstruction) {
  const Shape s{1, 1, 1, 1};
  EXPECT_THROW(LinearSoftmaxVictim({VideoTensor(s)}, {0.0}), Error);
  EXPECT_THROW(LinearSoftmaxVictim({VideoTensor(s), VideoTensor(s)}, {0.0}), Error);
  EXPECT_THROW(LinearSoftmaxVictim({VideoTensor(s), VideoTensor(s)}, {0.0, 0.0}, 0.0), Error);
}

TEST(FrameObliviousVictim, IgnoresChangesInIgnoredFrames) {
  const Shape s{5, 3, 3, 2};
  auto inner = std::make_shared<LinearSoftmaxVictim>(
      std::vector<VideoTensor>{random_video(s, 1, -1, 1), random_video(s, 2, -1, 1)}, std::vector<double>{0.0, 0.0});
  const FrameObliviousVictim v(inner, {3});
  const VideoTensor x = random_video(s, 3);
  VideoTensor noisy = x;
  const VideoTensor noise = random_video(s, 4);
  for (std::size_t i = 3 * s.frame_size(); i < 4 * s.frame_size(); ++i) noisy[i] = noise[i];
  EXPECT_EQ(v.classify(x), v.classify(noisy));
}

TEST(FrameObliviousVictim, MatchesExplicitBlanking) {
  const Shape s{4, 2, 2, 1};
  auto inner = std::make_shared<LinearSoftmaxVictim>(
      std::vector<VideoTensor>{random_video(s, 5, -1, 1), random_video(s, 6, -1, 1), random_video(s, 7, -1, 1)},
      std::vector<double>{0.5, 0.0, -0.5});
  const FrameObliviousVictim v(inner, {0, 2});
  // A generic victim takes the copying path.
  auto generic = std::make_shared<FunctionVictim>(s, 3, [&](const VideoTensor& x) { return inner->classify(x); });
  const FrameObliviousVictim slow(generic, {0, 2});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const VideoTensor x = random_video(s, seed);
    VideoTensor blanked = x;
    for (std::size_t t : {0u, 2u}) {
      for (std::size_t i = 0; i < s.frame_size(); ++i) blanked[t * s.frame_size() + i] = 0.0;
    }
    EXPECT_EQ(v.classify(x), inner->classify(blanked));
    EXPECT_EQ(slow.classify(x), inner->classify(blanked));
  }
  EXPECT_THROW(FrameObliviousVictim(inner, {4}), Error);
}

TEST(QuerySession, CountsEveryQuery) {
  const Shape s{1, 2, 2, 1};
  const auto v = plus_minus_victim(s);
  QuerySession session(v);
  EXPECT_EQ(session.count(), 0u);
  for (int i = 0; i < 3; ++i) session.query(VideoTensor(s, 1.0));
  EXPECT_EQ(session.count(), 3u);
}

TEST(QuerySession, Reset) {
  const Shape s{1, 2, 2, 1};
  const auto v = plus_minus_victim(s);
  QuerySession fresh(v);
  fresh.reset_count();
  EXPECT_EQ(fresh.count(), 0u);

  QuerySession session(v);
  for (int i = 0; i < 5; ++i) session.query(VideoTensor(s, 1.0));
  session.reset_count();
  EXPECT_EQ(session.count(), 0u);
  session.query(VideoTensor(s, 1.0));
  session.query(VideoTensor(s, 1.0));
  EXPECT_EQ(session.count(), 2u);
}

TEST(QuerySession, ShapeMismatchIsNotCounted) {
  const auto v = plus_minus_victim(Shape{1, 2, 2, 1});
  QuerySession session(v);
  try {
    session.query(VideoTensor(Shape{1, 2, 2, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
  EXPECT_EQ(session.count(), 0u);
}

TEST(QuerySession, LimitAndPurposes) {
  const Shape s{1, 1, 1, 1};
  const auto v = plus_minus_victim(s);
  QuerySession session(v);
  session.enable_log(true);
  {
    PurposeScope scope(session, QueryPurpose::Ranking);
    session.query(VideoTensor(s, 1.0));
    {
      PurposeScope inner(session, QueryPurpose::Verify);
      session.query(VideoTensor(s, 1.0));
    }
    session.query(VideoTensor(s, 1.0));
  }
  EXPECT_EQ(session.purpose(), QueryPurpose::Other);
  EXPECT_EQ(session.count(QueryPurpose::Ranking), 2u);
  EXPECT_EQ(session.count(QueryPurpose::Verify), 1u);
  ASSERT_EQ(session.log().size(), 3u);
  EXPECT_EQ(session.log()[1].purpose, QueryPurpose::Verify);
  EXPECT_EQ(session.log()[2].index, 3u);

  session.set_limit(4);
  session.query(VideoTensor(s, 1.0));
  try {
    session.query(VideoTensor(s, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BudgetExhausted);
  }
  EXPECT_EQ(session.count(), 4u);
}
