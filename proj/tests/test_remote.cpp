#include <gtest/gtest.h>

#include "helpers.hpp"
#include "httplib.h"
#include "json.hpp"
#include "vidattack/remote.hpp"

using namespace vidattack;
using testing_helpers::random_video;

namespace {

std::shared_ptr<const Victim> linear_victim(Shape s) {
  return std::make_shared<LinearSoftmaxVictim>(
      std::vector<VideoTensor>{random_video(s, 1, -1, 1), random_video(s, 2, -1, 1), random_video(s, 3, -1, 1)},
      std::vector<double>{0.0, 1.0, -1.0}, 40.0);
}

}  // namespace

TEST(Remote, TransparentAgainstInProcessVictim) {
  const Shape s{2, 4, 4, 3};
  const auto victim = linear_victim(s);
  auto server = serve_victim(victim);
  const RemoteVictim remote(server->url(), s, 3);
  QuerySession session(remote);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const VideoTensor x = random_video(s, seed);
    EXPECT_EQ(session.query(x), victim->classify(x));
  }
  EXPECT_EQ(session.count(), 10u);
  EXPECT_EQ(server->requests_served(), 10u);
}

TEST(Remote, MalformedBodyIs400AndNotCounted) {
  const Shape s{1, 8, 8, 1};
  auto server = serve_victim(linear_victim(s));
  httplib::Client client(server->url());
  auto res = client.Post("/v1/classify", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  res = client.Post("/v1/classify", R"({"t":1,"w":8,"h":8,"c":1,"data":[1,2]})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(server->requests_served(), 0u);
}

TEST(Remote, WrongDimsIs422WithMessage) {
  const Shape s{1, 8, 8, 1};
  auto server = serve_victim(linear_victim(s));
  httplib::Client client(server->url());
  const auto body = wire::encode_request(VideoTensor(Shape{1, 4, 4, 1}, 1.0));
  auto res = client.Post("/v1/classify", body, "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  EXPECT_NE(res->body.find("1x8x8x1"), std::string::npos) << res->body;

  // A client configured with the wrong shape sees ShapeMismatch and counts nothing.
  const RemoteVictim wrong(server->url(), Shape{1, 4, 4, 1}, 3);
  QuerySession session(wrong);
  try {
    session.query(VideoTensor(Shape{1, 4, 4, 1}, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
  EXPECT_EQ(session.count(), 0u);
}

TEST(Remote, WireFormat) {
  const auto req = nlohmann::json::parse(wire::encode_request(VideoTensor(Shape{1, 1, 2, 1}, {0.5, 2.0})));
  EXPECT_EQ(req["t"], 1);
  EXPECT_EQ(req["h"], 2);
  EXPECT_EQ(req["data"][1], 2.0);
  const auto res = nlohmann::json::parse(wire::encode_response({3, 0.25}));
  EXPECT_EQ(res["label"], 3);
  EXPECT_EQ(res["probability"], 0.25);
}

TEST(Remote, UnreachableServerIsFatalAndUncounted) {
  int port = 0;
  {
    auto server = serve_victim(linear_victim(Shape{1, 2, 2, 1}));
    port = server->port();
  }
  const RemoteVictim remote("http://127.0.0.1:" + std::to_string(port), Shape{1, 2, 2, 1}, 3, 2);
  QuerySession session(remote);
  try {
    session.query(VideoTensor(Shape{1, 2, 2, 1}, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RemoteUnavailable);
  }
  EXPECT_EQ(session.count(), 0u);
}

TEST(Remote, BindFailure) {
  auto first = serve_victim(linear_victim(Shape{1, 2, 2, 1}));
  try {
    VictimServer second(linear_victim(Shape{1, 2, 2, 1}), "127.0.0.1", first->port());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BindFailure);
  }
}
