#pragma once

// HTTP transport for victims: POST /v1/classify with a JSON tensor body,
// answered by {"label":int,"probability":float}.

#include <memory>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "vidattack/victim.hpp"

namespace vidattack {

namespace wire {

inline std::string encode_request(const VideoTensor& x) {
  nlohmann::json body;
  body["t"] = x.shape().frames;
  body["w"] = x.shape().width;
  body["h"] = x.shape().height;
  body["c"] = x.shape().channels;
  body["data"] = std::vector<double>(x.values().begin(), x.values().end());
  return body.dump();
}

inline std::string encode_response(const VictimResponse& r) {
  nlohmann::json body;
  body["label"] = r.label;
  body["probability"] = r.probability;
  return body.dump();
}

}  // namespace wire

/// Victim living behind the wire protocol. Any transport failure or 5xx is
/// RemoteUnavailable; the session only counts replies that came back 200.
class RemoteVictim final : public Victim {
 public:
  RemoteVictim(std::string base_url, Shape shape, int classes, time_t timeout_sec = 30)
      : base_url_(std::move(base_url)), shape_(shape), classes_(classes), timeout_sec_(timeout_sec) {}

  Shape input_shape() const override { return shape_; }
  int num_classes() const override { return classes_; }

  VictimResponse classify(const VideoTensor& x) const override {
    require_same_shape(x.shape(), shape_);
    // httplib::Client is not safe for concurrent use; one per call keeps
    // this reentrant.
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_sec_);
    client.set_read_timeout(timeout_sec_);
    auto res = client.Post("/v1/classify", wire::encode_request(x), "application/json");
    if (!res) {
      throw Error(Errc::RemoteUnavailable, base_url_ + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 422) throw Error(Errc::ShapeMismatch, res->body);
    if (res->status >= 400 && res->status < 500) throw Error(Errc::InvalidArgument, res->body);
    if (res->status != 200) {
      throw Error(Errc::RemoteUnavailable, "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      auto body = nlohmann::json::parse(res->body);
      VictimResponse r{body.at("label").get<Label>(), body.at("probability").get<double>()};
      if (r.probability < 0.0 || r.probability > 1.0 || r.label < 0 || r.label >= classes_) {
        throw Error(Errc::RemoteUnavailable, "response out of range");
      }
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::RemoteUnavailable, std::string("unparseable response: ") + e.what());
    }
  }

 private:
  std::string base_url_;
  Shape shape_;
  int classes_;
  time_t timeout_sec_;
};

/// Serves a victim over the wire protocol on a background thread until
/// destroyed or stop() is called.
class VictimServer {
 public:
  VictimServer(std::shared_ptr<const Victim> victim, const std::string& host, int port)
      : victim_(std::move(victim)) {
    server_.Post("/v1/classify", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    // No SO_REUSEPORT: a second server on a busy port must fail to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
    });
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
    } else {
      port_ = server_.bind_to_port(host, port) ? port : -1;
    }
    if (port_ < 0) {
      throw Error(Errc::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
    }
    host_ = host;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~VictimServer() { stop(); }
  VictimServer(const VictimServer&) = delete;
  VictimServer& operator=(const VictimServer&) = delete;

  int port() const noexcept { return port_; }
  std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }
  std::uint64_t requests_served() const noexcept { return served_.load(); }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  /// Blocks the calling thread until the server is stopped.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    std::vector<double> data;
    Shape shape;
    try {
      body = nlohmann::json::parse(req.body);
      shape = Shape{body.at("t").get<std::uint32_t>(), body.at("w").get<std::uint32_t>(),
                    body.at("h").get<std::uint32_t>(), body.at("c").get<std::uint32_t>()};
      data = body.at("data").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      res.status = 400;
      res.set_content(std::string("malformed request: ") + e.what(), "text/plain");
      return;
    }
    const Shape expected = victim_->input_shape();
    if (shape != expected) {
      res.status = 422;
      res.set_content("expected dims " + to_string(expected) + ", got " + to_string(shape), "text/plain");
      return;
    }
    if (data.size() != shape.size()) {
      res.status = 400;
      res.set_content("data length does not match dims", "text/plain");
      return;
    }
    try {
      VideoTensor x(shape, std::move(data));
      const VictimResponse r = victim_->classify(x);
      ++served_;
      res.set_content(wire::encode_response(r), "application/json");
    } catch (const Error& e) {
      res.status = e.code() == Errc::InvalidArgument ? 400 : 500;
      res.set_content(e.what(), "text/plain");
    }
  }

  std::shared_ptr<const Victim> victim_;
  httplib::Server server_;
  std::string host_;
  int port_ = -1;
  std::atomic<std::uint64_t> served_{0};
  std::thread thread_;
};

inline std::unique_ptr<VictimServer> serve_victim(std::shared_ptr<const Victim> victim,
                                                  const std::string& host = "127.0.0.1", int port = 0) {
  return std::make_unique<VictimServer>(std::move(victim), host, port);
}

}  // namespace vidattack
