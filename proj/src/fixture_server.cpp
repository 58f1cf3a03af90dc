#include "faithlm/fixture_server.hpp"

#include <httplib.h>

#include "faithlm/errors.hpp"

namespace faithlm::backend {

struct FixtureServer::State {
  httplib::Server server;
  Handler handler;
  std::thread thread;
  mutable std::mutex mu;
  std::vector<nlohmann::json> requests;
  std::vector<std::string> auth;
};

FixtureServer::FixtureServer(Handler handler, int port) : state_(std::make_unique<State>()) {
  state_->handler = std::move(handler);
  State* st = state_.get();
  st->server.Post(R"(.*/chat)", [st](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    {
      std::lock_guard lock(st->mu);
      st->requests.push_back(body);
      st->auth.push_back(req.get_header_value("Authorization"));
    }
    Reply reply = st->handler(body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  if (port == 0) {
    port_ = st->server.bind_to_any_port("127.0.0.1");
  } else if (st->server.bind_to_port("127.0.0.1", port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::Io, "fixture server could not bind");
  st->thread = std::thread([st] { st->server.listen_after_bind(); });
  st->server.wait_until_ready();
}

FixtureServer FixtureServer::fixed(std::string body, int port) {
  return FixtureServer([body = std::move(body)](const nlohmann::json&) { return Reply{200, body}; },
                       port);
}

FixtureServer::FixtureServer(FixtureServer&&) noexcept = default;

FixtureServer::~FixtureServer() { stop(); }

std::string FixtureServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(port_);
}

std::vector<nlohmann::json> FixtureServer::requests() const {
  std::lock_guard lock(state_->mu);
  return state_->requests;
}

std::vector<std::string> FixtureServer::authorization_headers() const {
  std::lock_guard lock(state_->mu);
  return state_->auth;
}

void FixtureServer::wait() {
  if (state_ && state_->thread.joinable()) state_->thread.join();
}

void FixtureServer::stop() {
  if (!state_) return;
  state_->server.stop();
  if (state_->thread.joinable()) state_->thread.join();
}

}  // namespace faithlm::backend
