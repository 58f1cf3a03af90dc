#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace faithlm::backend {

/// Local chat endpoint serving canned replies, for exercising the HTTP
/// backend without a provider. Listens on 127.0.0.1 at an ephemeral port
/// unless one is given.
class FixtureServer {
 public:
  struct Reply {
    int status = 200;
    std::string body;
  };
  using Handler = std::function<Reply(const nlohmann::json& request_body)>;

  explicit FixtureServer(Handler handler, int port = 0);
  /// Serves `body` with status 200 for every POST /chat.
  static FixtureServer fixed(std::string body, int port = 0);

  FixtureServer(FixtureServer&&) noexcept;
  ~FixtureServer();

  int port() const { return port_; }
  std::string base_url() const;

  /// Request bodies received so far, in arrival order.
  std::vector<nlohmann::json> requests() const;
  std::vector<std::string> authorization_headers() const;

  /// Blocks until the server is stopped (used by the standalone tool).
  void wait();
  void stop();

 private:
  struct State;
  std::unique_ptr<State> state_;
  int port_ = 0;
};

}  // namespace faithlm::backend
