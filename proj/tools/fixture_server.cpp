// Serves a fixed chat-completion body on 127.0.0.1 for manual runs of the
// http backend: fixture_server --body reply.json [--port 8080]
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "faithlm/errors.hpp"
#include "faithlm/fixture_server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Local chat endpoint returning one canned reply"};
  std::string body_path;
  int port = 0;
  app.add_option("--body", body_path, "file holding the JSON reply body")->required();
  app.add_option("--port", port, "port to bind (0 picks a free one)");
  CLI11_PARSE(app, argc, argv);

  std::ifstream in(body_path);
  if (!in) {
    std::cerr << "error: cannot open " << body_path << "\n";
    return 1;
  }
  std::stringstream body;
  body << in.rdbuf();
  try {
    auto server = faithlm::backend::FixtureServer::fixed(body.str(), port);
    std::cout << server.base_url() << std::endl;
    server.wait();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
