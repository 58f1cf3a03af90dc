#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "faithlm/backend.hpp"

namespace faithlm::backend {

HttpConfig HttpConfig::from_env() {
  HttpConfig cfg;
  if (const char* base = std::getenv("FAITHLM_API_BASE")) cfg.base_url = base;
  if (const char* key = std::getenv("FAITHLM_API_KEY")) cfg.api_key = key;
  return cfg;
}

nlohmann::json chat_request_body(const GenRequest& request, std::string_view model) {
  nlohmann::json messages = nlohmann::json::array();
  if (request.system_prompt) {
    messages.push_back({{"role", "system"}, {"content", *request.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
  return {{"model", model},
          {"messages", messages},
          {"temperature", request.temperature},
          {"top_p", request.top_p},
          {"max_tokens", request.max_tokens}};
}

GenResponse parse_chat_response(std::string_view body, bool want_probability) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("content") || !j.at("content").is_string()) {
    throw Error(ErrorCode::MalformedResponse, "response lacks a string 'content' field");
  }
  GenResponse out{j.at("content").get<std::string>(), std::nullopt};
  if (want_probability && j.contains("token_logprobs") && !j.at("token_logprobs").is_null()) {
    const auto& lps = j.at("token_logprobs");
    if (!lps.is_array()) throw Error(ErrorCode::MalformedResponse, "token_logprobs is not an array");
    double sum = 0.0;
    for (const auto& lp : lps) {
      if (!lp.is_number()) throw Error(ErrorCode::MalformedResponse, "non-numeric logprob");
      sum += lp.get<double>();
    }
    out.answer_probability = std::clamp(std::exp(sum), 0.0, 1.0);
  }
  return out;
}

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "base URL needs a scheme: '" + base_url + "'");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = base_url;
  } else {
    out.scheme_host_port = base_url.substr(0, path_start);
    out.path_prefix = base_url.substr(path_start);
  }
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

bool is_transient(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpChatBackend::HttpChatBackend(HttpConfig config)
    : config_(std::move(config)), inflight_(std::clamp(config_.max_inflight, 1, 1024)) {
  if (config_.base_url.empty()) {
    throw Error(ErrorCode::InvalidArgument, "HTTP backend needs a base URL (FAITHLM_API_BASE)");
  }
  if (config_.max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
  auto parsed = split_base_url(config_.base_url);
  scheme_host_port_ = std::move(parsed.scheme_host_port);
  path_prefix_ = std::move(parsed.path_prefix);
}

HttpChatBackend::~HttpChatBackend() = default;

std::size_t HttpChatBackend::attempts() const {
  std::lock_guard lock(stats_mu_);
  return attempts_;
}

GenResponse HttpChatBackend::complete(const GenRequest& request) {
  const std::string body = chat_request_body(request, config_.model).dump();
  const std::string path = path_prefix_ + "/chat";

  inflight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{inflight_};

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  std::string last_error;
  auto delay = config_.initial_backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    {
      std::lock_guard lock(stats_mu_);
      ++attempts_;
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      GenResponse out = parse_chat_response(res->body, request.want_token_probabilities);
      if (request.want_token_probabilities && !out.answer_probability) {
        throw Error(ErrorCode::ProbabilityUnsupported,
                    "provider returned no token_logprobs for a probability request");
      }
      return out;
    }
    if (res) {
      last_error = "HTTP " + std::to_string(res->status);
      if (!is_transient(res->status)) {
        throw Error(ErrorCode::BackendUnavailable, last_error + " from " + config_.base_url);
      }
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay = std::min(delay * 2, config_.max_backoff);
    }
  }
  throw Error(ErrorCode::BackendUnavailable,
              last_error + " after " + std::to_string(config_.max_attempts) + " attempts to " +
                  config_.base_url);
}

}  // namespace faithlm::backend
