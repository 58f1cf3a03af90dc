#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "faithlm/core.hpp"

namespace faithlm::backend {

struct GenRequest {
  std::optional<std::string> system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 512;
  bool want_token_probabilities = false;
  /// Routing metadata for offline backends keyed by instance. Never sent on
  /// the wire.
  std::optional<std::string> instance_id;
};

void validate(const GenRequest& request);

struct GenResponse {
  std::string text;
  /// Probability of the returned answer; present only when requested and the
  /// backend can supply it.
  std::optional<double> answer_probability;
};

/// Uniform generation interface for target models, explainers, hint agents
/// and judges.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual GenResponse complete(const GenRequest& request) = 0;
  virtual std::string name() const = 0;

  /// True when concurrent complete() calls are safe and their results do not
  /// depend on call interleaving. Parallel loops fall back to serial
  /// execution when any participating backend returns false.
  virtual bool reentrant() const { return true; }
};

using BackendPtr = std::shared_ptr<Backend>;

/// Validates the request, then dispatches.
GenResponse complete(Backend& backend, const GenRequest& request);

// ---------------------------------------------------------------------------
// Offline backends

struct ScriptedReply {
  std::string text;
  std::optional<double> probability;
};

/// Returns canned replies in order. Requesting past the end throws
/// ScriptExhausted. Single consumer: results depend on call order.
class ScriptedGenerator final : public Backend {
 public:
  explicit ScriptedGenerator(std::vector<ScriptedReply> script);
  explicit ScriptedGenerator(const std::vector<std::string>& texts);

  GenResponse complete(const GenRequest& request) override;
  std::string name() const override { return "scripted"; }
  bool reentrant() const override { return false; }

  std::size_t cursor() const;
  std::size_t size() const { return script_.size(); }

 private:
  std::vector<ScriptedReply> script_;
  mutable std::mutex mu_;
  std::size_t cursor_ = 0;
};

/// Keyed script: each entry lists substrings that must all occur in the
/// request (system prompt, newline, user prompt) and the replies to hand out,
/// in order, for matching requests. The first matching entry wins. Entries keep independent cursors, so requests
/// for distinct keys may run concurrently with deterministic results.
class ScriptBook final : public Backend {
 public:
  struct Entry {
    std::vector<std::string> match;
    std::vector<ScriptedReply> replies;
    /// Keep returning the last reply instead of throwing ScriptExhausted.
    bool repeat_last = false;
  };

  explicit ScriptBook(std::vector<Entry> entries);

  GenResponse complete(const GenRequest& request) override;
  std::string name() const override { return "script-book"; }

 private:
  std::vector<Entry> entries_;
  std::mutex mu_;
  std::vector<std::size_t> cursors_;
};

enum class MatchMode { SubstringCasefold };

struct FlipRule {
  std::string instance_id;
  std::string trigger;
  std::string override_answer;
};

/// Deterministic target model whose decision factor is explicit: a base
/// answer per instance, overridden by the first rule whose trigger phrase
/// occurs in the composed input.
struct RuleTableModel {
  std::map<std::string, std::string> base_answers;
  std::vector<FlipRule> flip_rules;
  MatchMode match_mode = MatchMode::SubstringCasefold;

  /// Triggers non-empty; every override differs from its base answer.
  void validate() const;
};

std::string rule_eval(const RuleTableModel& model, std::string_view instance_id,
                      std::string_view composed_text);

RuleTableModel rule_table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RuleTableModel& model);
RuleTableModel load_rule_table(const std::filesystem::path& path);

class RuleTableBackend final : public Backend {
 public:
  explicit RuleTableBackend(RuleTableModel model);

  /// Requires request.instance_id; probabilities are unsupported.
  GenResponse complete(const GenRequest& request) override;
  std::string name() const override { return "rule-table"; }

  const RuleTableModel& model() const { return model_; }

 private:
  RuleTableModel model_;
};

/// Wraps a pure function. Mostly for tests and benchmarks.
class CallbackBackend final : public Backend {
 public:
  using Fn = std::function<GenResponse(const GenRequest&)>;

  explicit CallbackBackend(Fn fn, bool reentrant = true, std::string name = "callback");

  GenResponse complete(const GenRequest& request) override { return fn_(request); }
  std::string name() const override { return name_; }
  bool reentrant() const override { return reentrant_; }

 private:
  Fn fn_;
  bool reentrant_;
  std::string name_;
};

/// Loads an offline backend from JSON: an array is a ScriptedGenerator, an
/// object with "entries" a ScriptBook, an object with "base_answers" a
/// RuleTableBackend.
BackendPtr load_offline_backend(const std::filesystem::path& path);
BackendPtr offline_backend_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// HTTP chat-completion client

struct HttpConfig {
  /// e.g. "http://127.0.0.1:8080/v1"; requests go to <base_url>/chat.
  std::string base_url;
  std::string api_key;
  std::string model = "default";
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{2000};
  int max_inflight = 4;
  std::chrono::seconds timeout{60};

  /// Reads FAITHLM_API_BASE and FAITHLM_API_KEY.
  static HttpConfig from_env();
};

/// Wire body for a request; exposed so fixture servers can assert on it.
nlohmann::json chat_request_body(const GenRequest& request, std::string_view model);

/// Parses {"content": str, "token_logprobs": [num]?}. The answer probability
/// is exp(sum of logprobs), only when requested.
GenResponse parse_chat_response(std::string_view body, bool want_probability);

class HttpChatBackend final : public Backend {
 public:
  explicit HttpChatBackend(HttpConfig config);
  ~HttpChatBackend() override;

  GenResponse complete(const GenRequest& request) override;
  std::string name() const override { return "http"; }

  /// Total HTTP attempts issued, including retries.
  std::size_t attempts() const;

 private:
  HttpConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::counting_semaphore<1024> inflight_;
  mutable std::mutex stats_mu_;
  std::size_t attempts_ = 0;
};

// ---------------------------------------------------------------------------
// Answering

enum class HintPlacement { Prepend, Append };

std::string_view to_string(HintPlacement placement);
HintPlacement hint_placement_from_string(std::string_view s);

struct AnswerSettings {
  double temperature = 0.0;
  int max_tokens = 64;
  bool want_probability = false;
  HintPlacement placement = HintPlacement::Prepend;
};

struct Answer {
  std::string raw_text;
  std::string normalized;
  std::optional<double> probability;
};

/// Sends the plain or intervened target prompt and returns the raw reply.
/// Throws ProbabilityUnsupported when a probability was requested but the
/// backend returned none.
GenResponse query_target(Backend& target, const Instance& instance, const ContraryHint* hint,
                         const AnswerSettings& settings);

/// Queries the target with the plain question, or with the contrary hint
/// composed in when `hint` is non-null, and normalizes the reply against the
/// instance's choices. Throws ProbabilityUnsupported when a probability was
/// requested but the backend returned none.
Answer answer_instance(Backend& target, const Instance& instance, const ContraryHint* hint,
                       const AnswerSettings& settings);

/// Fills original_answer (and original_probability when requested) by
/// answering the plain question.
void fill_original_answer(Backend& target, Instance& instance, const AnswerSettings& settings);

}  // namespace faithlm::backend
