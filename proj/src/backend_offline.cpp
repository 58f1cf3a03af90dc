#include <cmath>
#include <fstream>

#include "faithlm/backend.hpp"

namespace faithlm::backend {

void validate(const GenRequest& request) {
  if (text::is_blank(request.user_prompt)) {
    throw Error(ErrorCode::InvalidArgument, "user prompt is empty");
  }
  if (!(request.temperature >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  }
  if (!(request.top_p > 0.0 && request.top_p <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "top_p must be in (0, 1]");
  }
  if (request.max_tokens <= 0) {
    throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
  }
}

GenResponse complete(Backend& backend, const GenRequest& request) {
  validate(request);
  return backend.complete(request);
}

namespace {

GenResponse reply_for(const ScriptedReply& reply, const GenRequest& request) {
  GenResponse out{reply.text, std::nullopt};
  if (request.want_token_probabilities) out.answer_probability = reply.probability;
  return out;
}

ScriptedReply reply_from_json(const nlohmann::json& j) {
  if (j.is_string()) return ScriptedReply{j.get<std::string>(), std::nullopt};
  if (j.is_object() && j.contains("text")) {
    ScriptedReply r{j.at("text").get<std::string>(), std::nullopt};
    if (j.contains("probability")) {
      const double p = j.at("probability").get<double>();
      if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "scripted probability outside [0, 1]");
      }
      r.probability = p;
    }
    return r;
  }
  throw Error(ErrorCode::InvalidArgument, "script reply must be a string or {text, probability}");
}

std::vector<ScriptedReply> replies_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "script must be a JSON array");
  std::vector<ScriptedReply> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(reply_from_json(item));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

ScriptedGenerator::ScriptedGenerator(std::vector<ScriptedReply> script)
    : script_(std::move(script)) {}

ScriptedGenerator::ScriptedGenerator(const std::vector<std::string>& texts) {
  script_.reserve(texts.size());
  for (const auto& t : texts) script_.push_back(ScriptedReply{t, std::nullopt});
}

GenResponse ScriptedGenerator::complete(const GenRequest& request) {
  std::lock_guard lock(mu_);
  if (cursor_ >= script_.size()) {
    throw Error(ErrorCode::ScriptExhausted,
                "script of " + std::to_string(script_.size()) + " replies exhausted");
  }
  return reply_for(script_[cursor_++], request);
}

std::size_t ScriptedGenerator::cursor() const {
  std::lock_guard lock(mu_);
  return cursor_;
}

// ---------------------------------------------------------------------------

ScriptBook::ScriptBook(std::vector<Entry> entries)
    : entries_(std::move(entries)), cursors_(entries_.size(), 0) {
  for (const auto& e : entries_) {
    if (e.replies.empty()) throw Error(ErrorCode::InvalidArgument, "script entry has no replies");
  }
}

GenResponse ScriptBook::complete(const GenRequest& request) {
  const std::string haystack = request.system_prompt.value_or("") + "\n" + request.user_prompt;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& entry = entries_[i];
    bool all = true;
    for (const auto& m : entry.match) {
      if (haystack.find(m) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (!all) continue;

    std::size_t idx = 0;
    {
      std::lock_guard lock(mu_);
      idx = cursors_[i];
      if (idx >= entry.replies.size()) {
        if (!entry.repeat_last) {
          throw Error(ErrorCode::ScriptExhausted,
                      "script entry " + std::to_string(i) + " exhausted");
        }
        idx = entry.replies.size() - 1;
      } else {
        ++cursors_[i];
      }
    }
    return reply_for(entry.replies[idx], request);
  }
  throw Error(ErrorCode::ScriptExhausted, "no script entry matches the request");
}

// ---------------------------------------------------------------------------

void RuleTableModel::validate() const {
  for (const auto& rule : flip_rules) {
    if (text::is_blank(rule.trigger)) {
      throw Error(ErrorCode::InvalidArgument, "flip rule trigger is empty");
    }
    auto it = base_answers.find(rule.instance_id);
    if (it == base_answers.end()) {
      throw Error(ErrorCode::UnknownInstance,
                  "flip rule for unknown instance '" + rule.instance_id + "'");
    }
    if (text::canonical(it->second) == text::canonical(rule.override_answer)) {
      throw Error(ErrorCode::InvalidArgument,
                  "flip rule override equals the base answer for '" + rule.instance_id + "'");
    }
  }
}

std::string rule_eval(const RuleTableModel& model, std::string_view instance_id,
                      std::string_view composed_text) {
  auto it = model.base_answers.find(std::string(instance_id));
  if (it == model.base_answers.end()) {
    throw Error(ErrorCode::UnknownInstance, "no base answer for '" + std::string(instance_id) + "'");
  }
  const std::string haystack = text::to_lower(composed_text);
  for (const auto& rule : model.flip_rules) {
    if (rule.instance_id != instance_id) continue;
    if (haystack.find(text::to_lower(rule.trigger)) != std::string::npos) {
      return rule.override_answer;
    }
  }
  return it->second;
}

RuleTableModel rule_table_from_json(const nlohmann::json& j) {
  RuleTableModel model;
  try {
    for (const auto& [id, answer] : j.at("base_answers").items()) {
      model.base_answers.emplace(id, answer.get<std::string>());
    }
    if (j.contains("flip_rules")) {
      for (const auto& r : j.at("flip_rules")) {
        model.flip_rules.push_back(FlipRule{r.at("instance_id").get<std::string>(),
                                            r.at("trigger").get<std::string>(),
                                            r.at("override").get<std::string>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed rule table: ") + e.what());
  }
  model.validate();
  return model;
}

nlohmann::json to_json(const RuleTableModel& model) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : model.flip_rules) {
    rules.push_back({{"instance_id", r.instance_id}, {"trigger", r.trigger},
                     {"override", r.override_answer}});
  }
  return {{"base_answers", model.base_answers}, {"flip_rules", rules}};
}

namespace {
nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument,
                "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}
}  // namespace

RuleTableModel load_rule_table(const std::filesystem::path& path) {
  return rule_table_from_json(read_json_file(path));
}

RuleTableBackend::RuleTableBackend(RuleTableModel model) : model_(std::move(model)) {
  model_.validate();
}

GenResponse RuleTableBackend::complete(const GenRequest& request) {
  if (!request.instance_id) {
    throw Error(ErrorCode::UnknownInstance, "rule-table backend needs an instance id");
  }
  if (request.want_token_probabilities) {
    throw Error(ErrorCode::ProbabilityUnsupported, "rule-table backend has no probabilities");
  }
  return GenResponse{rule_eval(model_, *request.instance_id, request.user_prompt), std::nullopt};
}

// ---------------------------------------------------------------------------

CallbackBackend::CallbackBackend(Fn fn, bool reentrant, std::string name)
    : fn_(std::move(fn)), reentrant_(reentrant), name_(std::move(name)) {}

BackendPtr offline_backend_from_json(const nlohmann::json& j) {
  if (j.is_array()) {
    try {
      return std::make_shared<ScriptedGenerator>(replies_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("malformed script: ") + e.what());
    }
  }
  if (j.is_object() && j.contains("base_answers")) {
    return std::make_shared<RuleTableBackend>(rule_table_from_json(j));
  }
  if (j.is_object() && j.contains("entries")) {
    std::vector<ScriptBook::Entry> entries;
    try {
      for (const auto& e : j.at("entries")) {
        ScriptBook::Entry entry;
        const auto& m = e.at("match");
        if (m.is_string()) {
          entry.match.push_back(m.get<std::string>());
        } else {
          entry.match = m.get<std::vector<std::string>>();
        }
        entry.replies = replies_from_json(e.at("replies"));
        entry.repeat_last = e.value("repeat_last", false);
        entries.push_back(std::move(entry));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("malformed script book: ") + e.what());
    }
    return std::make_shared<ScriptBook>(std::move(entries));
  }
  throw Error(ErrorCode::InvalidArgument,
              "offline backend must be a reply array, a script book or a rule table");
}

BackendPtr load_offline_backend(const std::filesystem::path& path) {
  return offline_backend_from_json(read_json_file(path));
}

std::string_view to_string(HintPlacement placement) {
  return placement == HintPlacement::Prepend ? "prepend" : "append";
}

HintPlacement hint_placement_from_string(std::string_view s) {
  if (s == "prepend") return HintPlacement::Prepend;
  if (s == "append") return HintPlacement::Append;
  throw Error(ErrorCode::InvalidArgument, "unknown hint placement '" + std::string(s) + "'");
}

}  // namespace faithlm::backend
