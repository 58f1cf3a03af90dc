#include <cstdlib>
#include <fstream>
#include <set>

#include "faithlm/cli.hpp"

namespace faithlm::cli {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Http: return "http";
    case BackendKind::Mock: return "mock";
    case BackendKind::Scripted: return "scripted";
  }
  return "mock";
}

BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "http") return BackendKind::Http;
  if (s == "mock") return BackendKind::Mock;
  if (s == "scripted") return BackendKind::Scripted;
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + std::string(s) + "'");
}

namespace {

optimizer::OptimizerConfig base_config(const ResolvedConfig& c) {
  optimizer::OptimizerConfig o;
  o.holdout_size = c.holdout;
  o.trajectory_cap = c.trajectory_cap;
  o.explainer_temperature = c.explainer_temperature;
  o.explainer_top_p = c.explainer_top_p;
  o.explainer_max_tokens = c.max_tokens;
  o.target_temperature = c.target_temperature;
  o.agent_temperature = c.agent_temperature;
  o.rng_seed = c.seed;
  o.mode = c.mode;
  o.placement = c.placement;
  o.max_inflight = c.max_inflight;
  return o;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw Error(ErrorCode::InvalidArgument, "unknown " + where + " key '" + key + "'");
    }
  }
}

}  // namespace

optimizer::OptimizerConfig ResolvedConfig::explanation_config() const {
  auto o = base_config(*this);
  o.max_steps = explain_steps;
  return o;
}

optimizer::OptimizerConfig ResolvedConfig::trigger_config() const {
  auto o = base_config(*this);
  o.max_steps = trigger_steps;
  return o;
}

void apply_config_json(ResolvedConfig& c, const nlohmann::json& j,
                       const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  reject_unknown(j,
                 {"backend", "dataset", "mode", "seed", "out", "max_inflight", "explain_steps",
                  "trigger_steps", "holdout", "trajectory_cap", "explainer_temperature",
                  "explainer_top_p", "target_temperature", "agent_temperature", "max_tokens",
                  "placement", "seed_prompt", "offline", "http"},
                 "config");
  try {
    if (j.contains("backend")) c.backend = backend_kind_from_string(j["backend"].get<std::string>());
    if (j.contains("dataset")) c.dataset = resolve(base_dir, j["dataset"].get<std::string>());
    if (j.contains("mode")) c.mode = score_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) c.out = resolve(base_dir, j["out"].get<std::string>());
    if (j.contains("max_inflight")) c.max_inflight = j["max_inflight"].get<int>();
    if (j.contains("explain_steps")) c.explain_steps = j["explain_steps"].get<int>();
    if (j.contains("trigger_steps")) c.trigger_steps = j["trigger_steps"].get<int>();
    if (j.contains("holdout")) c.holdout = j["holdout"].get<int>();
    if (j.contains("trajectory_cap")) c.trajectory_cap = j["trajectory_cap"].get<int>();
    if (j.contains("explainer_temperature")) {
      c.explainer_temperature = j["explainer_temperature"].get<double>();
    }
    if (j.contains("explainer_top_p")) c.explainer_top_p = j["explainer_top_p"].get<double>();
    if (j.contains("target_temperature")) {
      c.target_temperature = j["target_temperature"].get<double>();
    }
    if (j.contains("agent_temperature")) c.agent_temperature = j["agent_temperature"].get<double>();
    if (j.contains("max_tokens")) c.max_tokens = j["max_tokens"].get<int>();
    if (j.contains("placement")) {
      c.placement = backend::hint_placement_from_string(j["placement"].get<std::string>());
    }
    if (j.contains("seed_prompt")) c.seed_prompt = resolve(base_dir, j["seed_prompt"].get<std::string>());
    if (j.contains("offline")) {
      const auto& o = j["offline"];
      reject_unknown(o, {"target", "explainer", "agent", "judge"}, "offline");
      if (o.contains("target")) c.offline.target = resolve(base_dir, o["target"].get<std::string>());
      if (o.contains("explainer")) {
        c.offline.explainer = resolve(base_dir, o["explainer"].get<std::string>());
      }
      if (o.contains("agent")) c.offline.agent = resolve(base_dir, o["agent"].get<std::string>());
      if (o.contains("judge")) c.offline.judge = resolve(base_dir, o["judge"].get<std::string>());
    }
    if (j.contains("http")) {
      const auto& h = j["http"];
      reject_unknown(h,
                     {"base_url", "api_key", "target_model", "explainer_model", "agent_model",
                      "judge_model", "max_attempts"},
                     "http");
      c.http.base_url = h.value("base_url", c.http.base_url);
      c.http.api_key = h.value("api_key", c.http.api_key);
      c.http.target_model = h.value("target_model", c.http.target_model);
      c.http.explainer_model = h.value("explainer_model", c.http.explainer_model);
      c.http.agent_model = h.value("agent_model", c.http.agent_model);
      c.http.judge_model = h.value("judge_model", c.http.judge_model);
      c.http.max_attempts = h.value("max_attempts", c.http.max_attempts);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
  }
}

void apply_config_file(ResolvedConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "config is not valid JSON: " + std::string(e.what()));
  }
  apply_config_json(config, j, path.parent_path());
}

nlohmann::json snapshot(const ResolvedConfig& c) {
  auto p = [](const std::filesystem::path& path) { return path.generic_string(); };
  nlohmann::json j = {{"backend", std::string(to_string(c.backend))},
                      {"dataset", p(c.dataset)},
                      {"mode", std::string(to_string(c.mode))},
                      {"seed", c.seed},
                      {"max_inflight", c.max_inflight},
                      {"explain_steps", c.explain_steps},
                      {"trigger_steps", c.trigger_steps},
                      {"holdout", c.holdout},
                      {"trajectory_cap", c.trajectory_cap},
                      {"explainer_temperature", c.explainer_temperature},
                      {"explainer_top_p", c.explainer_top_p},
                      {"target_temperature", c.target_temperature},
                      {"agent_temperature", c.agent_temperature},
                      {"max_tokens", c.max_tokens},
                      {"placement", std::string(backend::to_string(c.placement))},
                      {"seed_prompt", p(c.seed_prompt)}};
  if (c.backend == BackendKind::Http) {
    j["http"] = {{"base_url", c.http.base_url},
                 {"target_model", c.http.target_model},
                 {"explainer_model", c.http.explainer_model},
                 {"agent_model", c.http.agent_model},
                 {"judge_model", c.http.judge_model},
                 {"max_attempts", c.http.max_attempts}};
  } else {
    j["offline"] = {{"target", p(c.offline.target)},
                    {"explainer", p(c.offline.explainer)},
                    {"agent", p(c.offline.agent)},
                    {"judge", p(c.offline.judge)}};
  }
  return j;
}

namespace {

backend::BackendPtr offline_role(const std::filesystem::path& path, const char* role) {
  if (path.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("no offline backend file configured for the ") + role);
  }
  return backend::load_offline_backend(path);
}

backend::BackendPtr http_role(const ResolvedConfig& c, const std::string& model) {
  if (c.http.base_url.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "http backend needs a base URL (config http.base_url or FAITHLM_API_BASE)");
  }
  backend::HttpConfig h;
  h.base_url = c.http.base_url;
  h.api_key = c.http.api_key;
  h.model = model;
  h.max_attempts = c.http.max_attempts;
  h.max_inflight = c.max_inflight;
  return std::make_shared<backend::HttpChatBackend>(std::move(h));
}

}  // namespace

Backends make_backends(const ResolvedConfig& c, Roles roles) {
  Backends b;
  if (c.backend == BackendKind::Http) {
    if (roles.target) b.target = http_role(c, c.http.target_model);
    if (roles.explainer) b.explainer = http_role(c, c.http.explainer_model);
    if (roles.agent) b.agent = http_role(c, c.http.agent_model);
    if (roles.judge) b.judge = http_role(c, c.http.judge_model);
    return b;
  }
  if (roles.target) {
    b.target = offline_role(c.offline.target, "target");
    if (c.backend == BackendKind::Mock &&
        !dynamic_cast<backend::RuleTableBackend*>(b.target.get())) {
      throw Error(ErrorCode::InvalidArgument, "mock backend expects a rule-table target file");
    }
  }
  if (roles.explainer) b.explainer = offline_role(c.offline.explainer, "explainer");
  if (roles.agent) b.agent = offline_role(c.offline.agent, "agent");
  if (roles.judge) b.judge = offline_role(c.offline.judge, "judge");
  return b;
}

}  // namespace faithlm::cli
