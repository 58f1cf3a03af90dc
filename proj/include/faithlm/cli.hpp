#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faithlm/backend.hpp"
#include "faithlm/core.hpp"
#include "faithlm/optimizer.hpp"

namespace faithlm::cli {

enum class BackendKind { Http, Mock, Scripted };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view s);

/// Offline backend files per role (mock and scripted backends).
struct OfflineFiles {
  std::filesystem::path target;
  std::filesystem::path explainer;
  std::filesystem::path agent;
  std::filesystem::path judge;
};

struct HttpSettings {
  std::string base_url;
  std::string api_key;
  std::string target_model = "target";
  std::string explainer_model = "explainer";
  std::string agent_model = "explainer";
  std::string judge_model = "judge";
  int max_attempts = 3;
};

/// Every setting after resolution. Precedence: built-in defaults, then the
/// config file, then command-line flags.
struct ResolvedConfig {
  BackendKind backend = BackendKind::Mock;
  std::filesystem::path dataset;
  ScoreMode mode = ScoreMode::Flip;
  std::uint64_t seed = 0;
  std::filesystem::path out = "runs";
  int max_inflight = 4;

  int explain_steps = 20;
  int trigger_steps = 50;
  int holdout = 30;
  int trajectory_cap = 20;
  double explainer_temperature = 0.9;
  double explainer_top_p = 0.9;
  double target_temperature = 0.0;
  double agent_temperature = 0.0;
  int max_tokens = 512;
  backend::HintPlacement placement = backend::HintPlacement::Prepend;
  /// Seed trigger prompt text file; the built-in prompt when empty.
  std::filesystem::path seed_prompt;

  OfflineFiles offline;
  HttpSettings http;

  optimizer::OptimizerConfig explanation_config() const;
  optimizer::OptimizerConfig trigger_config() const;
};

/// Merges a JSON config file into `config`. Relative paths inside the file are
/// resolved against the file's directory.
void apply_config_file(ResolvedConfig& config, const std::filesystem::path& path);
void apply_config_json(ResolvedConfig& config, const nlohmann::json& j,
                       const std::filesystem::path& base_dir);

/// Snapshot stored in run records. Credentials and the output directory are
/// left out so records from identical runs compare equal.
nlohmann::json snapshot(const ResolvedConfig& config);

struct Backends {
  backend::BackendPtr target;
  backend::BackendPtr explainer;
  backend::BackendPtr agent;
  backend::BackendPtr judge;
};

struct Roles {
  bool target = false, explainer = false, agent = false, judge = false;
};

Backends make_backends(const ResolvedConfig& config, Roles roles);

enum ExitCode : int { kOk = 0, kConfigError = 1, kPartialFailure = 2 };

/// Entry point shared by the faithlm binary and the tests. `args` excludes
/// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace faithlm::cli
