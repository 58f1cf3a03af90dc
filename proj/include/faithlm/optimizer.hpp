#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "faithlm/backend.hpp"
#include "faithlm/core.hpp"
#include "faithlm/fidelity.hpp"
#include "faithlm/parallel.hpp"

namespace faithlm::optimizer {

using backend::Backend;

struct OptimizerConfig {
  int max_steps = 20;
  int holdout_size = 30;
  int trajectory_cap = 20;
  double explainer_temperature = 0.9;
  double explainer_top_p = 0.9;
  int explainer_max_tokens = 512;
  double target_temperature = 0.0;
  double agent_temperature = 0.0;
  std::uint64_t rng_seed = 0;
  ScoreMode mode = ScoreMode::Flip;
  backend::HintPlacement placement = backend::HintPlacement::Prepend;
  /// Worker cap for per-instance scoring inside a trigger round.
  int max_inflight = 1;

  static OptimizerConfig explanation_defaults();
  static OptimizerConfig trigger_defaults();

  void validate() const;
  fidelity::ScoringSettings scoring() const;
};

nlohmann::json to_json(const OptimizerConfig& config);

struct RenderedPrompt {
  std::string system_prompt;
  std::string user_prompt;

  bool operator==(const RenderedPrompt&) const = default;
};

/// Score as shown to the explainer: rounded to two decimals, shortest form,
/// at least one fractional digit ("0.0", "0.21", "1.0").
std::string format_score(double score);

/// Entries that make it into a trajectory prompt: the `cap` highest scores,
/// in ascending score order, ties by earlier step.
std::vector<TrajectoryEntry> trajectory_window(std::span<const TrajectoryEntry> trajectory,
                                               int cap);

/// Explanation-refinement prompt. Throws WrongKind unless every entry holds an
/// explanation.
RenderedPrompt render_explanation_trajectory(std::span<const TrajectoryEntry> trajectory,
                                             const Instance& instance, int cap = 20);

/// Trigger-prompt refinement system prompt. Throws WrongKind unless every entry
/// holds a trigger prompt.
std::string render_trigger_trajectory(std::span<const TrajectoryEntry> trajectory, int cap = 20);

/// User turn sent alongside render_trigger_trajectory.
inline constexpr std::string_view kTriggerResponseCue = "Response:";

/// The explanation request for one instance: the trigger prompt followed by
/// the question/answer query.
std::string render_explanation_request(std::string_view trigger_prompt, const Instance& instance);

/// The built-in human-crafted trigger prompt as a step-0 candidate.
Candidate seed_trigger_prompt(std::string parent_run = {});

enum class Tag { EXP, INS };

struct TaggedText {
  std::string text;
  /// No opening tag was present; the whole reply was used.
  bool warning = false;
};

/// Content between the first opening tag and its closing tag (or the end of
/// the text when unclosed), trimmed. Throws EmptyCandidate if blank.
TaggedText parse_tagged_output(std::string_view raw, Tag tag);

/// Generates one explanation for `instance` with `trigger`.
Candidate generate_explanation(Backend& explainer, const Candidate& trigger,
                               const Instance& instance, const OptimizerConfig& config,
                               int step, const std::string& run_id);

/// Hooks for streaming a run to disk as it progresses.
struct RunHooks {
  std::string run_id;
  /// Replaces to_json(config) as the record's config snapshot when set.
  std::optional<nlohmann::json> config_snapshot;
  std::function<void(const RunRecord&)> on_start;
  std::function<void(const TrajectoryEntry&)> on_entry;
  std::function<void(const RunRecord&)> on_finish;
};

/// Iterative explanation refinement for one instance. Round t scores the
/// current candidate, appends it, and stops on a decision flip or after
/// max_steps rounds; otherwise asks the explainer for the next candidate from
/// the rendered trajectory. Backend failures end the run with
/// Termination::BackendFailure and the partial trajectory.
RunRecord optimize_explanation(const Instance& instance, const Candidate& seed_prompt,
                               Backend& target, Backend& explainer, Backend& agent,
                               const OptimizerConfig& config, const RunHooks& hooks = {});

struct TriggerScore {
  double mean = 0.0;
  /// Per hold-out instance; nullopt where generation or scoring failed.
  std::vector<std::optional<double>> per_instance;
  int included = 0;
  int excluded = 0;
  std::vector<std::string> failures;
};

/// Mean fidelity of one explanation per hold-out instance generated with
/// `prompt`. Failed instances are excluded from the mean; throws
/// AllInstancesFailed if none succeed and EmptyList for an empty hold-out.
TriggerScore score_trigger_prompt(const Candidate& prompt, std::span<const Instance> holdout,
                                  Backend& target, Backend& explainer, Backend& agent,
                                  const OptimizerConfig& config,
                                  parallel::Policy policy = parallel::Policy::Parallel);

/// Trigger-prompt optimization over exactly max_steps rounds, each on a fresh
/// seeded hold-out sample.
RunRecord optimize_trigger_prompt(std::span<const Instance> dataset, const Candidate& seed_prompt,
                                  Backend& target, Backend& explainer, Backend& agent,
                                  const OptimizerConfig& config, const RunHooks& hooks = {});

}  // namespace faithlm::optimizer
