#pragma once

#include <span>
#include <string>
#include <vector>

#include "faithlm/backend.hpp"
#include "faithlm/core.hpp"
#include "faithlm/parallel.hpp"

namespace faithlm::fidelity {

using backend::Backend;
using backend::HintPlacement;

struct InterventionOutcome {
  std::string composed_input;
  std::string original_answer;
  std::string intervened_answer;
  ContraryHint hint;
  FidelityScore score;
  bool intervened_parse_failure = false;
};

struct HintSettings {
  double temperature = 0.0;
  int max_tokens = 256;
};

/// Asks the hint agent for the opposite-meaning statement of an explanation
/// using the contrary-hint template, keeping the first paragraph of the reply.
ContraryHint generate_contrary_hint(Backend& agent, const Candidate& explanation,
                                    const HintSettings& settings = {});

/// The contrary-hint request text sent to the agent.
std::string render_contrary_hint_prompt(std::string_view explanation);

/// "[context ]question" with no hint.
std::string compose_plain_input(const Instance& instance);

/// Prepend (default): "[context ]<hint> <question>". Append:
/// "[context ]<question> <hint>".
std::string compose_intervened_input(const Instance& instance, const ContraryHint& hint,
                                     HintPlacement placement = HintPlacement::Prepend);

/// Full target prompt: the composed input, the choice list when present, and
/// an answer cue.
std::string render_target_prompt(const Instance& instance, std::string_view composed_input);

struct ScoringSettings {
  ScoreMode mode = ScoreMode::Flip;
  double target_temperature = 0.0;
  int target_max_tokens = 64;
  HintPlacement placement = HintPlacement::Prepend;
  HintSettings hint;
};

/// Contrary-hint fidelity of one explanation for one instance.
///
/// Flip mode scores 1 when the normalized intervened answer differs from the
/// instance's original answer. A reply that no longer resolves to a single
/// choice counts as a flip and is marked in the outcome.
///
/// Probability mode scores clamp(p(Y|X) - p(Y|X with hint), 0, 1). When the
/// intervened reply is the original answer its probability is used directly;
/// otherwise p(Y|X with hint) is taken as 1 - p(new answer). A missing
/// baseline probability is fetched with one plain query.
InterventionOutcome fidelity_score(Backend& target, const Instance& instance,
                                   const Candidate& explanation, Backend& agent,
                                   const ScoringSettings& settings = {});

/// Mean score value. Throws EmptyList.
double flip_rate(std::span<const InterventionOutcome> outcomes);
double flip_rate(std::span<const double> scores);

struct ScoringJob {
  const Instance* instance = nullptr;
  const Candidate* explanation = nullptr;
};

/// Scores many (instance, explanation) pairs. The parallel policy is used only
/// when both backends are reentrant; results are in job order either way.
std::vector<InterventionOutcome> score_batch(std::span<const ScoringJob> jobs, Backend& target,
                                             Backend& agent, const ScoringSettings& settings,
                                             parallel::Policy policy, int max_threads);

}  // namespace faithlm::fidelity
