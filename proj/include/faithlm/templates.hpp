#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace faithlm::templates {

inline constexpr std::string_view kVersion = "1";

inline constexpr std::string_view kSeedTrigger = "seed_trigger.txt";
inline constexpr std::string_view kExplanationQuery = "explanation_query.txt";
inline constexpr std::string_view kContraryHint = "contrary_hint.txt";
inline constexpr std::string_view kTriggerTrajectory = "trigger_trajectory.txt";
inline constexpr std::string_view kExplanationTrajectory = "explanation_trajectory.txt";
inline constexpr std::string_view kExplanationTrajectoryQuery = "explanation_trajectory_query.txt";
inline constexpr std::string_view kJudgeTruthfulness = "judge_truthfulness.txt";
inline constexpr std::string_view kJudgeContrariety = "judge_contrariety.txt";
inline constexpr std::string_view kJudgeScale = "judge_scale.txt";

/// Embedded template text with its single trailing newline removed. Throws
/// InvalidArgument for unknown names.
std::string_view get(std::string_view name);

using Slot = std::pair<std::string_view, std::string_view>;

/// Single-pass placeholder substitution: every occurrence of a slot key
/// (written with its braces, e.g. "{trajectory}") is replaced by its value,
/// and substituted text is never rescanned.
std::string fill(std::string_view tmpl, std::initializer_list<Slot> slots);

}  // namespace faithlm::templates
