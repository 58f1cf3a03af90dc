#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "faithlm/backend.hpp"

namespace faithlm::eval {

using backend::Backend;

enum class JudgeLabel { G1_Similar, G2_Dissimilar, G3_NonRelevant };

std::string_view to_string(JudgeLabel label);

struct JudgeVerdict {
  JudgeLabel label = JudgeLabel::G3_NonRelevant;
  std::string raw;
  /// More than one G-token appeared; the first one was taken.
  bool ambiguous = false;
};

/// First standalone "G-1"/"G-2"/"G-3" token in `raw`. A token must not be
/// preceded by a letter or digit nor followed by one. Throws UnparsableVerdict.
JudgeVerdict parse_verdict(std::string_view raw);

/// First token that is a number 1..5 or a word ONE..FIVE (upper or title
/// case). Other numbers are skipped. Throws UnparsableScore.
int parse_scale_score(std::string_view raw);

std::string render_truthfulness_prompt(std::string_view derived, std::string_view reference);
std::string render_contrariety_prompt(std::string_view explanation, std::string_view hint);
std::string render_scale_prompt(std::string_view explanation, std::string_view hint);

struct JudgeSettings {
  double temperature = 0.0;
  int max_tokens = 32;
};

JudgeVerdict judge_truthfulness(Backend& judge, std::string_view derived,
                                std::string_view reference, const JudgeSettings& settings = {});
/// G2_Dissimilar means the hint succeeded in opposing the explanation.
JudgeVerdict judge_contrariety(Backend& judge, std::string_view explanation,
                               std::string_view hint, const JudgeSettings& settings = {});
int judge_scale_score(Backend& judge, std::string_view explanation, std::string_view hint,
                      const JudgeSettings& settings = {});

struct Report {
  std::size_t n = 0;
  std::optional<double> mean_fidelity;
  std::optional<double> truthfulness;
  std::optional<double> contrariety;
  std::optional<double> mean_scale;
  std::size_t parse_failures = 0;

  // Category counts behind the proportions; not serialized.
  std::size_t truth_g1 = 0, truth_g2 = 0, truth_g3 = 0;
  std::size_t contra_g1 = 0, contra_g2 = 0, contra_g3 = 0;
};

/// truthfulness = |G1| / |truth verdicts|, contrariety = |G2| / |contrariety
/// verdicts|; proportions and means are null over empty inputs.
Report aggregate_report(std::span<const double> fidelity_scores,
                        std::span<const JudgeVerdict> truth_verdicts,
                        std::span<const JudgeVerdict> contrariety_verdicts,
                        std::span<const int> scale_scores, std::size_t parse_failures = 0);

/// {"n", "mean_fidelity", "truthfulness", "contrariety", "mean_scale",
/// "parse_failures"}
nlohmann::json to_json(const Report& report);

}  // namespace faithlm::eval
