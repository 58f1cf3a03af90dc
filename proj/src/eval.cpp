#include "faithlm/eval.hpp"

#include <array>
#include <cctype>

#include "faithlm/templates.hpp"

namespace faithlm::eval {

std::string_view to_string(JudgeLabel label) {
  switch (label) {
    case JudgeLabel::G1_Similar: return "G-1";
    case JudgeLabel::G2_Dissimilar: return "G-2";
    case JudgeLabel::G3_NonRelevant: return "G-3";
  }
  return "G-3";
}

namespace {

bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

JudgeVerdict parse_verdict(std::string_view raw) {
  JudgeVerdict v;
  v.raw = std::string(raw);
  int found = 0;
  for (std::size_t i = 0; i + 3 <= raw.size(); ++i) {
    if (raw[i] != 'G' || raw[i + 1] != '-') continue;
    const char d = raw[i + 2];
    if (d < '1' || d > '3') continue;
    if (i > 0 && alnum(raw[i - 1])) continue;
    if (i + 3 < raw.size() && alnum(raw[i + 3])) continue;
    if (found++ == 0) {
      v.label = d == '1' ? JudgeLabel::G1_Similar
                         : d == '2' ? JudgeLabel::G2_Dissimilar : JudgeLabel::G3_NonRelevant;
    }
  }
  if (found == 0) {
    throw Error(ErrorCode::UnparsableVerdict, "no G-1/G-2/G-3 label in '" + v.raw + "'");
  }
  v.ambiguous = found > 1;
  return v;
}

int parse_scale_score(std::string_view raw) {
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kWords{{
      {"ONE", "One"}, {"TWO", "Two"}, {"THREE", "Three"}, {"FOUR", "Four"}, {"FIVE", "Five"}}};
  std::size_t i = 0;
  while (i < raw.size()) {
    if (!alnum(raw[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < raw.size() && alnum(raw[j])) ++j;
    const auto token = raw.substr(i, j - i);
    i = j;
    if (token.size() == 1 && token[0] >= '1' && token[0] <= '5') return token[0] - '0';
    for (std::size_t k = 0; k < kWords.size(); ++k) {
      if (token == kWords[k].first || token == kWords[k].second) return static_cast<int>(k) + 1;
    }
  }
  throw Error(ErrorCode::UnparsableScore, "no 1-5 rating in '" + std::string(raw) + "'");
}

std::string render_truthfulness_prompt(std::string_view derived, std::string_view reference) {
  return templates::fill(templates::get(templates::kJudgeTruthfulness),
                         {{"{derived explanation}", derived}, {"{GT-Explanation}", reference}});
}

std::string render_contrariety_prompt(std::string_view explanation, std::string_view hint) {
  return templates::fill(templates::get(templates::kJudgeContrariety),
                         {{"{derived explanation}", explanation}, {"{contrary hints}", hint}});
}

std::string render_scale_prompt(std::string_view explanation, std::string_view hint) {
  return templates::fill(templates::get(templates::kJudgeScale),
                         {{"{derived explanation}", explanation}, {"{contrary hints}", hint}});
}

namespace {

std::string ask(Backend& judge, std::string prompt, const JudgeSettings& settings) {
  backend::GenRequest req;
  req.user_prompt = std::move(prompt);
  req.temperature = settings.temperature;
  req.max_tokens = settings.max_tokens;
  return backend::complete(judge, req).text;
}

}  // namespace

JudgeVerdict judge_truthfulness(Backend& judge, std::string_view derived,
                                std::string_view reference, const JudgeSettings& settings) {
  return parse_verdict(ask(judge, render_truthfulness_prompt(derived, reference), settings));
}

JudgeVerdict judge_contrariety(Backend& judge, std::string_view explanation,
                               std::string_view hint, const JudgeSettings& settings) {
  return parse_verdict(ask(judge, render_contrariety_prompt(explanation, hint), settings));
}

int judge_scale_score(Backend& judge, std::string_view explanation, std::string_view hint,
                      const JudgeSettings& settings) {
  return parse_scale_score(ask(judge, render_scale_prompt(explanation, hint), settings));
}

Report aggregate_report(std::span<const double> fidelity_scores,
                        std::span<const JudgeVerdict> truth_verdicts,
                        std::span<const JudgeVerdict> contrariety_verdicts,
                        std::span<const int> scale_scores, std::size_t parse_failures) {
  Report r;
  r.n = fidelity_scores.size();
  r.parse_failures = parse_failures;
  if (!fidelity_scores.empty()) {
    double sum = 0.0;
    for (double s : fidelity_scores) sum += s;
    r.mean_fidelity = sum / static_cast<double>(fidelity_scores.size());
  }
  auto tally = [](std::span<const JudgeVerdict> vs, std::size_t& g1, std::size_t& g2,
                  std::size_t& g3) {
    for (const auto& v : vs) {
      switch (v.label) {
        case JudgeLabel::G1_Similar: ++g1; break;
        case JudgeLabel::G2_Dissimilar: ++g2; break;
        case JudgeLabel::G3_NonRelevant: ++g3; break;
      }
    }
  };
  tally(truth_verdicts, r.truth_g1, r.truth_g2, r.truth_g3);
  tally(contrariety_verdicts, r.contra_g1, r.contra_g2, r.contra_g3);
  if (!truth_verdicts.empty()) {
    r.truthfulness = static_cast<double>(r.truth_g1) / static_cast<double>(truth_verdicts.size());
  }
  if (!contrariety_verdicts.empty()) {
    r.contrariety =
        static_cast<double>(r.contra_g2) / static_cast<double>(contrariety_verdicts.size());
  }
  if (!scale_scores.empty()) {
    double sum = 0.0;
    for (int s : scale_scores) sum += s;
    r.mean_scale = sum / static_cast<double>(scale_scores.size());
  }
  return r;
}

nlohmann::json to_json(const Report& r) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"n", r.n},
          {"mean_fidelity", opt(r.mean_fidelity)},
          {"truthfulness", opt(r.truthfulness)},
          {"contrariety", opt(r.contrariety)},
          {"mean_scale", opt(r.mean_scale)},
          {"parse_failures", r.parse_failures}};
}

}  // namespace faithlm::eval
