#include "faithlm/core.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace faithlm {

namespace text {

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_punctuation(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (is_punct(s[b]) || is_space(s[b]))) ++b;
  while (e > b && (is_punct(s[e - 1]) || is_space(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string canonical(std::string_view s) { return strip_punctuation(to_lower(trim(s))); }

bool contains_casefold(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return is_space(c); });
}

}  // namespace text

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool contains_word(std::string_view haystack, std::string_view needle) {
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + 1)) {
    const std::size_t end = pos + needle.size();
    const bool left = pos == 0 || !is_word_char(haystack[pos - 1]);
    const bool right = end == haystack.size() || !is_word_char(haystack[end]);
    if (left && right) return true;
  }
  return false;
}

}  // namespace

std::string normalize_answer(std::string_view raw, std::span<const std::string> choices) {
  if (text::is_blank(raw)) {
    throw Error(ErrorCode::InvalidArgument, "answer text is empty");
  }
  const std::string norm = text::canonical(raw);
  if (choices.empty()) return norm;

  const std::string* match = nullptr;
  std::size_t matches = 0;
  for (const auto& choice : choices) {
    const std::string c = text::canonical(choice);
    if (c.empty()) continue;
    if (contains_word(norm, c)) {
      if (match == nullptr || *match != choice) ++matches;
      if (match == nullptr) match = &choice;
    }
  }
  if (matches == 0) {
    throw Error(ErrorCode::NoChoiceMatched, "no choice found in answer '" + std::string(raw) + "'");
  }
  if (matches > 1) {
    throw Error(ErrorCode::AmbiguousAnswer,
                "several choices found in answer '" + std::string(raw) + "'");
  }
  return *match;
}

void validate(const Instance& instance) {
  if (text::is_blank(instance.id)) throw Error(ErrorCode::InvalidArgument, "instance id is empty");
  if (text::is_blank(instance.question)) {
    throw Error(ErrorCode::InvalidArgument, "instance '" + instance.id + "' has an empty question");
  }
  if (!instance.choices.empty() && !instance.original_answer.empty()) {
    const std::string resolved = normalize_answer(instance.original_answer, instance.choices);
    (void)resolved;
  }
}

void validate_dataset(std::span<const Instance> instances) {
  std::set<std::string_view> seen;
  for (const auto& inst : instances) {
    validate(inst);
    if (!seen.insert(inst.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate instance id '" + inst.id + "'");
    }
  }
}

std::string_view to_string(CandidateKind kind) {
  return kind == CandidateKind::Explanation ? "explanation" : "trigger_prompt";
}

CandidateKind candidate_kind_from_string(std::string_view s) {
  if (s == "explanation") return CandidateKind::Explanation;
  if (s == "trigger_prompt") return CandidateKind::TriggerPrompt;
  throw Error(ErrorCode::InvalidArgument, "unknown candidate kind '" + std::string(s) + "'");
}

Candidate Candidate::make(CandidateKind kind, std::string text, int step, std::string parent_run) {
  if (text::is_blank(text)) throw Error(ErrorCode::EmptyCandidate, "candidate text is blank");
  if (step < 0) throw Error(ErrorCode::InvalidArgument, "candidate step is negative");
  return Candidate{kind, std::move(text), step, std::move(parent_run)};
}

ContraryHint ContraryHint::make(std::string text, std::string source_text) {
  if (text::is_blank(text)) throw Error(ErrorCode::EmptyHint, "contrary hint is blank");
  if (text::to_lower(text::trim(text)) == text::to_lower(text::trim(source_text))) {
    throw Error(ErrorCode::HintEqualsSource, "contrary hint repeats its source explanation");
  }
  return ContraryHint{std::move(text), std::move(source_text)};
}

std::string_view to_string(ScoreMode mode) { return mode == ScoreMode::Flip ? "flip" : "prob"; }

ScoreMode score_mode_from_string(std::string_view s) {
  if (s == "flip") return ScoreMode::Flip;
  if (s == "prob" || s == "probability") return ScoreMode::Probability;
  throw Error(ErrorCode::InvalidArgument, "unknown score mode '" + std::string(s) + "'");
}

FidelityScore FidelityScore::flip(std::string original_answer, std::string intervened_answer,
                                  bool flipped) {
  return FidelityScore{flipped ? 1.0 : 0.0, ScoreMode::Flip, std::move(original_answer),
                       std::move(intervened_answer), flipped};
}

FidelityScore FidelityScore::probability(double value, std::string original_answer,
                                         std::string intervened_answer, bool flipped) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "probability score outside [0, 1]");
  }
  return FidelityScore{value, ScoreMode::Probability, std::move(original_answer),
                       std::move(intervened_answer), flipped};
}

std::string_view to_string(RunKind kind) {
  return kind == RunKind::ExplanationRun ? "explanation" : "trigger";
}

std::string_view to_string(Termination termination) {
  switch (termination) {
    case Termination::MaxSteps: return "max_steps";
    case Termination::DecisionFlip: return "decision_flip";
    case Termination::BackendFailure: return "backend_failure";
  }
  return "unknown";
}

RunKind run_kind_from_string(std::string_view s) {
  if (s == "explanation") return RunKind::ExplanationRun;
  if (s == "trigger") return RunKind::TriggerRun;
  throw Error(ErrorCode::InvalidArgument, "unknown run kind '" + std::string(s) + "'");
}

Termination termination_from_string(std::string_view s) {
  if (s == "max_steps") return Termination::MaxSteps;
  if (s == "decision_flip") return Termination::DecisionFlip;
  if (s == "backend_failure") return Termination::BackendFailure;
  throw Error(ErrorCode::InvalidArgument, "unknown termination '" + std::string(s) + "'");
}

void RunRecord::append(TrajectoryEntry entry) {
  if (!entries.empty() && entry.candidate.step <= entries.back().candidate.step) {
    throw Error(ErrorCode::InvalidArgument, "trajectory steps must strictly increase");
  }
  if (!(entry.score >= 0.0 && entry.score <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "trajectory score outside [0, 1]");
  }
  entries.push_back(std::move(entry));
}

std::optional<std::size_t> select_best(std::span<const TrajectoryEntry> entries) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!best) {
      best = i;
      continue;
    }
    const auto& cur = entries[i];
    const auto& top = entries[*best];
    if (cur.score > top.score ||
        (cur.score == top.score && cur.candidate.step < top.candidate.step)) {
      best = i;
    }
  }
  return best;
}

}  // namespace faithlm
