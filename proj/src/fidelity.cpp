#include "faithlm/fidelity.hpp"

#include <algorithm>
#include <numeric>

#include "faithlm/templates.hpp"

namespace faithlm::fidelity {

std::string render_contrary_hint_prompt(std::string_view explanation) {
  return templates::fill(templates::get(templates::kContraryHint),
                         {{"{derived explanation}", explanation}});
}

namespace {

std::string first_paragraph(std::string_view s) {
  const std::string t = text::trim(s);
  std::size_t cut = t.size();
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (t[i] == '\n') {
      std::size_t j = i + 1;
      while (j < t.size() && (t[j] == ' ' || t[j] == '\t' || t[j] == '\r')) ++j;
      if (j < t.size() && t[j] == '\n') {
        cut = i;
        break;
      }
    }
  }
  return text::trim(std::string_view(t).substr(0, cut));
}

}  // namespace

ContraryHint generate_contrary_hint(Backend& agent, const Candidate& explanation,
                                    const HintSettings& settings) {
  if (explanation.kind != CandidateKind::Explanation) {
    throw Error(ErrorCode::WrongKind, "contrary hints are generated from explanations");
  }
  backend::GenRequest request;
  request.user_prompt = render_contrary_hint_prompt(explanation.text);
  request.temperature = settings.temperature;
  request.max_tokens = settings.max_tokens;
  const auto response = backend::complete(agent, request);
  return ContraryHint::make(first_paragraph(response.text), explanation.text);
}

std::string compose_plain_input(const Instance& instance) {
  if (instance.context && !text::is_blank(*instance.context)) {
    return *instance.context + " " + instance.question;
  }
  return instance.question;
}

std::string compose_intervened_input(const Instance& instance, const ContraryHint& hint,
                                     HintPlacement placement) {
  std::string out;
  if (instance.context && !text::is_blank(*instance.context)) {
    out = *instance.context + " ";
  }
  if (placement == HintPlacement::Prepend) {
    out += hint.text + " " + instance.question;
  } else {
    out += instance.question + " " + hint.text;
  }
  return out;
}

std::string render_target_prompt(const Instance& instance, std::string_view composed_input) {
  std::string out(composed_input);
  if (!instance.choices.empty()) {
    out += "\nChoices:";
    for (const auto& c : instance.choices) out += " [choice] " + c;
  }
  out += "\nAnswer:";
  return out;
}

InterventionOutcome fidelity_score(Backend& target, const Instance& instance,
                                   const Candidate& explanation, Backend& agent,
                                   const ScoringSettings& settings) {
  if (text::is_blank(instance.original_answer)) {
    throw Error(ErrorCode::InvalidArgument,
                "instance '" + instance.id + "' has no original answer; answer it first");
  }
  const bool prob = settings.mode == ScoreMode::Probability;
  backend::AnswerSettings answer_settings{settings.target_temperature, settings.target_max_tokens,
                                          prob, settings.placement};

  const std::string original = normalize_answer(instance.original_answer, instance.choices);
  std::optional<double> p_original = instance.original_probability;
  if (prob && !p_original) {
    p_original = backend::answer_instance(target, instance, nullptr, answer_settings).probability;
  }

  InterventionOutcome outcome;
  outcome.hint = generate_contrary_hint(agent, explanation, settings.hint);
  outcome.composed_input = compose_intervened_input(instance, outcome.hint, settings.placement);
  outcome.original_answer = original;

  const auto reply = backend::query_target(target, instance, &outcome.hint, answer_settings);
  try {
    if (text::is_blank(reply.text)) {
      throw Error(ErrorCode::NoChoiceMatched, "target returned an empty answer");
    }
    outcome.intervened_answer = normalize_answer(reply.text, instance.choices);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoChoiceMatched && e.code() != ErrorCode::AmbiguousAnswer) throw;
    // No longer resolves to the original decision.
    outcome.intervened_parse_failure = true;
    outcome.intervened_answer.clear();
  }

  const bool flipped = outcome.intervened_parse_failure || outcome.intervened_answer != original;
  if (!prob) {
    outcome.score = FidelityScore::flip(original, outcome.intervened_answer, flipped);
    return outcome;
  }

  const double p_reply = *reply.answer_probability;
  const double p_orig_given_hint = flipped ? 1.0 - p_reply : p_reply;
  const double shift = std::clamp(*p_original - p_orig_given_hint, 0.0, 1.0);
  outcome.score = FidelityScore::probability(shift, original, outcome.intervened_answer, flipped);
  return outcome;
}

double flip_rate(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::EmptyList, "flip rate of an empty list");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

double flip_rate(std::span<const InterventionOutcome> outcomes) {
  std::vector<double> values;
  values.reserve(outcomes.size());
  for (const auto& o : outcomes) values.push_back(o.score.value);
  return flip_rate(std::span<const double>(values));
}

std::vector<InterventionOutcome> score_batch(std::span<const ScoringJob> jobs, Backend& target,
                                             Backend& agent, const ScoringSettings& settings,
                                             parallel::Policy policy, int max_threads) {
  std::vector<InterventionOutcome> out(jobs.size());
  if (!target.reentrant() || !agent.reentrant()) policy = parallel::Policy::Serial;
  parallel::for_each_index(policy, jobs.size(), max_threads, [&](std::size_t i) {
    out[i] = fidelity_score(target, *jobs[i].instance, *jobs[i].explanation, agent, settings);
  });
  return out;
}

}  // namespace faithlm::fidelity
