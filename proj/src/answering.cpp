#include "faithlm/backend.hpp"
#include "faithlm/fidelity.hpp"

namespace faithlm::backend {

GenResponse query_target(Backend& target, const Instance& instance, const ContraryHint* hint,
                         const AnswerSettings& settings) {
  validate(instance);
  const std::string composed =
      hint ? fidelity::compose_intervened_input(instance, *hint, settings.placement)
           : fidelity::compose_plain_input(instance);

  GenRequest request;
  request.user_prompt = fidelity::render_target_prompt(instance, composed);
  request.temperature = settings.temperature;
  request.max_tokens = settings.max_tokens;
  request.want_token_probabilities = settings.want_probability;
  request.instance_id = instance.id;

  GenResponse response = complete(target, request);
  if (settings.want_probability && !response.answer_probability) {
    throw Error(ErrorCode::ProbabilityUnsupported,
                "backend '" + target.name() + "' returned no answer probability");
  }
  if (!settings.want_probability) response.answer_probability.reset();
  return response;
}

Answer answer_instance(Backend& target, const Instance& instance, const ContraryHint* hint,
                       const AnswerSettings& settings) {
  GenResponse response = query_target(target, instance, hint, settings);
  if (text::is_blank(response.text)) {
    throw Error(ErrorCode::NoChoiceMatched, "target returned an empty answer");
  }
  Answer out;
  out.raw_text = response.text;
  out.probability = response.answer_probability;
  out.normalized = normalize_answer(response.text, instance.choices);
  return out;
}

void fill_original_answer(Backend& target, Instance& instance, const AnswerSettings& settings) {
  Instance probe = instance;
  probe.original_answer.clear();
  Answer a = answer_instance(target, probe, nullptr, settings);
  instance.original_answer = a.normalized;
  instance.original_probability = a.probability;
}

}  // namespace faithlm::backend
