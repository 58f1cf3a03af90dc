#include "faithlm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "faithlm/data.hpp"
#include "faithlm/persistence.hpp"
#include "faithlm/templates.hpp"

namespace faithlm::optimizer {

OptimizerConfig OptimizerConfig::explanation_defaults() { return OptimizerConfig{}; }

OptimizerConfig OptimizerConfig::trigger_defaults() {
  OptimizerConfig c;
  c.max_steps = 50;
  return c;
}

void OptimizerConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (max_steps < 1) fail("max_steps must be at least 1");
  if (holdout_size < 1) fail("holdout_size must be at least 1");
  if (trajectory_cap < 1) fail("trajectory_cap must be at least 1");
  if (explainer_max_tokens < 1) fail("explainer_max_tokens must be at least 1");
  if (max_inflight < 1) fail("max_inflight must be at least 1");
  if (!(explainer_temperature >= 0.0) || !(target_temperature >= 0.0) ||
      !(agent_temperature >= 0.0)) {
    fail("temperatures must be non-negative");
  }
  if (!(explainer_top_p > 0.0 && explainer_top_p <= 1.0)) fail("top_p must be in (0, 1]");
}

fidelity::ScoringSettings OptimizerConfig::scoring() const {
  fidelity::ScoringSettings s;
  s.mode = mode;
  s.target_temperature = target_temperature;
  s.placement = placement;
  s.hint.temperature = agent_temperature;
  return s;
}

nlohmann::json to_json(const OptimizerConfig& c) {
  return {{"max_steps", c.max_steps},
          {"holdout_size", c.holdout_size},
          {"trajectory_cap", c.trajectory_cap},
          {"explainer_temperature", c.explainer_temperature},
          {"explainer_top_p", c.explainer_top_p},
          {"explainer_max_tokens", c.explainer_max_tokens},
          {"target_temperature", c.target_temperature},
          {"agent_temperature", c.agent_temperature},
          {"rng_seed", c.rng_seed},
          {"mode", std::string(to_string(c.mode))},
          {"placement", std::string(backend::to_string(c.placement))},
          {"max_inflight", c.max_inflight}};
}

std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", std::round(score * 100.0) / 100.0);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

std::vector<TrajectoryEntry> trajectory_window(std::span<const TrajectoryEntry> trajectory,
                                               int cap) {
  if (cap < 1) throw Error(ErrorCode::InvalidArgument, "trajectory cap must be at least 1");
  std::vector<TrajectoryEntry> kept(trajectory.begin(), trajectory.end());
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.candidate.step < b.candidate.step;
  });
  if (kept.size() > static_cast<std::size_t>(cap)) kept.resize(static_cast<std::size_t>(cap));
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.candidate.step < b.candidate.step;
  });
  return kept;
}

namespace {

std::string render_blocks(std::span<const TrajectoryEntry> trajectory, int cap,
                          CandidateKind expected) {
  for (const auto& e : trajectory) {
    if (e.candidate.kind != expected) {
      throw Error(ErrorCode::WrongKind, "trajectory holds a " +
                                            std::string(to_string(e.candidate.kind)) +
                                            " where a " + std::string(to_string(expected)) +
                                            " was expected");
    }
  }
  std::string out;
  for (const auto& e : trajectory_window(trajectory, cap)) {
    if (!out.empty()) out += "\n\n";
    out += "Text: " + e.candidate.text + "\nScore: " + format_score(e.score);
  }
  return out;
}

}  // namespace

RenderedPrompt render_explanation_trajectory(std::span<const TrajectoryEntry> trajectory,
                                             const Instance& instance, int cap) {
  const std::string blocks = render_blocks(trajectory, cap, CandidateKind::Explanation);
  const std::string question = fidelity::compose_plain_input(instance);
  RenderedPrompt p;
  p.system_prompt = templates::fill(templates::get(templates::kExplanationTrajectory),
                                    {{"{trajectory}", blocks}});
  p.user_prompt = templates::fill(templates::get(templates::kExplanationTrajectoryQuery),
                                  {{"{question}", question}, {"{answer}", instance.original_answer}});
  return p;
}

std::string render_trigger_trajectory(std::span<const TrajectoryEntry> trajectory, int cap) {
  const std::string blocks = render_blocks(trajectory, cap, CandidateKind::TriggerPrompt);
  return templates::fill(templates::get(templates::kTriggerTrajectory), {{"{trajectory}", blocks}});
}

std::string render_explanation_request(std::string_view trigger_prompt, const Instance& instance) {
  const std::string question = fidelity::compose_plain_input(instance);
  std::string out = text::trim(trigger_prompt);
  out += ' ';
  out += templates::fill(templates::get(templates::kExplanationQuery),
                         {{"{Question}", question},
                          {"{Targeted LLM-generated Answer}", instance.original_answer}});
  return out;
}

Candidate seed_trigger_prompt(std::string parent_run) {
  return Candidate::make(CandidateKind::TriggerPrompt, std::string(templates::get(templates::kSeedTrigger)),
                         0, std::move(parent_run));
}

TaggedText parse_tagged_output(std::string_view raw, Tag tag) {
  const std::string name = tag == Tag::EXP ? "EXP" : "INS";
  const std::string open = "<" + name + ">";
  const std::string close = "</" + name + ">";
  TaggedText out;
  const auto start = raw.find(open);
  if (start == std::string_view::npos) {
    out.text = text::trim(raw);
    out.warning = true;
  } else {
    auto body = raw.substr(start + open.size());
    const auto end = body.find(close);
    if (end != std::string_view::npos) body = body.substr(0, end);
    out.text = text::trim(body);
  }
  if (out.text.empty()) {
    throw Error(ErrorCode::EmptyCandidate, "explainer returned no " + name + " content");
  }
  return out;
}

Candidate generate_explanation(Backend& explainer, const Candidate& trigger,
                               const Instance& instance, const OptimizerConfig& config, int step,
                               const std::string& run_id) {
  if (trigger.kind != CandidateKind::TriggerPrompt) {
    throw Error(ErrorCode::WrongKind, "explanations are generated from a trigger prompt");
  }
  backend::GenRequest req;
  req.user_prompt = render_explanation_request(trigger.text, instance);
  req.temperature = config.explainer_temperature;
  req.top_p = config.explainer_top_p;
  req.max_tokens = config.explainer_max_tokens;
  req.instance_id = instance.id;
  const auto reply = backend::complete(explainer, req);
  return Candidate::make(CandidateKind::Explanation,
                         parse_tagged_output(reply.text, Tag::EXP).text, step, run_id);
}

namespace {

bool terminates_run(const Error& e) {
  switch (e.code()) {
    case ErrorCode::EmptyHint:
    case ErrorCode::HintEqualsSource:
    case ErrorCode::EmptyCandidate:
    case ErrorCode::AllInstancesFailed:
    case ErrorCode::ProbabilityUnsupported:
      return true;
    default:
      return is_backend_failure(e.code());
  }
}

RunRecord begin_record(RunKind kind, const OptimizerConfig& config, const RunHooks& hooks) {
  RunRecord record;
  record.run_id = hooks.run_id;
  record.kind = kind;
  record.config_snapshot = hooks.config_snapshot ? *hooks.config_snapshot : to_json(config);
  record.rng_seed = config.rng_seed;
  record.started_at = persistence::utc_timestamp();
  return record;
}

void note_repeat(RunRecord& record, std::set<std::string>& seen, const Candidate& c) {
  if (!seen.insert(text::canonical(c.text)).second) ++record.repeated_candidates;
}

void finish(RunRecord& record, const RunHooks& hooks) {
  record.selected = select_best(record.entries);
  if (hooks.on_finish) hooks.on_finish(record);
}

void push_entry(RunRecord& record, TrajectoryEntry entry, const RunHooks& hooks) {
  record.append(std::move(entry));
  if (hooks.on_entry) hooks.on_entry(record.entries.back());
}

}  // namespace

RunRecord optimize_explanation(const Instance& instance, const Candidate& seed_prompt,
                               Backend& target, Backend& explainer, Backend& agent,
                               const OptimizerConfig& config, const RunHooks& hooks) {
  config.validate();
  validate(instance);
  RunRecord record = begin_record(RunKind::ExplanationRun, config, hooks);
  record.instance = instance;
  if (hooks.on_start) hooks.on_start(record);

  const auto scoring = config.scoring();
  std::set<std::string> seen;
  try {
    Instance inst = instance;
    if (text::is_blank(inst.original_answer)) {
      backend::fill_original_answer(
          target, inst,
          {scoring.target_temperature, scoring.target_max_tokens,
           config.mode == ScoreMode::Probability, config.placement});
      record.instance = inst;
    }
    Candidate current = generate_explanation(explainer, seed_prompt, inst, config, 0, record.run_id);
    for (int t = 0;; ++t) {
      note_repeat(record, seen, current);
      const auto outcome = fidelity::fidelity_score(target, inst, current, agent, scoring);
      TrajectoryEntry entry{current, outcome.score.value,
                            ExplanationDetail{outcome.hint.text, outcome.intervened_answer,
                                              outcome.score.flipped,
                                              outcome.intervened_parse_failure},
                            std::nullopt};
      push_entry(record, std::move(entry), hooks);
      if (outcome.score.flipped) {
        record.termination = Termination::DecisionFlip;
        break;
      }
      if (t + 1 >= config.max_steps) {
        record.termination = Termination::MaxSteps;
        break;
      }
      const auto prompt = render_explanation_trajectory(record.entries, inst, config.trajectory_cap);
      backend::GenRequest req;
      req.system_prompt = prompt.system_prompt;
      req.user_prompt = prompt.user_prompt;
      req.temperature = config.explainer_temperature;
      req.top_p = config.explainer_top_p;
      req.max_tokens = config.explainer_max_tokens;
      req.instance_id = inst.id;
      const auto reply = backend::complete(explainer, req);
      current = Candidate::make(CandidateKind::Explanation,
                                parse_tagged_output(reply.text, Tag::EXP).text, t + 1,
                                record.run_id);
    }
  } catch (const Error& e) {
    if (!terminates_run(e)) throw;
    record.termination = Termination::BackendFailure;
    record.failure = e.what();
  }
  finish(record, hooks);
  return record;
}

TriggerScore score_trigger_prompt(const Candidate& prompt, std::span<const Instance> holdout,
                                  Backend& target, Backend& explainer, Backend& agent,
                                  const OptimizerConfig& config, parallel::Policy policy) {
  if (prompt.kind != CandidateKind::TriggerPrompt) {
    throw Error(ErrorCode::WrongKind, "only trigger prompts are scored over a hold-out");
  }
  if (holdout.empty()) throw Error(ErrorCode::EmptyList, "empty hold-out sample");
  if (!target.reentrant() || !explainer.reentrant() || !agent.reentrant()) {
    policy = parallel::Policy::Serial;
  }
  const auto scoring = config.scoring();
  TriggerScore out;
  out.per_instance.assign(holdout.size(), std::nullopt);
  std::vector<std::string> errors(holdout.size());
  parallel::for_each_index(policy, holdout.size(), config.max_inflight, [&](std::size_t i) {
    try {
      const auto expl = generate_explanation(explainer, prompt, holdout[i], config, prompt.step,
                                             prompt.parent_run);
      out.per_instance[i] =
          fidelity::fidelity_score(target, holdout[i], expl, agent, scoring).score.value;
    } catch (const Error& e) {
      errors[i] = holdout[i].id + ": " + e.what();
    }
  });

  double sum = 0.0;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    if (out.per_instance[i]) {
      sum += *out.per_instance[i];
      ++out.included;
    } else {
      ++out.excluded;
      out.failures.push_back(errors[i]);
    }
  }
  if (out.included == 0) {
    throw Error(ErrorCode::AllInstancesFailed,
                "every hold-out instance failed; first: " + out.failures.front());
  }
  out.mean = sum / out.included;
  return out;
}

RunRecord optimize_trigger_prompt(std::span<const Instance> dataset, const Candidate& seed_prompt,
                                  Backend& target, Backend& explainer, Backend& agent,
                                  const OptimizerConfig& config, const RunHooks& hooks) {
  config.validate();
  if (seed_prompt.kind != CandidateKind::TriggerPrompt) {
    throw Error(ErrorCode::WrongKind, "the seed must be a trigger prompt");
  }
  if (dataset.empty()) throw Error(ErrorCode::EmptyList, "empty dataset");
  if (static_cast<std::size_t>(config.holdout_size) > dataset.size()) {
    throw Error(ErrorCode::SampleTooLarge,
                "hold-out of " + std::to_string(config.holdout_size) + " exceeds the " +
                    std::to_string(dataset.size()) + " available instances");
  }

  RunRecord record = begin_record(RunKind::TriggerRun, config, hooks);
  if (hooks.on_start) hooks.on_start(record);

  std::set<std::string> seen;
  Candidate current = Candidate::make(CandidateKind::TriggerPrompt, seed_prompt.text, 0, record.run_id);
  try {
    for (int r = 0; r < config.max_steps; ++r) {
      note_repeat(record, seen, current);
      const auto sample = data::sample_holdout(
          dataset, static_cast<std::size_t>(config.holdout_size),
          data::derive_round_seed(config.rng_seed, static_cast<std::uint64_t>(r)));
      const auto score = score_trigger_prompt(current, sample, target, explainer, agent, config);
      HoldoutDetail detail;
      for (const auto& inst : sample) detail.instance_ids.push_back(inst.id);
      detail.instance_scores = score.per_instance;
      detail.excluded = score.excluded;
      push_entry(record, TrajectoryEntry{current, score.mean, std::nullopt, std::move(detail)},
                 hooks);
      if (r + 1 >= config.max_steps) break;

      backend::GenRequest req;
      req.system_prompt = render_trigger_trajectory(record.entries, config.trajectory_cap);
      req.user_prompt = std::string(kTriggerResponseCue);
      req.temperature = config.explainer_temperature;
      req.top_p = config.explainer_top_p;
      req.max_tokens = config.explainer_max_tokens;
      const auto reply = backend::complete(explainer, req);
      current = Candidate::make(CandidateKind::TriggerPrompt,
                                parse_tagged_output(reply.text, Tag::INS).text, r + 1,
                                record.run_id);
    }
    record.termination = Termination::MaxSteps;
  } catch (const Error& e) {
    if (!terminates_run(e)) throw;
    record.termination = Termination::BackendFailure;
    record.failure = e.what();
  }
  finish(record, hooks);
  return record;
}

}  // namespace faithlm::optimizer
