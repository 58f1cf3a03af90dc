#include "faithlm/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "faithlm/data.hpp"
#include "faithlm/eval.hpp"
#include "faithlm/parallel.hpp"
#include "faithlm/persistence.hpp"

namespace faithlm::cli {

namespace {

struct Flags {
  std::string config, dataset, backend, mode, out, runs;
  std::uint64_t seed = 0;
  int max_steps = 0, steps = 0, holdout = 0, max_inflight = 0;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_common(CLI::App& cmd, Flags& f) {
  f.opts["config"] = cmd.add_option("--config", f.config, "JSON config file");
  f.opts["dataset"] = cmd.add_option("--dataset", f.dataset, "JSONL dataset or manifest (.json)");
  f.opts["backend"] = cmd.add_option("--backend", f.backend, "http, mock or scripted")
                          ->check(CLI::IsMember({"http", "mock", "scripted"}));
  f.opts["mode"] = cmd.add_option("--mode", f.mode, "fidelity score: flip or prob")
                       ->check(CLI::IsMember({"flip", "prob"}));
  f.opts["seed"] = cmd.add_option("--seed", f.seed, "sampling seed");
  f.opts["out"] = cmd.add_option("--out", f.out, "output run directory");
  f.opts["max-inflight"] =
      cmd.add_option("--max-inflight", f.max_inflight, "concurrent instances / requests");
}

ResolvedConfig resolve(const Flags& f) {
  ResolvedConfig c;
  if (f.given("config")) apply_config_file(c, f.config);
  if (const char* base = std::getenv("FAITHLM_API_BASE"); base && *base) c.http.base_url = base;
  if (const char* key = std::getenv("FAITHLM_API_KEY"); key && *key) c.http.api_key = key;
  if (f.given("dataset")) c.dataset = f.dataset;
  if (f.given("backend")) c.backend = backend_kind_from_string(f.backend);
  if (f.given("mode")) c.mode = score_mode_from_string(f.mode);
  if (f.given("seed")) c.seed = f.seed;
  if (f.given("out")) c.out = f.out;
  if (f.given("max-inflight")) c.max_inflight = f.max_inflight;
  if (f.given("max-steps")) c.explain_steps = f.max_steps;
  if (f.given("steps")) c.trigger_steps = f.steps;
  if (f.given("holdout")) c.holdout = f.holdout;
  return c;
}

std::vector<Instance> load_checked_dataset(const ResolvedConfig& c) {
  if (c.dataset.empty()) throw Error(ErrorCode::InvalidArgument, "no dataset given (--dataset)");
  if (!std::filesystem::is_regular_file(c.dataset)) {
    throw Error(ErrorCode::Io, "dataset '" + c.dataset.string() + "' not found");
  }
  auto instances = data::load_dataset(c.dataset);
  if (instances.empty()) {
    throw Error(ErrorCode::EmptyList, "dataset '" + c.dataset.string() + "' has no instances");
  }
  return instances;
}

Candidate seed_prompt(const ResolvedConfig& c) {
  if (c.seed_prompt.empty()) return optimizer::seed_trigger_prompt();
  std::ifstream in(c.seed_prompt);
  if (!in) throw Error(ErrorCode::Io, "cannot open seed prompt '" + c.seed_prompt.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return Candidate::make(CandidateKind::TriggerPrompt, text::trim(ss.str()), 0);
}

void refuse_existing(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths) {
    if (std::filesystem::exists(p)) {
      throw Error(ErrorCode::RunExists, "'" + p.string() + "' already exists; pick a new --out");
    }
  }
}

std::string num(double v) { return nlohmann::json(v).dump(); }

bool all_reentrant(std::initializer_list<const backend::BackendPtr*> backends) {
  for (const auto* b : backends) {
    if (*b && !(*b)->reentrant()) return false;
  }
  return true;
}

std::vector<double> selected_scores(const std::vector<RunRecord>& records) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.selected) out.push_back(r.entries[*r.selected].score);
  }
  return out;
}

/// step,mean_score,mean_best_so_far,runs. mean_score averages the runs that
/// reached the step; mean_best_so_far carries each run's best score forward.
std::string step_means_csv(const std::vector<RunRecord>& records) {
  std::size_t longest = 0;
  for (const auto& r : records) longest = std::max(longest, r.entries.size());
  std::string csv = "step,mean_score,mean_best_so_far,runs\n";
  for (std::size_t s = 0; s < longest; ++s) {
    double at = 0.0, best = 0.0;
    int reached = 0, active = 0;
    for (const auto& r : records) {
      if (r.entries.empty()) continue;
      ++active;
      double b = 0.0;
      for (std::size_t k = 0; k < r.entries.size() && k <= s; ++k) {
        b = std::max(b, r.entries[k].score);
      }
      best += b;
      if (s < r.entries.size()) {
        at += r.entries[s].score;
        ++reached;
      }
    }
    csv += std::to_string(s) + "," + num(at / reached) + "," + num(best / active) + "," +
           std::to_string(reached) + "\n";
  }
  return csv;
}

std::string report_text(const eval::Report& report) { return eval::to_json(report).dump(2) + "\n"; }

std::string explain_file_name(const Instance& inst) {
  return "explain-" + persistence::sanitize_id(inst.id) + ".jsonl";
}

int cmd_explain(const ResolvedConfig& c, std::ostream& out, std::ostream& err) {
  const auto config = c.explanation_config();
  config.validate();
  const auto instances = load_checked_dataset(c);
  const auto seed = seed_prompt(c);
  auto b = make_backends(c, {.target = true, .explainer = true, .agent = true});

  std::vector<std::filesystem::path> paths;
  std::set<std::string> names;
  for (const auto& inst : instances) {
    const auto name = explain_file_name(inst);
    if (!names.insert(name).second) {
      throw Error(ErrorCode::DuplicateId, "instance ids collide as file name '" + name + "'");
    }
    paths.push_back(c.out / name);
  }
  const auto report_path = c.out / "report.json";
  const auto steps_path = c.out / "step_means.csv";
  auto all_paths = paths;
  all_paths.push_back(report_path);
  all_paths.push_back(steps_path);
  refuse_existing(all_paths);
  std::filesystem::create_directories(c.out);

  const auto snap = snapshot(c);
  const auto policy = all_reentrant({&b.target, &b.explainer, &b.agent}) ? parallel::Policy::Parallel
                                                                         : parallel::Policy::Serial;
  std::vector<RunRecord> records(instances.size());
  std::vector<std::string> errors(instances.size());
  parallel::for_each_index(policy, instances.size(), c.max_inflight, [&](std::size_t i) {
    try {
      persistence::RunWriter writer(paths[i]);
      optimizer::RunHooks hooks;
      hooks.run_id = "explain-" + instances[i].id;
      hooks.config_snapshot = snap;
      hooks.on_start = [&](const RunRecord& r) { writer.start(r); };
      hooks.on_entry = [&](const TrajectoryEntry& e) { writer.entry(e); };
      hooks.on_finish = [&](const RunRecord& r) { writer.finish(r); };
      records[i] = optimizer::optimize_explanation(instances[i], seed, *b.target, *b.explainer,
                                                   *b.agent, config, hooks);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  bool partial = false;
  std::vector<RunRecord> finished;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!errors[i].empty()) {
      partial = true;
      err << "error: " << instances[i].id << ": " << errors[i] << "\n";
      continue;
    }
    const auto& r = records[i];
    if (r.termination == Termination::BackendFailure) {
      partial = true;
      err << "warning: " << instances[i].id << ": " << r.failure << "\n";
    }
    out << instances[i].id << "\t" << to_string(r.termination) << "\tentries=" << r.entries.size();
    if (r.selected) out << "\tselected=" << num(r.entries[*r.selected].score);
    out << "\n";
    finished.push_back(r);
  }

  const auto scores = selected_scores(finished);
  const auto report = eval::aggregate_report(scores, {}, {}, {});
  persistence::write_new_file(report_path, report_text(report));
  persistence::write_new_file(steps_path, step_means_csv(finished));
  out << report_text(report);
  return partial ? kPartialFailure : kOk;
}

int cmd_optimize_prompt(const ResolvedConfig& c, std::ostream& out, std::ostream& err) {
  const auto config = c.trigger_config();
  config.validate();
  auto instances = load_checked_dataset(c);
  const auto seed = seed_prompt(c);
  auto b = make_backends(c, {.target = true, .explainer = true, .agent = true});

  const auto run_path = c.out / "trigger.jsonl";
  const auto csv_path = c.out / "trigger_scores.csv";
  refuse_existing({run_path, csv_path});

  bool partial = false;
  const backend::AnswerSettings answer{config.target_temperature, 64,
                                       config.mode == ScoreMode::Probability, config.placement};
  std::vector<Instance> usable;
  for (auto& inst : instances) {
    if (text::is_blank(inst.original_answer)) {
      try {
        backend::fill_original_answer(*b.target, inst, answer);
      } catch (const Error& e) {
        partial = true;
        err << "warning: skipping " << inst.id << ": " << e.what() << "\n";
        continue;
      }
    }
    usable.push_back(std::move(inst));
  }
  if (usable.size() < static_cast<std::size_t>(config.holdout_size)) {
    throw Error(ErrorCode::SampleTooLarge,
                "hold-out of " + std::to_string(config.holdout_size) + " needs more than the " +
                    std::to_string(usable.size()) + " answerable instances");
  }

  std::filesystem::create_directories(c.out);
  persistence::RunWriter writer(run_path);
  optimizer::RunHooks hooks;
  hooks.run_id = "trigger";
  hooks.config_snapshot = snapshot(c);
  hooks.on_start = [&](const RunRecord& r) { writer.start(r); };
  hooks.on_entry = [&](const TrajectoryEntry& e) { writer.entry(e); };
  hooks.on_finish = [&](const RunRecord& r) { writer.finish(r); };
  const auto record = optimizer::optimize_trigger_prompt(usable, seed, *b.target, *b.explainer,
                                                         *b.agent, config, hooks);

  std::string csv = "round,step,score,best_so_far,included,excluded\n";
  double best = 0.0;
  for (std::size_t i = 0; i < record.entries.size(); ++i) {
    const auto& e = record.entries[i];
    best = std::max(best, e.score);
    const int excluded = e.holdout ? e.holdout->excluded : 0;
    const int included = e.holdout ? static_cast<int>(e.holdout->instance_ids.size()) - excluded : 0;
    csv += std::to_string(i + 1) + "," + std::to_string(e.candidate.step) + "," + num(e.score) +
           "," + num(best) + "," + std::to_string(included) + "," + std::to_string(excluded) + "\n";
  }
  persistence::write_new_file(csv_path, csv);

  if (record.termination == Termination::BackendFailure) {
    partial = true;
    err << "warning: trigger run stopped early: " << record.failure << "\n";
  }
  if (record.selected) {
    const auto& e = record.entries[*record.selected];
    out << "selected step " << e.candidate.step << " score " << num(e.score) << "\n"
        << e.candidate.text << "\n";
  }
  return partial ? kPartialFailure : kOk;
}

std::vector<RunRecord> load_explanation_runs(const std::filesystem::path& dir) {
  std::vector<RunRecord> runs;
  for (const auto& p : persistence::list_run_files(dir)) {
    auto r = persistence::load_run_record(p);
    if (r.kind == RunKind::ExplanationRun) runs.push_back(std::move(r));
  }
  if (runs.empty()) {
    throw Error(ErrorCode::EmptyList, "no explanation runs under '" + dir.string() + "'");
  }
  return runs;
}

int cmd_evaluate(const ResolvedConfig& c, const std::filesystem::path& runs_dir, std::ostream& out,
                 std::ostream& err) {
  const auto runs = load_explanation_runs(runs_dir);
  const auto report_path = runs_dir / "eval_report.json";
  refuse_existing({report_path});
  auto b = make_backends(c, {.judge = true});

  std::vector<double> fidelity;
  std::vector<eval::JudgeVerdict> truth, contra;
  std::vector<int> scale;
  std::size_t parse_failures = 0;
  bool partial = false;
  auto judged = [&](const std::string& id, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnparsableVerdict || e.code() == ErrorCode::UnparsableScore) {
        ++parse_failures;
      } else if (is_backend_failure(e.code())) {
        partial = true;
        err << "warning: " << id << ": " << e.what() << "\n";
      } else {
        throw;
      }
    }
  };

  for (const auto& r : runs) {
    if (!r.selected) continue;
    const auto& e = r.entries[*r.selected];
    fidelity.push_back(e.score);
    const std::string& expl = e.candidate.text;
    if (r.instance && r.instance->gold_explanation) {
      judged(r.run_id, [&] {
        truth.push_back(eval::judge_truthfulness(*b.judge, expl, *r.instance->gold_explanation));
      });
    }
    if (e.explanation && !e.explanation->hint.empty()) {
      const std::string& hint = e.explanation->hint;
      judged(r.run_id, [&] { contra.push_back(eval::judge_contrariety(*b.judge, expl, hint)); });
      judged(r.run_id, [&] { scale.push_back(eval::judge_scale_score(*b.judge, expl, hint)); });
    }
  }
  const auto report = eval::aggregate_report(fidelity, truth, contra, scale, parse_failures);
  persistence::write_new_file(report_path, report_text(report));
  out << report_text(report);
  return partial ? kPartialFailure : kOk;
}

int cmd_report(const std::filesystem::path& runs_dir, std::ostream& out) {
  const auto runs = load_explanation_runs(runs_dir);
  out << report_text(eval::aggregate_report(selected_scores(runs), {}, {}, {}));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrary-hint fidelity: explanation and trigger-prompt optimization"};
  app.name("faithlm");
  app.require_subcommand(1);

  Flags explain_f, prompt_f, eval_f, report_f;
  auto* explain = app.add_subcommand("explain", "optimize an explanation per instance");
  add_common(*explain, explain_f);
  explain_f.opts["max-steps"] =
      explain->add_option("--max-steps", explain_f.max_steps, "rounds per instance");

  auto* prompt = app.add_subcommand("optimize-prompt", "optimize the trigger prompt");
  add_common(*prompt, prompt_f);
  prompt_f.opts["steps"] = prompt->add_option("--steps", prompt_f.steps, "optimization rounds");
  prompt_f.opts["holdout"] =
      prompt->add_option("--holdout", prompt_f.holdout, "hold-out instances per round");

  auto* evaluate = app.add_subcommand("evaluate", "judge the selected explanations of a run dir");
  add_common(*evaluate, eval_f);
  eval_f.opts["runs"] = evaluate->add_option("--runs", eval_f.runs, "run directory (default --out)");

  auto* report = app.add_subcommand("report", "recompute the fidelity report of a run dir");
  add_common(*report, report_f);
  report_f.opts["runs"] = report->add_option("--runs", report_f.runs, "run directory (default --out)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (explain->parsed()) return cmd_explain(resolve(explain_f), out, err);
    if (prompt->parsed()) return cmd_optimize_prompt(resolve(prompt_f), out, err);
    if (evaluate->parsed()) {
      const auto c = resolve(eval_f);
      return cmd_evaluate(c, eval_f.given("runs") ? std::filesystem::path(eval_f.runs) : c.out, out, err);
    }
    const auto c = resolve(report_f);
    return cmd_report(report_f.given("runs") ? std::filesystem::path(report_f.runs) : c.out, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace faithlm::cli
