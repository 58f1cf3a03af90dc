// Serial reference vs OpenMP scoring of a hold-out. Backends sleep to stand
// in for network latency, so the parallel speedup shows even on one core.

#include <benchmark/benchmark.h>

#include <chrono>
#include <thread>

#include "faithlm/fidelity.hpp"
#include "faithlm/optimizer.hpp"

namespace {

using namespace faithlm;
using backend::CallbackBackend;
using backend::GenRequest;
using backend::GenResponse;

constexpr auto kLatency = std::chrono::microseconds(500);

struct Rig {
  explicit Rig(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "i" + std::to_string(i);
      model.base_answers[id] = "Yes";
      model.flip_rules.push_back({id, "trigger for " + id + " fires", "No"});
      Instance inst;
      inst.id = id;
      inst.question = "Is item " + id + " ready?";
      inst.choices = {"Yes", "No"};
      inst.original_answer = "Yes";
      instances.push_back(inst);
    }
  }

  backend::RuleTableModel model;
  std::vector<Instance> instances;
};

GenResponse slow(std::string text) {
  std::this_thread::sleep_for(kLatency);
  return {std::move(text), std::nullopt};
}

void BM_ScoreTriggerPrompt(benchmark::State& state) {
  const auto policy = state.range(0) ? parallel::Policy::Parallel : parallel::Policy::Serial;
  Rig rig(static_cast<std::size_t>(state.range(1)));
  backend::RuleTableBackend rules(rig.model);
  CallbackBackend target([&](const GenRequest& r) { return slow(rules.complete(r).text); });
  CallbackBackend explainer(
      [](const GenRequest& r) { return slow("<EXP>about " + *r.instance_id + "</EXP>"); });
  CallbackBackend agent([](const GenRequest& r) {
    const auto id = r.user_prompt.substr(r.user_prompt.rfind("about ") + 6, 2);
    return slow(id == "i1" ? "Indeed trigger for i1 fires." : "Nothing here.");
  });
  auto config = optimizer::OptimizerConfig::trigger_defaults();
  config.max_inflight = 8;
  const auto prompt = optimizer::seed_trigger_prompt();
  for (auto _ : state) {
    auto score = optimizer::score_trigger_prompt(prompt, rig.instances, target, explainer, agent,
                                                 config, policy);
    benchmark::DoNotOptimize(score.mean);
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_ScoreTriggerPrompt)
    ->ArgNames({"parallel", "holdout"})
    ->Args({0, 30})
    ->Args({1, 30})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

void BM_ScoreBatch(benchmark::State& state) {
  const auto policy = state.range(0) ? parallel::Policy::Parallel : parallel::Policy::Serial;
  Rig rig(static_cast<std::size_t>(state.range(1)));
  backend::RuleTableBackend rules(rig.model);
  CallbackBackend target([&](const GenRequest& r) { return slow(rules.complete(r).text); });
  CallbackBackend agent([](const GenRequest&) { return slow("Nothing relevant at all."); });
  const auto expl = Candidate::make(CandidateKind::Explanation, "It is ready.", 0);
  std::vector<fidelity::ScoringJob> jobs;
  for (const auto& inst : rig.instances) jobs.push_back({&inst, &expl});
  for (auto _ : state) {
    auto out = fidelity::score_batch(jobs, target, agent, {}, policy, 8);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_ScoreBatch)
    ->ArgNames({"parallel", "jobs"})
    ->Args({0, 64})
    ->Args({1, 64})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
