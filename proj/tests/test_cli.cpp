#include <gtest/gtest.h>

#include <sstream>

#include "faithlm/cli.hpp"
#include "faithlm/persistence.hpp"
#include "support.hpp"

namespace faithlm::cli {
namespace {

using faithlm::testing::fixture;
using faithlm::testing::read_file;
using faithlm::testing::TempDir;

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(read_file(p)); }

std::string without_timestamps(const std::string& jsonl) {
  std::istringstream in(jsonl);
  std::string line, out;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    j.erase("started_at");
    out += j.dump() + "\n";
  }
  return out;
}

// Independent oracle for the mock3 demo: an instance scores 1 when any hint
// the agent script returns for that instance's scripted explanations contains
// one of the instance's rule triggers (casefolded substring), else 0.
double brute_force_mock3_mean() {
  const auto rules = read_json(fixture("mock3/rules.json"));
  const auto explainer = read_json(fixture("mock3/explainer.json"));
  const auto agent = read_json(fixture("mock3/agent.json"));
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  const std::map<std::string, std::string> question_key = {
      {"magnet", "Can the positive pole"}, {"apple", "Where is an apple tree"},
      {"ice", "Does ice float"}};
  double sum = 0;
  for (const auto& [id, key] : question_key) {
    bool hit = false;
    for (const auto& entry : explainer["entries"]) {
      if (entry["match"][0].get<std::string>().find(key) == std::string::npos) continue;
      for (const auto& reply : entry["replies"]) {
        for (const auto& a : agent["entries"]) {
          if (reply.get<std::string>().find(a["match"][0].get<std::string>()) == std::string::npos) continue;
          const std::string hint = lower(a["replies"][0].get<std::string>());
          for (const auto& rule : rules["flip_rules"]) {
            if (rule["instance_id"] == id && hint.find(lower(rule["trigger"])) != std::string::npos) {
              hit = true;
            }
          }
        }
      }
    }
    sum += hit ? 1.0 : 0.0;
  }
  return sum / 3.0;
}

TEST(Cli, ExplainMock3WritesRunsAndReport) {
  TempDir dir;
  const auto out = dir.path() / "runs";
  const auto r = run_cli({"explain", "--config", fixture("mock3/config.json").string(), "--out",
                          out.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(persistence::list_run_files(out).size(), 3u);
  const auto report = read_json(out / "report.json");
  EXPECT_EQ(report["n"], 3);
  EXPECT_EQ(report["mean_fidelity"].get<double>(), brute_force_mock3_mean());
  EXPECT_TRUE(std::filesystem::exists(out / "step_means.csv"));

  const auto magnet = persistence::load_run_record(out / "explain-magnet.jsonl");
  EXPECT_EQ(magnet.termination, Termination::DecisionFlip);
  EXPECT_EQ(magnet.entries.size(), 1u);
  const auto ice = persistence::load_run_record(out / "explain-ice.jsonl");
  EXPECT_EQ(ice.termination, Termination::MaxSteps);
  EXPECT_EQ(ice.entries.size(), 3u);

  const auto again = run_cli({"explain", "--config", fixture("mock3/config.json").string(),
                              "--out", out.string()});
  EXPECT_EQ(again.code, kConfigError);
  EXPECT_NE(again.err.find("already exists"), std::string::npos);
}

TEST(Cli, MissingDatasetWritesNothing) {
  TempDir dir;
  const auto out = dir.path() / "runs";
  const auto r = run_cli({"explain", "--config", fixture("mock3/config.json").string(), "--dataset",
                          (dir.path() / "absent.jsonl").string(), "--out", out.string()});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_FALSE(std::filesystem::exists(out));
}

TEST(Cli, MaxStepsFlagCapsEntries) {
  TempDir dir;
  const auto out = dir.path() / "runs";
  const auto r = run_cli({"explain", "--config", fixture("mock3/config.json").string(),
                          "--max-steps", "1", "--out", out.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  for (const auto& p : persistence::list_run_files(out)) {
    const auto rec = persistence::load_run_record(p);
    EXPECT_LE(rec.entries.size(), 1u);
    EXPECT_EQ(rec.config_snapshot["explain_steps"], 1);
  }
}

TEST(Cli, FlagOverridesFileOverridesDefault) {
  TempDir dir;
  const auto out = dir.path() / "runs";
  const auto r = run_cli({"explain", "--config", fixture("mock3/config.json").string(), "--seed",
                          "5", "--out", out.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto rec = persistence::load_run_record(out / "explain-apple.jsonl");
  EXPECT_EQ(rec.config_snapshot["seed"], 5);          // flag beats the file's 7
  EXPECT_EQ(rec.config_snapshot["explain_steps"], 3);  // file beats the default 20
  EXPECT_EQ(rec.config_snapshot["holdout"], 30);       // default
  EXPECT_EQ(rec.rng_seed, 5u);
  EXPECT_FALSE(rec.config_snapshot.contains("out"));
}

TEST(Cli, IdenticalRunsAreByteIdenticalExceptTimestamps) {
  TempDir dir;
  for (const char* name : {"a", "b"}) {
    const auto r = run_cli({"explain", "--config", fixture("mock3/config.json").string(), "--out",
                            (dir.path() / name).string()});
    ASSERT_EQ(r.code, kOk) << r.err;
  }
  const auto a = persistence::list_run_files(dir.path() / "a");
  ASSERT_EQ(a.size(), 3u);
  for (const auto& p : a) {
    EXPECT_EQ(without_timestamps(read_file(p)),
              without_timestamps(read_file(dir.path() / "b" / p.filename())));
  }
}

TEST(Cli, OptimizePromptCsvReachesOneAtRoundThree) {
  TempDir dir;
  const auto out = dir.path() / "t";
  const auto r = run_cli({"optimize-prompt", "--config", fixture("trigger3/config.json").string(),
                          "--out", out.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(read_file(out / "trigger_scores.csv"),
            read_file(fixture("trigger3/expected_trigger_scores.csv")));
  const auto rec = persistence::load_run_record(out / "trigger.jsonl");
  EXPECT_EQ(rec.entries.size(), 3u);
  EXPECT_EQ(rec.selected, std::optional<std::size_t>(2));
}

TEST(Cli, OptimizePromptRowCountFollowsSteps) {
  TempDir dir;
  const auto out = dir.path() / "t";
  const auto r = run_cli({"optimize-prompt", "--config", fixture("trigger3/config.json").string(),
                          "--steps", "2", "--holdout", "2", "--out", out.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto csv = read_file(out / "trigger_scores.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Cli, ZeroStepsIsConfigError) {
  TempDir dir;
  const auto r = run_cli({"optimize-prompt", "--config", fixture("trigger3/config.json").string(),
                          "--steps", "0", "--out", (dir.path() / "t").string()});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "t"));
}

TEST(Cli, EvaluateMatchesGoldenReport) {
  TempDir dir;
  const auto out = dir.path() / "runs";
  ASSERT_EQ(run_cli({"explain", "--config", fixture("mock3/config.json").string(), "--out",
                     out.string()})
                .code,
            kOk);
  const auto r = run_cli({"evaluate", "--config", fixture("mock3/config.json").string(), "--runs",
                          out.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto expected = read_file(fixture("mock3/expected_eval_report.json"));
  EXPECT_EQ(read_file(out / "eval_report.json"), expected);
  EXPECT_EQ(r.out, expected);

  const auto rep = run_cli({"report", "--runs", out.string()});
  ASSERT_EQ(rep.code, kOk);
  EXPECT_EQ(nlohmann::json::parse(rep.out)["mean_fidelity"],
            nlohmann::json::parse(expected)["mean_fidelity"]);
}

TEST(Cli, EvaluateEmptyRunDirectory) {
  TempDir dir;
  const auto r = run_cli({"evaluate", "--config", fixture("mock3/config.json").string(), "--runs",
                          dir.path().string()});
  EXPECT_EQ(r.code, kConfigError);
}

TEST(Cli, ExplainMock20ReportsFlipRate) {
  TempDir dir;
  const auto out = dir.path() / "runs";
  const auto r = run_cli({"explain", "--config", fixture("mock20/config.json").string(), "--out",
                          out.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(read_json(out / "report.json")["mean_fidelity"].get<double>(), 0.35);
}

TEST(Cli, PartialFailureExitCode) {
  TempDir dir;
  // The agent script lacks an entry for one instance, so that run fails.
  const auto agent = read_json(fixture("mock3/agent.json"));
  nlohmann::json trimmed = {{"entries", nlohmann::json::array()}};
  for (const auto& e : agent["entries"]) {
    if (e["match"][0] != "similar poles push each other away") trimmed["entries"].push_back(e);
  }
  const auto agent_path = dir.path() / "agent.json";
  persistence::write_new_file(agent_path, trimmed.dump());
  auto config = read_json(fixture("mock3/config.json"));
  const auto base = fixture("mock3");
  config["dataset"] = (base / "dataset.jsonl").string();
  config["offline"]["target"] = (base / "rules.json").string();
  config["offline"]["explainer"] = (base / "explainer.json").string();
  config["offline"]["agent"] = agent_path.string();
  config["offline"]["judge"] = (base / "judge.json").string();
  const auto config_path = dir.path() / "config.json";
  persistence::write_new_file(config_path, config.dump());

  const auto r = run_cli({"explain", "--config", config_path.string(), "--out",
                          (dir.path() / "runs").string()});
  EXPECT_EQ(r.code, kPartialFailure);
  const auto rec = persistence::load_run_record(dir.path() / "runs" / "explain-magnet.jsonl");
  EXPECT_EQ(rec.termination, Termination::BackendFailure);
}

TEST(Cli, BadInputs) {
  EXPECT_EQ(run_cli({}).code, kConfigError);
  EXPECT_EQ(run_cli({"explain", "--mode", "fuzzy"}).code, kConfigError);
  EXPECT_EQ(run_cli({"explain", "--backend", "mock"}).code, kConfigError);
  EXPECT_EQ(run_cli({"--help"}).code, kOk);

  TempDir dir;
  const auto cfg = dir.path() / "c.json";
  persistence::write_new_file(cfg, R"({"explain_stepz": 3})");
  const auto r = run_cli({"explain", "--config", cfg.string()});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("explain_stepz"), std::string::npos);
}

TEST(Cli, HttpBackendNeedsBaseUrl) {
  ResolvedConfig c;
  c.backend = BackendKind::Http;
  EXPECT_THROW(make_backends(c, {.target = true}), Error);
  c.http.base_url = "http://127.0.0.1:9";
  const auto b = make_backends(c, {.target = true, .judge = true});
  EXPECT_EQ(b.target->name(), "http");
  EXPECT_EQ(b.explainer, nullptr);
  EXPECT_FALSE(snapshot(c)["http"].contains("api_key"));
}

}  // namespace
}  // namespace faithlm::cli
