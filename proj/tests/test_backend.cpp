#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "faithlm/backend.hpp"
#include "faithlm/fixture_server.hpp"
#include "support.hpp"

namespace faithlm::backend {
namespace {

using faithlm::testing::magnet_instance;
using faithlm::testing::magnet_rules;

GenRequest req(std::string user, std::optional<std::string> id = std::nullopt) {
  GenRequest r;
  r.user_prompt = std::move(user);
  r.instance_id = std::move(id);
  return r;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no faithlm::Error thrown";
  return ErrorCode::InvalidArgument;
}

TEST(GenRequest, ValidateRejectsBadParameters) {
  auto r = req("hi");
  EXPECT_NO_THROW(validate(r));
  r.temperature = -1;
  EXPECT_THROW(validate(r), Error);
  r = req("hi");
  r.top_p = 0;
  EXPECT_THROW(validate(r), Error);
  r = req("  ");
  EXPECT_THROW(validate(r), Error);
}

TEST(ScriptedGenerator, RepliesInOrderThenExhausts) {
  ScriptedGenerator g(std::vector<std::string>{"a", "b"});
  EXPECT_EQ(g.complete(req("x")).text, "a");
  EXPECT_EQ(g.complete(req("x")).text, "b");
  EXPECT_EQ(code_of([&] { g.complete(req("x")); }), ErrorCode::ScriptExhausted);
  EXPECT_FALSE(g.reentrant());
}

TEST(ScriptedGenerator, ProbabilityOnlyWhenRequested) {
  ScriptedGenerator g(std::vector<ScriptedReply>{{"Yes", 0.8}, {"Yes", 0.8}});
  EXPECT_FALSE(g.complete(req("x")).answer_probability.has_value());
  auto r = req("x");
  r.want_token_probabilities = true;
  EXPECT_DOUBLE_EQ(*g.complete(r).answer_probability, 0.8);
}

TEST(ScriptBook, FirstMatchingEntryWithIndependentCursors) {
  ScriptBook book({{{"alpha"}, {{"a1", {}}, {"a2", {}}}, false},
                   {{"beta", "gamma"}, {{"bg", {}}}, true},
                   {{"beta"}, {{"b", {}}}, false}});
  EXPECT_EQ(book.complete(req("beta only")).text, "b");
  EXPECT_EQ(book.complete(req("alpha")).text, "a1");
  EXPECT_EQ(book.complete(req("gamma and beta")).text, "bg");
  EXPECT_EQ(book.complete(req("gamma and beta")).text, "bg");
  EXPECT_EQ(book.complete(req("alpha")).text, "a2");
  EXPECT_EQ(code_of([&] { book.complete(req("alpha")); }), ErrorCode::ScriptExhausted);
  EXPECT_EQ(code_of([&] { book.complete(req("delta")); }), ErrorCode::ScriptExhausted);
}

TEST(ScriptBook, MatchesSystemPromptToo) {
  ScriptBook book({{{"Score: 0.5"}, {{"hit", {}}}, false}});
  auto r = req("Response:");
  r.system_prompt = "Text: x\nScore: 0.5";
  EXPECT_EQ(book.complete(r).text, "hit");
}

TEST(RuleTable, MagnetRuleFlipsOnTrigger) {
  const auto m = magnet_rules();
  EXPECT_EQ(rule_eval(m, "magnet", testing::kMagnetQuestion), "No");
  EXPECT_EQ(rule_eval(m, "magnet", std::string(testing::kMagnetHint) + " " + testing::kMagnetQuestion),
            "Yes");
  EXPECT_EQ(rule_eval(m, "magnet", "SIMILAR POLES PULL EACH OTHER CLOSER"), "Yes");
  EXPECT_EQ(code_of([&] { rule_eval(m, "other", "x"); }), ErrorCode::UnknownInstance);
}

// Brute force over every subset of three triggers: the first rule (in table
// order) whose trigger is present decides; none present keeps the base.
TEST(RuleTable, FirstMatchingRuleOverAllSubsets) {
  RuleTableModel m;
  m.base_answers["q"] = "A";
  const std::vector<std::string> triggers = {"red fox", "blue whale", "green frog"};
  const std::vector<std::string> overrides = {"B", "C", "D"};
  for (int i = 0; i < 3; ++i) m.flip_rules.push_back({"q", triggers[i], overrides[i]});

  for (int mask = 0; mask < 8; ++mask) {
    std::string text = "prefix";
    for (int i = 2; i >= 0; --i) {
      if (mask & (1 << i)) text += " " + triggers[i];
    }
    std::string expected = "A";
    for (int i = 0; i < 3; ++i) {
      if (mask & (1 << i)) {
        expected = overrides[i];
        break;
      }
    }
    EXPECT_EQ(rule_eval(m, "q", text), expected) << "mask " << mask;
  }
}

TEST(RuleTable, ValidateAndJsonRoundTrip) {
  auto m = magnet_rules();
  const auto j = to_json(m);
  const auto back = rule_table_from_json(j);
  EXPECT_EQ(back.base_answers, m.base_answers);
  ASSERT_EQ(back.flip_rules.size(), 1u);
  EXPECT_EQ(back.flip_rules[0].trigger, m.flip_rules[0].trigger);

  m.flip_rules.push_back({"magnet", "x", "no"});
  EXPECT_THROW(m.validate(), Error);
  m.flip_rules.back() = {"nobody", "x", "Yes"};
  EXPECT_EQ(code_of([&] { m.validate(); }), ErrorCode::UnknownInstance);
}

TEST(RuleTableBackend, NeedsInstanceIdAndRefusesProbabilities) {
  RuleTableBackend b(magnet_rules());
  EXPECT_EQ(b.complete(req("question", "magnet")).text, "No");
  EXPECT_EQ(code_of([&] { b.complete(req("question")); }), ErrorCode::UnknownInstance);
  auto r = req("question", "magnet");
  r.want_token_probabilities = true;
  EXPECT_EQ(code_of([&] { b.complete(r); }), ErrorCode::ProbabilityUnsupported);
}

TEST(OfflineLoader, DispatchesOnShape) {
  EXPECT_EQ(offline_backend_from_json(nlohmann::json::array({"a"}))->name(), "scripted");
  EXPECT_EQ(offline_backend_from_json({{"entries", nlohmann::json::array()}})->name(), "script-book");
  EXPECT_EQ(offline_backend_from_json(to_json(magnet_rules()))->name(), "rule-table");
  EXPECT_EQ(code_of([] { offline_backend_from_json({{"what", 1}}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { offline_backend_from_json({{"entries", {{{"replies", {"x"}}}}}}); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { load_offline_backend("/nonexistent/file.json"); }), ErrorCode::Io);
}

TEST(Answering, PlainAndIntervenedQueries) {
  RuleTableBackend target(magnet_rules());
  const auto inst = magnet_instance();
  const auto plain = answer_instance(target, inst, nullptr, {});
  EXPECT_EQ(plain.normalized, "No");
  const auto hint = ContraryHint::make(testing::kMagnetHint, testing::kMagnetExplanation);
  EXPECT_EQ(answer_instance(target, inst, &hint, {}).normalized, "Yes");

  Instance blank = inst;
  blank.original_answer.clear();
  fill_original_answer(target, blank, {});
  EXPECT_EQ(blank.original_answer, "No");
}

TEST(Answering, MissingProbabilityIsReported) {
  ScriptedGenerator g(std::vector<std::string>{"No"});
  AnswerSettings s;
  s.want_probability = true;
  EXPECT_EQ(code_of([&] { answer_instance(g, magnet_instance(), nullptr, s); }),
            ErrorCode::ProbabilityUnsupported);
}

// --- HTTP -----------------------------------------------------------------

HttpConfig fast_config(const FixtureServer& server) {
  HttpConfig c;
  c.base_url = server.base_url();
  c.api_key = "sk-test";
  c.model = "m1";
  c.initial_backoff = std::chrono::milliseconds(1);
  c.max_backoff = std::chrono::milliseconds(4);
  c.timeout = std::chrono::seconds(5);
  return c;
}

TEST(Http, RequestBodyAndAuthOnTheWire) {
  auto server = FixtureServer::fixed(R"({"content":"Yes"})");
  HttpChatBackend b(fast_config(server));
  GenRequest r = req("Q?", "magnet");
  r.system_prompt = "sys";
  r.temperature = 0.5;
  r.top_p = 0.9;
  r.max_tokens = 7;
  EXPECT_EQ(b.complete(r).text, "Yes");

  const auto got = server.requests();
  ASSERT_EQ(got.size(), 1u);
  const nlohmann::json expected = {
      {"model", "m1"},
      {"messages", {{{"role", "system"}, {"content", "sys"}}, {{"role", "user"}, {"content", "Q?"}}}},
      {"temperature", 0.5},
      {"top_p", 0.9},
      {"max_tokens", 7}};
  EXPECT_EQ(got[0].dump(), expected.dump());
  EXPECT_EQ(got[0].dump(), chat_request_body(r, "m1").dump());
  ASSERT_EQ(server.authorization_headers().size(), 1u);
  EXPECT_EQ(server.authorization_headers()[0], "Bearer sk-test");
}

TEST(Http, ProbabilityIsExpOfSummedLogprobs) {
  auto server = FixtureServer::fixed(R"({"content":"No","token_logprobs":[-0.1,-0.2]})");
  HttpChatBackend b(fast_config(server));
  auto r = req("Q?");
  r.want_token_probabilities = true;
  EXPECT_NEAR(*b.complete(r).answer_probability, std::exp(-0.3), 1e-12);
  EXPECT_FALSE(b.complete(req("Q?")).answer_probability.has_value());
}

TEST(Http, RetriesTransientStatusThenSucceeds) {
  std::atomic<int> calls{0};
  FixtureServer server([&](const nlohmann::json&) -> FixtureServer::Reply {
    const int n = calls++;
    if (n == 0) return {503, "busy"};
    if (n == 1) return {429, "slow down"};
    return {200, R"({"content":"ok"})"};
  });
  HttpChatBackend b(fast_config(server));
  EXPECT_EQ(b.complete(req("x")).text, "ok");
  EXPECT_EQ(b.attempts(), 3u);
}

TEST(Http, GivesUpAfterMaxAttempts) {
  FixtureServer server([](const nlohmann::json&) { return FixtureServer::Reply{500, "down"}; });
  auto cfg = fast_config(server);
  cfg.max_attempts = 2;
  HttpChatBackend b(cfg);
  EXPECT_EQ(code_of([&] { b.complete(req("x")); }), ErrorCode::BackendUnavailable);
  EXPECT_EQ(b.attempts(), 2u);
}

TEST(Http, ClientErrorsAreNotRetried) {
  FixtureServer server([](const nlohmann::json&) { return FixtureServer::Reply{401, "no"}; });
  HttpChatBackend b(fast_config(server));
  EXPECT_EQ(code_of([&] { b.complete(req("x")); }), ErrorCode::BackendUnavailable);
  EXPECT_EQ(b.attempts(), 1u);
}

TEST(Http, MalformedBodies) {
  EXPECT_EQ(code_of([] { parse_chat_response("not json", false); }), ErrorCode::MalformedResponse);
  EXPECT_EQ(code_of([] { parse_chat_response(R"({"text":"x"})", false); }),
            ErrorCode::MalformedResponse);
  EXPECT_EQ(code_of([] { parse_chat_response(R"({"content":"x","token_logprobs":["a"]})", true); }),
            ErrorCode::MalformedResponse);
  auto server = FixtureServer::fixed(R"({"content":"x"})");
  HttpChatBackend b(fast_config(server));
  auto r = req("x");
  r.want_token_probabilities = true;
  EXPECT_EQ(code_of([&] { b.complete(r); }), ErrorCode::ProbabilityUnsupported);
}

TEST(Http, UnreachableServerIsBackendUnavailable) {
  HttpConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.max_attempts = 2;
  c.initial_backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::seconds(1);
  HttpChatBackend b(c);
  EXPECT_EQ(code_of([&] { b.complete(req("x")); }), ErrorCode::BackendUnavailable);
  EXPECT_EQ(code_of([] { HttpChatBackend(HttpConfig{}); }), ErrorCode::InvalidArgument);
}

}  // namespace
}  // namespace faithlm::backend
