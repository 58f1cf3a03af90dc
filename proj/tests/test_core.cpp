#include <gtest/gtest.h>

#include <vector>

#include "faithlm/core.hpp"

namespace faithlm {
namespace {

const std::vector<std::string> kYesNo = {"Yes", "No"};

TEST(NormalizeAnswer, ResolvesChoiceInsideFreeText) {
  EXPECT_EQ(normalize_answer("  No.  ", kYesNo), "No");
  EXPECT_EQ(normalize_answer("yes, they can", kYesNo), "Yes");
  EXPECT_EQ(normalize_answer("The answer is: NO!", kYesNo), "No");
}

TEST(NormalizeAnswer, MatchesWholeWordsOnly) {
  EXPECT_THROW(normalize_answer("I do not know", kYesNo), Error);
  try {
    normalize_answer("Nothing to say", kYesNo);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoChoiceMatched);
  }
}

TEST(NormalizeAnswer, AmbiguousWhenSeveralChoicesAppear) {
  try {
    normalize_answer("Yes or no", kYesNo);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AmbiguousAnswer);
  }
}

TEST(NormalizeAnswer, FreeFormIsCanonicalized) {
  EXPECT_EQ(normalize_answer("  Farmland. ", {}), "farmland");
  EXPECT_THROW(normalize_answer("   ", {}), Error);
}

TEST(NormalizeAnswer, Idempotent) {
  for (const char* raw : {"No.", " yes ", "Answer: Yes"}) {
    const auto once = normalize_answer(raw, kYesNo);
    EXPECT_EQ(normalize_answer(once, kYesNo), once);
  }
  const auto free = normalize_answer("  Apple Orchard!! ", {});
  EXPECT_EQ(normalize_answer(free, {}), free);
}

TEST(Text, Helpers) {
  EXPECT_EQ(text::trim("  a b \n"), "a b");
  EXPECT_EQ(text::to_lower("AbC"), "abc");
  EXPECT_EQ(text::strip_punctuation("..hi!?"), "hi");
  EXPECT_EQ(text::canonical("  \"Hello.\" "), "hello");
  EXPECT_TRUE(text::contains_casefold("Similar Poles PULL", "poles pull"));
  EXPECT_TRUE(text::is_blank(" \t\n"));
  EXPECT_FALSE(text::is_blank(" x "));
}

TEST(Candidate, RejectsBlankText) {
  EXPECT_NO_THROW(Candidate::make(CandidateKind::Explanation, "text", 0));
  try {
    Candidate::make(CandidateKind::Explanation, "  \n", 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCandidate);
  }
}

TEST(ContraryHint, RejectsBlankAndEcho) {
  EXPECT_NO_THROW(ContraryHint::make("Poles attract.", "Poles repel."));
  try {
    ContraryHint::make("", "Poles repel.");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyHint);
  }
  try {
    ContraryHint::make("  POLES repel. ", "poles repel.");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HintEqualsSource);
  }
}

TEST(FidelityScore, FlipIsIndicator) {
  EXPECT_EQ(FidelityScore::flip("No", "Yes", true).value, 1.0);
  EXPECT_EQ(FidelityScore::flip("No", "No", false).value, 0.0);
  EXPECT_THROW(FidelityScore::probability(1.5, "No", "No", false), Error);
  EXPECT_THROW(FidelityScore::probability(-0.1, "No", "No", false), Error);
}

TEST(Instance, ValidateChecksOriginalAnswerAgainstChoices) {
  Instance inst{"a", "q?", std::nullopt, {"Yes", "No"}, "maybe", std::nullopt, std::nullopt,
                std::nullopt};
  EXPECT_THROW(validate(inst), Error);
  inst.original_answer = "No";
  EXPECT_NO_THROW(validate(inst));
  inst.id = "";
  EXPECT_THROW(validate(inst), Error);
}

TEST(Instance, DatasetRejectsDuplicateIds) {
  std::vector<Instance> ds(2);
  ds[0].id = ds[1].id = "x";
  ds[0].question = ds[1].question = "q";
  try {
    validate_dataset(ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
  }
}

TrajectoryEntry entry(int step, double score) {
  return TrajectoryEntry{Candidate::make(CandidateKind::Explanation, "e" + std::to_string(step), step),
                         score, std::nullopt, std::nullopt};
}

TEST(RunRecord, AppendEnforcesOrderAndRange) {
  RunRecord r;
  r.append(entry(0, 0.0));
  r.append(entry(2, 0.5));
  EXPECT_THROW(r.append(entry(2, 0.5)), Error);
  EXPECT_THROW(r.append(entry(1, 0.5)), Error);
  EXPECT_THROW(r.append(entry(3, 1.01)), Error);
  EXPECT_EQ(r.entries.size(), 2u);
}

TEST(SelectBest, MaxScoreEarliestStepOnTies) {
  std::vector<TrajectoryEntry> es = {entry(0, 0.2), entry(1, 0.7), entry(2, 0.7), entry(3, 0.1)};
  EXPECT_EQ(select_best(es), std::optional<std::size_t>(1));
  EXPECT_EQ(select_best(std::vector<TrajectoryEntry>{}), std::nullopt);
}

TEST(Enums, StringRoundTrip) {
  for (auto m : {ScoreMode::Flip, ScoreMode::Probability}) {
    EXPECT_EQ(score_mode_from_string(to_string(m)), m);
  }
  for (auto k : {CandidateKind::Explanation, CandidateKind::TriggerPrompt}) {
    EXPECT_EQ(candidate_kind_from_string(to_string(k)), k);
  }
  for (auto t : {Termination::MaxSteps, Termination::DecisionFlip, Termination::BackendFailure}) {
    EXPECT_EQ(termination_from_string(to_string(t)), t);
  }
  for (auto k : {RunKind::ExplanationRun, RunKind::TriggerRun}) {
    EXPECT_EQ(run_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(score_mode_from_string("fuzzy"), Error);
}

TEST(Errors, MessageCarriesCode) {
  const Error e(ErrorCode::SampleTooLarge, "too many");
  EXPECT_EQ(std::string(e.what()), std::string(to_string(ErrorCode::SampleTooLarge)) + ": too many");
  EXPECT_EQ(e.message(), "too many");
  EXPECT_TRUE(is_backend_failure(ErrorCode::ScriptExhausted));
  EXPECT_FALSE(is_backend_failure(ErrorCode::InvalidArgument));
}

}  // namespace
}  // namespace faithlm
