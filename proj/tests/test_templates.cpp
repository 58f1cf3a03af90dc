#include <gtest/gtest.h>

#include "faithlm/eval.hpp"
#include "faithlm/fidelity.hpp"
#include "faithlm/optimizer.hpp"
#include "faithlm/templates.hpp"
#include "support.hpp"

namespace faithlm {
namespace {

using testing::golden;

constexpr const char* kExpl =
    "Each magnet has a positive pole and a negative pole, and similar poles push each other away";
constexpr const char* kHint =
    "Each magnet has a positive pole and a negative pole, and similar poles pull each other closer";

TEST(Templates, FillIsSinglePass) {
  EXPECT_EQ(templates::fill("a {x} b {y} {x}", {{"{x}", "{y}"}, {"{y}", "Y"}}), "a {y} b Y {y}");
  EXPECT_EQ(templates::fill("{unknown} stays", {{"{x}", "1"}}), "{unknown} stays");
  EXPECT_EQ(templates::fill("", {{"{x}", "1"}}), "");
}

TEST(Templates, UnknownNameThrows) { EXPECT_THROW(templates::get("nope.txt"), Error); }

TEST(Templates, NoTrailingNewline) {
  for (auto name : {templates::kSeedTrigger, templates::kContraryHint, templates::kJudgeScale,
                    templates::kTriggerTrajectory}) {
    const auto body = templates::get(name);
    ASSERT_FALSE(body.empty());
    EXPECT_NE(body.back(), '\n') << name;
  }
}

TEST(Golden, TriggerTrajectory) {
  std::vector<TrajectoryEntry> t = {
      {Candidate::make(CandidateKind::TriggerPrompt,
                       "Please provide objective explanations of why model generates the answers.", 0),
       0.21, std::nullopt, std::nullopt},
      {Candidate::make(CandidateKind::TriggerPrompt,
                       "Provide a concise, objective explanation of only the key reasoning or "
                       "assumptions that likely led the model to generate this specific response.",
                       1),
       0.53, std::nullopt, std::nullopt}};
  EXPECT_EQ(optimizer::render_trigger_trajectory(t), golden("trigger_trajectory.txt"));
}

TEST(Golden, ExplanationTrajectory) {
  Instance inst;
  inst.id = "apple";
  inst.question = "Where is an apple tree likely found in abundance?";
  inst.choices = {"farmland", "desert"};
  inst.original_answer = "farmland";
  std::vector<TrajectoryEntry> t = {
      {Candidate::make(CandidateKind::Explanation,
                       "The model generates the answer \"farmland\" because apple trees require open "
                       "spaces and fertile soil, both of which are commonly found in farmland.",
                       1),
       1.0, std::nullopt, std::nullopt},
      {Candidate::make(CandidateKind::Explanation,
                       "The model generates the answer \"farmland\" because an apple tree is likely "
                       "found in abundance in farmland.",
                       0),
       0.0, std::nullopt, std::nullopt}};
  const auto p = optimizer::render_explanation_trajectory(t, inst);
  EXPECT_EQ(p.system_prompt, golden("explanation_trajectory.txt"));
  EXPECT_EQ(p.user_prompt, golden("explanation_trajectory_query.txt"));
}

TEST(Golden, JudgePrompts) {
  EXPECT_EQ(eval::render_truthfulness_prompt(kExpl, "Like poles repel, so two positive poles push apart"),
            golden("judge_truthfulness.txt"));
  EXPECT_EQ(eval::render_contrariety_prompt(kExpl, kHint), golden("judge_contrariety.txt"));
  EXPECT_EQ(eval::render_scale_prompt(kExpl, kHint), golden("judge_scale.txt"));
}

TEST(Golden, ExplanationRequestAndContraryHint) {
  EXPECT_EQ(optimizer::render_explanation_request(optimizer::seed_trigger_prompt().text,
                                                  testing::magnet_instance()),
            golden("explanation_request.txt"));
  EXPECT_EQ(fidelity::render_contrary_hint_prompt(kExpl),
            golden("contrary_hint.txt"));
}

}  // namespace
}  // namespace faithlm
