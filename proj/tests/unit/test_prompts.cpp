#include "symphony/prompts.hpp"

#include <doctest.h>

using namespace symphony;

TEST_CASE("each template carries its anchor phrase") {
  CHECK(prompt_template(PromptId::Planner).find("Call Agents in json format") != std::string_view::npos);
  CHECK(prompt_template(PromptId::Reflector).find("respond strictly in the following JSON") !=
        std::string_view::npos);
  CHECK(prompt_template(PromptId::Grounding).find("Tool Selection based on Question Type") !=
        std::string_view::npos);
  CHECK(prompt_template(PromptId::Perception).find("Call only one tool at a time") !=
        std::string_view::npos);
  CHECK(prompt_template(PromptId::Subtitle).find("relevant_subtitle_info") != std::string_view::npos);
  CHECK(prompt_template(PromptId::VlmScoring).find("Relevance score from 1 to 4") !=
        std::string_view::npos);
}

TEST_CASE("every template loads") {
  for (auto id : {PromptId::Planner, PromptId::Reflector, PromptId::Subtitle, PromptId::SubtitleMerge,
                  PromptId::Perception, PromptId::Grounding, PromptId::QueryEnhance,
                  PromptId::VlmScoring, PromptId::FrameInspector, PromptId::GlobalSummary,
                  PromptId::MultiSegment, PromptId::FinalAnswer}) {
    CAPTURE(prompt_name(id));
    CHECK_FALSE(prompt_template(id).empty());
  }
}

TEST_CASE("substitution is single pass and leaves other braces alone") {
  CHECK(render_template("a {x} b {y} {\"k\": 1} {}", {{"x", "{y}"}}) == "a {y} b {y} {\"k\": 1} {}");
  CHECK(render_template("{x}{x}", {{"x", "1"}}) == "11");
}

TEST_CASE("the planner's empty history renders an empty block") {
  const auto p = render_prompt(PromptId::Planner,
                               {{"question", "Q?"}, {"duration", "00:10:00"}, {"history_str", ""}});
  CHECK(p.find("<history>\n\n</history>") != std::string::npos);
  CHECK(p.find("The user's question is: \"Q?\"") != std::string::npos);
  CHECK(p.find("{history_str}") == std::string::npos);
}
