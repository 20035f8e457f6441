#pragma once

#include "symphony/subtitles.hpp"
#include "symphony/timecode.hpp"

#include "test_support.hpp"

#include <nlohmann/json.hpp>

namespace symphony::testing {

// A ten-minute video, one frame every two seconds.
inline FrameManifest ten_minute_video() { return synthetic_video(600'000, 2000, "kitchen"); }

inline Question cooking_question() {
  Question q;
  q.question_id = "cook-1";
  q.text = "What does the man prepare after washing the vegetables?";
  q.options = {{"A", "a salad"}, {"B", "a cake"}, {"C", "a soup"}, {"D", "a sandwich"}};
  return q;
}

// plan -> ground -> perceive -> finish -> reflect (credible) -> answer C.
inline nlohmann::json happy_path_script() {
  using nlohmann::json;
  const auto seg4 = format_range(TimeRange::from_seconds(180, 240));
  return {
      {"sequences",
       {{"planner",
         {plan("Grounding Agent", "Find when the man cooks after washing vegetables.", "need the time"),
          plan("Visual Perception Agent", "Inspect 00:03:00 to 00:04:00 and say what is cooked.", "need details"),
          plan("finish", "C", "the pot holds soup")}},
        {"grounding_agent",
         {json{{"analysis", "cooking after washing"},
               {"concrete_cues", {"pot on a stove"}},
               {"complexity", "Type2"},
               {"tool", "vlm_scoring_tool"},
               {"args", {{"scoring_instruction", "find the cooking scene"}}}},
          json{{"tool", "finish"}, {"args", {{"answer", "Cooking happens at 00:03:00 - 00:04:00."}}}}}},
        {"perception_agent",
         {json{{"tool", "frame_inspector"}, {"args", {{"time_range", {"00:03:00", "00:04:00"}}}}},
          "[answer] The man stirs a pot of vegetable soup."}},
        {"reflector", {verdict(true)}},
        {"answer", {"Answer: (C) He makes a soup."}}}},
      {"rules",
       {{{"key", "vlm_scoring"}, {"contains", {"The clip covers " + seg4}}, {"reply", score_reply(4, "man stirs a pot")}}}},
      {"fallbacks",
       {{"vlm_scoring", score_reply(1, "empty kitchen")},
        {"vlm_perception", "A man stirs a pot with carrots and broth on the stove."}}}};
}

// First verdict is not credible; the second attempt consults subtitles and is credible.
inline constexpr const char* kReentryCritique =
    "The answer ignores what the man says; check the subtitles for the dish name.";

inline nlohmann::json reentry_script() {
  return {{"sequences",
           {{"planner",
             {plan("finish", "A", "guessing"),
              plan("Subtitle Agent", "Find the name of the dish the man mentions.", "use speech"),
              plan("finish", "C", "he says soup")}},
            {"subtitle",
             {nlohmann::json{{"relevant_subtitle_info", "[00:03:10 - 00:03:14]: This soup needs more salt."},
                             {"key_entities_and_sentiment", "the cook, content"},
                             {"overall_topic", "Making vegetable soup."}}}},
            {"reflector", {verdict(false, kReentryCritique), verdict(true)}},
            {"answer", {"Answer: (C)"}}}}};
}

inline SubtitleTrack cooking_subtitles() {
  SubtitleTrack t;
  t.cues.push_back({TimeRange::from_seconds(60, 64), "First we wash the carrots."});
  t.cues.push_back({TimeRange::from_seconds(190, 194), "This soup needs more salt."});
  return t;
}

// A planner that keeps asking for grounding and a reflector that never agrees.
inline nlohmann::json never_terminating_script() {
  return {{"fallbacks",
           {{"planner", plan("Grounding Agent", "Look again for the cooking scene.")},
            {"grounding_agent", nlohmann::json{{"tool", "finish"}, {"args", {{"answer", "unclear"}}}}.dump()},
            {"reflector", verdict(false, "No answer was proposed.")},
            {"answer", "Answer: (A)"}}}};
}

}  // namespace symphony::testing
