#include "symphony/error.hpp"
#include "symphony/subtitle_agent.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <fmt/format.h>

using namespace symphony;
using namespace symphony::testing;
using nlohmann::json;

namespace {

SubtitleTrack track_of(int n, int step_s = 10) {
  SubtitleTrack t;
  for (int i = 0; i < n; ++i) {
    t.cues.push_back({TimeRange::from_seconds(i * step_s, i * step_s + 5), fmt::format("line number {}", i)});
  }
  return t;
}

json analysis(const std::string& info, const std::string& topic = "cooking") {
  return {{"relevant_subtitle_info", info},
          {"key_entities_and_sentiment", "a chef, cheerful"},
          {"overall_topic", topic}};
}

}  // namespace

TEST_CASE("one call for a short track") {
  auto backend = scripted({{"sequences", {{"subtitle", {analysis("[00:00:00 - 00:00:05]: line number 0")}}}}});
  ModelGateway gw(backend, quiet_options());
  auto a = analyze_subtitles(gw, mcq("q", "What is cooked?"), track_of(3));
  CHECK(a.relevant_subtitle_info == "[00:00:00 - 00:00:05]: line number 0");
  CHECK(a.overall_topic == "cooking");
  CHECK(backend->calls("subtitle") == 1);
  CHECK(gw.exchanges()[0].backend == BackendRole::SubtitleLLM);
  const auto prompt = gw.exchanges()[0].request_messages[0].text();
  CHECK(prompt.find("relevant_subtitle_info") != std::string::npos);
  CHECK(prompt.find("[00:00:20 - 00:00:25]: line number 2") != std::string::npos);
  CHECK(prompt.find("What is cooked?") != std::string::npos);

  const auto text = a.render();
  CHECK(text.find("line number 0") != std::string::npos);
  CHECK(text.find("a chef, cheerful") != std::string::npos);
  CHECK(to_json(a)["overall_topic"] == "cooking");
}

TEST_CASE("an empty track is answered without a model call") {
  auto backend = scripted(json::object());
  ModelGateway gw(backend, quiet_options());
  auto a = analyze_subtitles(gw, mcq("q", "x?"), SubtitleTrack{});
  CHECK(a.relevant_subtitle_info.empty());
  CHECK(a.overall_topic == "No subtitles are available for this video.");
  CHECK(backend->calls(BackendRole::SubtitleLLM) == 0);
}

TEST_CASE("long tracks are analyzed in halves and merged") {
  auto backend = scripted(
      {{"rules", {{{"key", "subtitle"}, {"contains", {"analyzed in two consecutive parts"}},
                   {"reply", analysis("[00:00:00 - 00:00:05]: line number 0\n[00:00:30 - 00:00:35]: line number 3", "merged")}}}},
       {"sequences", {{"subtitle", {analysis("first half"), analysis("second half")}}}}});
  ModelGateway gw(backend, quiet_options());
  SubtitleAgentOptions opt;
  opt.split_chars = 140;  // four cues render to about 160 characters
  auto a = analyze_subtitles(gw, mcq("q", "x?"), track_of(4), opt);
  CHECK(a.overall_topic == "merged");
  CHECK(backend->calls("subtitle") == 3);
  const auto ex = gw.exchanges();
  CHECK(ex[0].request_messages[0].text().find("line number 1") != std::string::npos);
  CHECK(ex[0].request_messages[0].text().find("line number 2") == std::string::npos);
  CHECK(ex[1].request_messages[0].text().find("line number 3") != std::string::npos);
  CHECK(ex[2].request_messages[0].text().find("first half") != std::string::npos);
  CHECK(ex[2].request_messages[0].text().find("second half") != std::string::npos);
}

TEST_CASE("no JSON twice is a parse failure") {
  auto backend = scripted({{"fallbacks", {{"subtitle", "The subtitles talk about food."}}}});
  ModelGateway gw(backend, quiet_options());
  try {
    analyze_subtitles(gw, mcq("q", "x?"), track_of(2));
    FAIL("expected SubtitleParseFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SubtitleParseFailure);
  }
  CHECK(backend->calls("subtitle") == 2);
}

TEST_CASE("relevant info is clipped to the observation budget") {
  std::string info;
  for (int i = 0; i < 500; ++i) info += fmt::format("[00:00:{:02} - 00:00:{:02}]: words words words\n", i % 50, i % 50 + 1);
  auto backend = scripted({{"fallbacks", {{"subtitle", analysis(info)}}}});
  ModelGateway gw(backend, quiet_options());
  SubtitleAgentOptions opt;
  opt.relevant_info_chars = 1000;
  auto a = analyze_subtitles(gw, mcq("q", "x?"), track_of(2), opt);
  CHECK(a.relevant_subtitle_info.size() <= 1000);
  CHECK(a.relevant_subtitle_info.ends_with("[truncated]"));
}

TEST_CASE("invalid echoed lines are detected") {
  const std::string info =
      "[00:00:10 - 00:00:20]: fine\n"
      "[00:00:30 - 00:00:25]: backwards\n"
      "00:00:40 - 00:00:50: no brackets\n"
      "[00:09:00 - 00:11:00]: past the end\n"
      "[100:00:00 - 100:00:01]: long hours ok without duration";
  auto bad = invalid_subtitle_lines(info, Timecode::from_seconds(600));
  REQUIRE(bad.size() == 4);
  CHECK(bad[0].find("backwards") != std::string::npos);
  CHECK(bad[1].find("no brackets") != std::string::npos);
  CHECK(bad[2].find("past the end") != std::string::npos);
  CHECK(bad[3].find("long hours") != std::string::npos);
  CHECK(invalid_subtitle_lines(info, std::nullopt).size() == 2);
  CHECK(invalid_subtitle_lines("", Timecode::from_seconds(1)).empty());
}
