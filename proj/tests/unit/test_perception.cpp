#include "symphony/error.hpp"
#include "symphony/perception.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace symphony;
using namespace symphony::testing;
using nlohmann::json;

namespace {

std::size_t image_parts(const ModelExchange& ex) {
  std::size_t n = 0;
  for (const auto& m : ex.request_messages) {
    for (const auto& p : m.parts) n += std::holds_alternative<ImagePart>(p) ? 1 : 0;
  }
  return n;
}

json inspect(const std::string& a, const std::string& b, const std::string& cue = {}) {
  json args{{"time_range", {a, b}}};
  if (!cue.empty()) args["cue"] = cue;
  return {{"tool", "frame_inspector"}, {"args", args}};
}

}  // namespace

TEST_CASE("answer marker extraction") {
  CHECK(extract_answer_marker("[answer] the man is cooking") == "the man is cooking");
  CHECK(extract_answer_marker("Thoughts...\n[Answer]: a dog  ") == "a dog");
  CHECK_FALSE(extract_answer_marker("{\"tool\": \"global_summary_tool\"}").has_value());
}

TEST_CASE("tool call parsing") {
  auto c = parse_perception_call(R"({"tool": "frame_inspector", "args": {"time_range": ["00:01:00", "00:01:30"], "cue": "knife"}})");
  auto* call = std::get_if<PerceptionToolCall>(&c);
  REQUIRE(call);
  CHECK(call->tool == PerceptionTool::FrameInspector);
  CHECK(*call->range == TimeRange::from_seconds(60, 90));
  CHECK(call->cue == "knife");

  auto alt = parse_perception_call(R"({"tool": "frame_inspector", "args": {"time_range": "00:01:00 - 00:01:30"}})");
  CHECK(std::get<PerceptionToolCall>(alt).range == TimeRange::from_seconds(60, 90));

  auto multi = parse_perception_call(
      R"({"tool": "multi_segment_analysis_tool", "args": {"time_ranges": [["00:00:00","00:00:20"],["00:05:00","00:05:20"]], "instruct": "compare"}})");
  CHECK(std::get<PerceptionToolCall>(multi).ranges.size() == 2);

  auto bad_time = parse_perception_call(R"({"tool": "frame_inspector", "args": {"time_range": ["03:21", "04:00"]}})");
  CHECK(std::get<ToolResult>(bad_time).fault == ToolFault::MalformedCall);
  CHECK(std::get<ToolResult>(parse_perception_call("just prose")).fault == ToolFault::MalformedCall);
  CHECK(std::get<ToolResult>(parse_perception_call(R"({"tool": "zoom"})")).fault == ToolFault::MalformedCall);
}

TEST_CASE("inspection range bounds") {
  const auto video = synthetic_video(600'000, 1000);
  auto check = [&](int a, int b) { return PerceptionAgent::check_inspect_range(TimeRange::from_seconds(a, b), video); };
  CHECK_FALSE(check(0, 60).has_value());
  CHECK_FALSE(check(0, 11).has_value());
  CHECK(check(0, 10)->fault == ToolFault::RangeTooShort);
  CHECK(check(0, 5)->fault == ToolFault::RangeTooShort);
  CHECK(check(0, 61)->fault == ToolFault::RangeTooLong);
  CHECK(check(590, 620)->fault == ToolFault::RangeOutOfVideo);
  // Messages name the violated constraint so the model can correct itself.
  CHECK(check(0, 5)->text.find("10 seconds") != std::string::npos);
  CHECK(check(0, 61)->text.find("60 seconds") != std::string::npos);
}

TEST_CASE("frame budgets per tool") {
  auto backend = scripted({{"fallbacks", {{"vlm_perception", "description"}}}});
  ModelGateway gw(backend, quiet_options());
  PerceptionAgent agent(gw, Budgets{});
  const auto long_video = synthetic_video(68 * 60'000, 1000);

  CHECK(agent.inspector_frames(TimeRange::from_seconds(0, 60), "", long_video).size() == 40);
  CHECK(agent.summary_frames(long_video).size() == 40);
  CHECK(agent.summary_frames(synthetic_video(30'000, 3000)).size() == 10);
  CHECK(agent.summary_frames(long_video) == agent.summary_frames(long_video));

  auto two = agent.segment_frames({TimeRange::from_seconds(0, 60), TimeRange::from_seconds(600, 660)}, long_video);
  CHECK(two.size() == 40);
  CHECK(std::count_if(two.begin(), two.end(), [](const LabeledFrame& f) {
          return f.label.rfind("Segment 1,", 0) == 0;
        }) == 20);
  std::vector<TimeRange> six;
  for (int k = 0; k < 6; ++k) six.push_back(TimeRange::from_seconds(k * 300, k * 300 + 60));
  CHECK(agent.segment_frames(six, long_video).size() == 36);
  CHECK(two.back().label == "Segment 2, frame at 00:10:58");
}

TEST_CASE("cue-guided inspection adds planted frames and stays within the cap") {
  json tags = json::object();
  for (int s : {31, 33, 35}) tags[std::to_string(s * 1000)] = "kitchen knife";
  auto backend = scripted({{"embedder", {{"frame_tags", tags}}}});
  ModelGateway gw(backend, quiet_options());
  Budgets b;
  b.frame_cap = 20;
  PerceptionAgent agent(gw, b);
  // Dense frames: 4 per second, so the uniform pick misses most planted ones.
  const auto video = synthetic_video(120'000, 250);
  const auto range = TimeRange::from_seconds(10, 55);
  auto with_cue = agent.inspector_frames(range, "kitchen knife", video);
  CHECK(with_cue.size() <= 20);
  CHECK(std::is_sorted(with_cue.begin(), with_cue.end(), [](const Frame& x, const Frame& y) { return x.at < y.at; }));
  CHECK(std::adjacent_find(with_cue.begin(), with_cue.end()) == with_cue.end());
  for (const auto& f : with_cue) CHECK(range.contains(f.at));
  CHECK(backend->calls(BackendRole::Embedder) > 0);

  // Short ranges skip the cue path entirely.
  const auto before = backend->calls(BackendRole::Embedder);
  agent.inspector_frames(TimeRange::from_seconds(10, 30), "kitchen knife", video);
  CHECK(backend->calls(BackendRole::Embedder) == before);
}

TEST_CASE("cue path at the default cap: 40 uniform plus 10 cued never exceeds 40") {
  std::mt19937 rng(5);
  auto backend = scripted({{"embedder", {{"dimension", 32}}}});
  ModelGateway gw(backend, quiet_options());
  PerceptionAgent agent(gw, Budgets{});
  for (int i = 0; i < 20; ++i) {
    const int step = std::uniform_int_distribution<int>(200, 1500)(rng);
    const auto video = synthetic_video(200'000, step);
    const int len = std::uniform_int_distribution<int>(31, 60)(rng);
    auto frames = agent.inspector_frames(TimeRange::from_seconds(20, 20 + len), "cue", video);
    CHECK(frames.size() <= 40);
    CHECK_FALSE(frames.empty());
  }
}

TEST_CASE("perception loop: summary, inspect, answer") {
  auto backend = scripted({{"sequences",
                            {{"perception_agent",
                              {json{{"tool", "global_summary_tool"}, {"args", json::object()}},
                               inspect("00:02:00", "00:03:00"),
                               "I have enough.\n[answer] the man is cooking"}},
                             {"vlm_perception", {"a kitchen scene", "a man chops onions"}}}}});
  ModelGateway gw(backend, quiet_options());
  auto obs = PerceptionAgent(gw, Budgets{}).run("what is the man doing", synthetic_video(600'000, 1000));
  CHECK(obs.text == "the man is cooking");
  CHECK_FALSE(obs.truncated);
  CHECK(obs.source == AgentKind::VisualPerception);
  CHECK(backend->calls("perception_agent") == 3);
  CHECK(backend->calls("vlm_perception") == 2);
  for (const auto& e : gw.exchanges()) CHECK(image_parts(e) <= 40);
  // The third turn sees both tool results.
  const auto ex = gw.exchanges();
  const auto& last_turn = ex.back().request_messages;
  CHECK(last_turn[2].text().find("a kitchen scene") != std::string::npos);
  CHECK(last_turn[4].text().find("a man chops onions") != std::string::npos);
}

TEST_CASE("an immediate answer uses no tools") {
  auto backend = scripted({{"sequences", {{"perception_agent", {"[answer] none"}}}}});
  ModelGateway gw(backend, quiet_options());
  auto obs = PerceptionAgent(gw, Budgets{}).run("x", synthetic_video(60'000, 1000));
  CHECK(obs.text == "none");
  CHECK(backend->calls("vlm_perception") == 0);
}

TEST_CASE("invalid ranges come back as correctable tool errors") {
  auto backend = scripted({{"sequences",
                            {{"perception_agent",
                              {inspect("00:00:00", "00:00:05"), inspect("00:00:00", "00:02:00"),
                               inspect("00:00:00", "00:00:30"), "[answer] fixed"}}}},
                           {"fallbacks", {{"vlm_perception", "ok"}}}});
  ModelGateway gw(backend, quiet_options());
  auto obs = PerceptionAgent(gw, Budgets{}).run("x", synthetic_video(600'000, 1000));
  CHECK(obs.text == "fixed");
  CHECK(backend->calls("vlm_perception") == 1);
  const auto msgs = gw.exchanges().back().request_messages;
  CHECK(msgs[2].text().find("RangeTooShort") != std::string::npos);
  CHECK(msgs[4].text().find("RangeTooLong") != std::string::npos);
}

TEST_CASE("multi-segment range count limits") {
  auto backend = scripted({{"fallbacks", {{"vlm_perception", "compared"}}}});
  ModelGateway gw(backend, quiet_options());
  PerceptionAgent agent(gw, Budgets{});
  const auto video = synthetic_video(600'000, 1000);
  CHECK(agent.multi_segment_analysis({TimeRange::from_seconds(0, 30)}, "c", video).fault == ToolFault::TooFewRanges);
  std::vector<TimeRange> seven(7, TimeRange::from_seconds(0, 30));
  CHECK(agent.multi_segment_analysis(seven, "c", video).fault == ToolFault::TooManyRanges);
  auto ok = agent.multi_segment_analysis({TimeRange::from_seconds(0, 30), TimeRange::from_seconds(300, 330)}, "c", video);
  CHECK(ok.ok());
  CHECK(ok.text == "compared");
  CHECK(image_parts(gw.exchanges().back()) == 40);
}

TEST_CASE("the tool budget ends the loop with a truncated partial observation") {
  auto backend = scripted({{"fallbacks",
                            {{"perception_agent", json{{"tool", "global_summary_tool"}}.dump()},
                             {"vlm_perception", "partial fact"}}}});
  ModelGateway gw(backend, quiet_options());
  auto obs = PerceptionAgent(gw, Budgets{}).run("x", synthetic_video(600'000, 1000));
  CHECK(obs.truncated);
  CHECK(obs.text.find("Partial findings") != std::string::npos);
  CHECK(obs.text.find("partial fact") != std::string::npos);
  CHECK(backend->calls("vlm_perception") == 15);
  CHECK(backend->calls("perception_agent") == 16);
}

TEST_CASE("two malformed calls in a row stop the loop early") {
  auto backend = scripted({{"fallbacks", {{"perception_agent", "I will look around"}}}});
  ModelGateway gw(backend, quiet_options());
  auto obs = PerceptionAgent(gw, Budgets{}).run("x", synthetic_video(60'000, 1000));
  CHECK(obs.truncated);
  CHECK(backend->calls("perception_agent") == 3);
  CHECK(gw.exchanges().back().request_messages.back().text().find("[answer]") != std::string::npos);
}

TEST_CASE("a last-chance answer after the budget is accepted") {
  Budgets b;
  b.tool_calls_per_agent = 2;
  auto backend = scripted({{"sequences",
                            {{"perception_agent",
                              {json{{"tool", "global_summary_tool"}}, json{{"tool", "global_summary_tool"}},
                               "[answer] late but fine"}}}},
                           {"fallbacks", {{"vlm_perception", "s"}}}});
  ModelGateway gw(backend, quiet_options());
  auto obs = PerceptionAgent(gw, b).run("x", synthetic_video(60'000, 1000));
  CHECK(obs.text == "late but fine");
  CHECK_FALSE(obs.truncated);
}

TEST_CASE("empty instruct is rejected") {
  auto backend = scripted(json::object());
  ModelGateway gw(backend, quiet_options());
  CHECK_THROWS_AS(PerceptionAgent(gw, Budgets{}).run("  ", synthetic_video(60'000, 1000)), Error);
}
