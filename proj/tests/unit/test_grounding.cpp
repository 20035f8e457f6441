#include "symphony/error.hpp"
#include "symphony/grounding.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

using namespace symphony;
using namespace symphony::testing;
using nlohmann::json;

namespace {

// Rule matching the scoring request for segment k (1-based, 60 s each).
json segment_rule(int k, int score) {
  const auto range = TimeRange::from_seconds((k - 1) * 60, k * 60);
  return {{"key", "vlm_scoring"},
          {"contains", json::array({"The clip covers " + format_range(range)})},
          {"reply", score_reply(score, fmt::format("segment {}", k))}};
}

std::size_t image_parts(const ModelExchange& ex) {
  std::size_t n = 0;
  for (const auto& m : ex.request_messages) {
    for (const auto& p : m.parts) n += std::holds_alternative<ImagePart>(p) ? 1 : 0;
  }
  return n;
}

EnhancedQuery type2(std::string analysis, std::vector<std::string> cues) {
  EnhancedQuery q;
  q.original = "What does the musician do?";
  q.analysis = std::move(analysis);
  q.concrete_cues = std::move(cues);
  return q;
}

}  // namespace

TEST_CASE("segment score replies parse strictly") {
  const auto r = TimeRange::from_seconds(0, 60);
  auto s = parse_segment_score(R"({"relevance_score": 3, "clip_caption": "a man", "reasoning": "partial"})", r);
  REQUIRE(s);
  CHECK(s->score == 3);
  CHECK(s->clip_caption == "a man");
  CHECK(s->reasoning == "partial");
  CHECK(s->range == r);

  auto one = parse_segment_score(R"({"relevance_score": 1, "clip_caption": "sky", "reasoning": "null"})", r);
  REQUIRE(one);
  CHECK_FALSE(one->reasoning.has_value());

  CHECK(parse_segment_score(R"(```json
{"relevance_score": "4", "clip_caption": "x", "reasoning": "y"}
```)", r)->score == 4);
  CHECK(parse_segment_score(R"({"relevance_score": 2.0})", r)->score == 2);
  CHECK_FALSE(parse_segment_score(R"({"relevance_score": 2.5})", r));
  CHECK_FALSE(parse_segment_score(R"({"relevance_score": 5})", r));
  CHECK_FALSE(parse_segment_score(R"({"relevance_score": 0})", r));
  CHECK_FALSE(parse_segment_score(R"({"clip_caption": "x"})", r));
  CHECK_FALSE(parse_segment_score("I think it's a 3", r));
}

TEST_CASE("scoring instruction joins the analysis with the cues") {
  auto q = type2("Look for a musician.", {"person holding a guitar", "drum kit"});
  CHECK(q.scoring_instruction() ==
        "Look for a musician.\nConcrete visual cues: person holding a guitar; drum kit");
}

TEST_CASE("query enhancement parses cues and complexity") {
  auto backend = scripted({{"sequences",
                            {{"query_enhance",
                              {"sorry, thinking...",
                               json{{"analysis", "a musician is a person playing an instrument"},
                                    {"concrete_cues", {"person holding a guitar"}},
                                    {"complexity", "Type2"}}}}}}});
  ModelGateway gw(backend, quiet_options());
  GroundingAgent agent(gw, Budgets{});
  auto q = agent.enhance_query(mcq("q", "When does a musician appear?"));
  CHECK(q.complexity == QueryComplexity::Type2);
  REQUIRE(q.concrete_cues.size() == 1);
  CHECK(q.concrete_cues[0] == "person holding a guitar");
  CHECK(backend->calls("query_enhance") == 2);
  // The reprompt carries the failed reply and the parse error.
  const auto ex = gw.exchanges();
  REQUIRE(ex[1].request_messages.size() == 3);
  CHECK(ex[1].request_messages[2].text().find("NoJsonFound") != std::string::npos);
}

TEST_CASE("query enhancement: concrete query, missing cues, and failure") {
  SUBCASE("type1 keeps the entities") {
    auto backend = scripted({{"fallbacks",
                              {{"query_enhance", json{{"analysis", "explicit"},
                                                      {"concrete_cues", {"red car", "gas station"}},
                                                      {"complexity", "Type1"}}}}}});
    ModelGateway gw(backend, quiet_options());
    auto q = GroundingAgent(gw, Budgets{}).enhance_query(mcq("q", "When does the red car stop at the gas station?"));
    CHECK(q.complexity == QueryComplexity::Type1);
    CHECK(q.concrete_cues == std::vector<std::string>{"red car", "gas station"});
  }
  SUBCASE("type2 without cues uses the question") {
    auto backend = scripted({{"fallbacks", {{"query_enhance", json{{"analysis", "hard"}, {"complexity", "2"}}}}}});
    ModelGateway gw(backend, quiet_options());
    auto q = GroundingAgent(gw, Budgets{}).enhance_query(mcq("q", "Why is she sad?"));
    CHECK(q.concrete_cues == std::vector<std::string>{"Why is she sad?"});
  }
  SUBCASE("two replies without JSON") {
    auto backend = scripted({{"fallbacks", {{"query_enhance", "no json here"}}}});
    ModelGateway gw(backend, quiet_options());
    try {
      GroundingAgent(gw, Budgets{}).enhance_query(mcq("q", "x?"));
      FAIL("expected GroundingParseFailure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::GroundingParseFailure);
    }
    CHECK(backend->calls("query_enhance") == 2);
  }
}

TEST_CASE("vlm_ground keeps scores above 1, best first, and agrees with a brute-force oracle") {
  const std::map<int, int> planted{{4, 4}, {7, 3}, {9, 2}};
  json rules = json::array();
  for (auto [k, s] : planted) rules.push_back(segment_rule(k, s));
  auto backend = scripted({{"rules", rules}, {"fallbacks", {{"vlm_scoring", score_reply(1, "nothing")}}}});
  ModelGateway gw(backend, quiet_options());
  const auto video = synthetic_video(600'000, 1000);
  auto result = GroundingAgent(gw, Budgets{}).vlm_ground(type2("musician", {"guitar"}), video);

  CHECK(result.tool_used == GroundingTool::VlmScoring);
  CHECK(result.all_scores.size() == 10);
  const auto& kept = std::get<std::vector<SegmentScore>>(result.segments);
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].range == TimeRange::from_seconds(180, 240));
  CHECK(kept[1].range == TimeRange::from_seconds(360, 420));
  CHECK(kept[2].range == TimeRange::from_seconds(480, 540));
  CHECK(kept[0].reasoning == "reasoning for segment 4");

  // Oracle: filter the planted map by score > 1, order by score then index.
  std::vector<std::pair<int, int>> oracle;  // (score, segment)
  for (int k = 1; k <= 10; ++k) {
    const int s = planted.count(k) ? planted.at(k) : 1;
    if (s > 1) oracle.emplace_back(s, k);
  }
  std::sort(oracle.begin(), oracle.end(),
            [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  REQUIRE(oracle.size() == kept.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    CHECK(kept[i].score == oracle[i].first);
    CHECK(kept[i].range.start.millis() == (oracle[i].second - 1) * 60'000LL);
  }

  CHECK(result.report.find("[00:03:00 - 00:04:00]") < result.report.find("[00:06:00 - 00:07:00]"));
  CHECK(result.report.find("segment 4") != std::string::npos);

  // Coverage: every partition segment scored exactly once, 30 frames each.
  auto ex = gw.exchanges();
  CHECK(ex.size() == 10);
  std::map<std::string, int> seen;
  for (const auto& e : ex) {
    CHECK(image_parts(e) == 30);
    for (const auto& r : partition_segments(video.duration(), 60)) {
      if (e.request_messages[0].text().find(format_range(r)) != std::string::npos) seen[format_range(r)]++;
    }
  }
  CHECK(seen.size() == 10);
  for (const auto& [r, n] : seen) CHECK(n == 1);
}

TEST_CASE("all segments irrelevant gives an empty result") {
  auto backend = scripted({{"fallbacks", {{"vlm_scoring", score_reply(1)}}}});
  ModelGateway gw(backend, quiet_options());
  auto result = GroundingAgent(gw, Budgets{}).vlm_ground(type2("x", {"y"}), synthetic_video(300'000, 2000));
  CHECK(result.size() == 0);
  CHECK(result.report.find("no relevant content found") != std::string::npos);
}

TEST_CASE("bad scoring output and failed calls degrade to score 1") {
  auto backend = scripted({{"rules",
                            {segment_rule(1, 4),
                             {{"key", "vlm_scoring"}, {"contains", {"[00:01:00 - 00:02:00]"}}, {"reply", "garbage"}},
                             {{"key", "vlm_scoring"}, {"contains", {"[00:02:00 - 00:03:00]"}},
                              {"reply", {{"$error", "http"}, {"status", 400}}}}}},
                           {"fallbacks", {{"vlm_scoring", score_reply(2)}}}});
  ModelGateway gw(backend, quiet_options());
  auto result = GroundingAgent(gw, Budgets{}).vlm_ground(type2("x", {"y"}), synthetic_video(240'000, 1000));
  REQUIRE(result.all_scores.size() == 4);
  CHECK(result.all_scores[0].score == 4);
  CHECK(result.all_scores[1].score == 1);
  CHECK_FALSE(result.all_scores[1].reasoning.has_value());
  CHECK(result.all_scores[2].score == 1);
  CHECK(result.all_scores[3].score == 2);
  CHECK(result.size() == 2);
}

TEST_CASE("a total backend outage aborts the fan-out") {
  auto backend = scripted({{"fallbacks", {{"vlm_scoring", {{"$error", "connection"}}}}}});
  ModelGateway gw(backend, quiet_options());
  CHECK_THROWS_AS(GroundingAgent(gw, Budgets{}).vlm_ground(type2("x", {"y"}), synthetic_video(180'000, 1000)),
                  TransportError);
}

TEST_CASE("scoring 90 segments saturates but never exceeds 20 in flight") {
  auto backend = scripted({{"latency_ms", 20}, {"fallbacks", {{"vlm_scoring", score_reply(1)}}}});
  ModelGateway gw(backend, quiet_options(20));
  Budgets b;
  b.scoring_concurrency = 20;
  auto result = GroundingAgent(gw, b).vlm_ground(type2("x", {"y"}), synthetic_video(90 * 60'000, 2000));
  CHECK(result.all_scores.size() == 90);
  CHECK(backend->calls("vlm_scoring") == 90);
  CHECK(backend->peak_in_flight(BackendRole::VLM) == 20);
}

TEST_CASE("a merged tail segment is sampled at 0.5 fps within the frame cap") {
  auto backend = scripted({{"fallbacks", {{"vlm_scoring", score_reply(2)}}}});
  ModelGateway gw(backend, quiet_options());
  // 124 s: [0,60) and [60,124) once the 4 s remainder folds in.
  auto result = GroundingAgent(gw, Budgets{}).vlm_ground(type2("x", {"y"}), synthetic_video(124'000, 500));
  REQUIRE(result.all_scores.size() == 2);
  CHECK(result.all_scores[1].range == TimeRange::from_seconds(60, 124));
  for (const auto& e : gw.exchanges()) CHECK(image_parts(e) <= 40);
  auto ex = gw.exchanges();
  std::vector<std::size_t> counts;
  for (const auto& e : ex) counts.push_back(image_parts(e));
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<std::size_t>{30, 32});
}

namespace {

struct Planted {
  std::shared_ptr<ScriptedBackend> backend;
  FrameManifest video;
};

Planted planted_video() {
  json tags = json::object();
  for (int s = 250; s < 260; ++s) tags[std::to_string(s * 1000)] = "a red ball on the grass";
  for (int s = 100; s < 110; ++s) tags[std::to_string(s * 1000)] = "green kite";
  for (int s = 400; s < 410; ++s) tags[std::to_string(s * 1000)] = "green kite";
  return {scripted({{"embedder", {{"dimension", 96}, {"frame_tags", tags}}}}),
          synthetic_video(600'000, 1000)};
}

}  // namespace

TEST_CASE("retrieval ranks the planted window first and matches brute-force cosine") {
  auto [backend, video] = planted_video();
  ModelGateway gw(backend, quiet_options());
  auto result = GroundingAgent(gw, Budgets{}).clip_retrieve("red ball", video);
  CHECK(result.tool_used == GroundingTool::Retrieve);
  const auto& clips = std::get<std::vector<RetrievedClip>>(result.segments);
  REQUIRE(clips.size() == 15);
  CHECK(clips[0].range == TimeRange::from_seconds(250, 260));

  // Brute force over all 60 windows with a separate backend instance.
  ScriptedBackend oracle_backend(Script::from_json(
      json{{"embedder", {{"dimension", 96}, {"frame_tags", [&] {
        json t = json::object();
        for (int s = 250; s < 260; ++s) t[std::to_string(s * 1000)] = "a red ball on the grass";
        for (int s = 100; s < 110; ++s) t[std::to_string(s * 1000)] = "green kite";
        for (int s = 400; s < 410; ++s) t[std::to_string(s * 1000)] = "green kite";
        return t;
      }()}}}}));
  const auto q = oracle_backend.embed_text("red ball");
  std::vector<std::pair<float, std::int64_t>> all;
  for (std::int64_t w = 0; w < 600; w += 10) {
    Embedding mean(96, 0.0f);
    const auto frames = sample_fps(TimeRange::from_seconds(w, w + 10), 0.2, 2, video);
    for (const auto& f : frames) {
      auto v = oracle_backend.embed_image(f);
      for (int d = 0; d < 96; ++d) mean[d] += v[d] / static_cast<float>(frames.size());
    }
    double dot = 0, nq = 0, nm = 0;
    for (int d = 0; d < 96; ++d) {
      dot += q[d] * mean[d];
      nq += q[d] * q[d];
      nm += mean[d] * mean[d];
    }
    all.emplace_back(static_cast<float>(dot / std::sqrt(nq * nm)), w);
  }
  std::stable_sort(all.begin(), all.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t i = 0; i < clips.size(); ++i) {
    CHECK(clips[i].range.start.whole_seconds() == all[i].second);
    CHECK(clips[i].similarity == doctest::Approx(all[i].first).epsilon(1e-4));
  }
}

TEST_CASE("retrieval returns every window when k exceeds the count and breaks ties by start") {
  auto [backend, video] = planted_video();
  ModelGateway gw(backend, quiet_options());
  Budgets b;
  b.clip_top_k = 100;
  auto result = GroundingAgent(gw, b).clip_retrieve("green kite", video);
  const auto& clips = std::get<std::vector<RetrievedClip>>(result.segments);
  CHECK(clips.size() == 60);
  CHECK(clips[0].range == TimeRange::from_seconds(100, 110));
  CHECK(clips[1].range == TimeRange::from_seconds(400, 410));
  CHECK(clips[0].similarity == clips[1].similarity);
}

TEST_CASE("grounding tool loop: abstract question goes through vlm scoring") {
  auto backend = scripted(
      {{"sequences",
        {{"grounding_agent",
          {json{{"analysis", "abstract"},
                {"concrete_cues", {"person holding a guitar"}},
                {"complexity", "Type2"},
                {"tool", "vlm_scoring_tool"},
                {"args", {{"scoring_instruction", "find the musician"}}}},
           "```json\n{\"tool\": \"finish\", \"args\": {\"answer\": \"The musician appears at 00:03:00.\"}}\n```"}}}},
       {"rules", {segment_rule(4, 4)}},
       {"fallbacks", {{"vlm_scoring", score_reply(1)}}}});
  ModelGateway gw(backend, quiet_options());
  auto result = GroundingAgent(gw, Budgets{}).run("find the musician", mcq("q", "When does a musician appear?"),
                                                   synthetic_video(300'000, 1000));
  CHECK(result.tool_used == GroundingTool::VlmScoring);
  CHECK(result.size() == 1);
  CHECK(result.report.rfind("The musician appears at 00:03:00.", 0) == 0);
  // The scoring prompt carried the agent's instruction and cues.
  bool carried = false;
  for (const auto& e : gw.exchanges()) {
    if (e.channel == "vlm_scoring" &&
        e.request_messages[0].text().find("find the musician\nConcrete visual cues: person holding a guitar") !=
            std::string::npos) {
      carried = true;
    }
  }
  CHECK(carried);
  auto j = to_json(result);
  CHECK(j["tool_used"] == "vlm_scoring_tool");
  CHECK(j["segments"][0]["score"] == 4);
  CHECK(j["segments_scored"] == 5);
}

TEST_CASE("grounding tool loop: explicit question goes through retrieval") {
  const auto video = synthetic_video(600'000, 1000);
  json tags = json::object();
  for (int s = 250; s < 260; ++s) tags[std::to_string(s * 1000)] = "a red ball on the grass";
  auto backend = scripted({{"embedder", {{"dimension", 96}, {"frame_tags", tags}}},
                           {"sequences",
                            {{"grounding_agent",
                              {json{{"tool", "retrieve_tool"}, {"args", {{"cue", "red ball"}}}},
                               json{{"tool", "finish"}, {"args", {{"answer", "around 00:04:10"}}}}}}}}});
  ModelGateway gw(backend, quiet_options());
  auto result = GroundingAgent(gw, Budgets{}).run("where is the red ball", mcq("q", "When is the red ball shown?"), video);
  CHECK(result.tool_used == GroundingTool::Retrieve);
  CHECK(result.size() == 15);
  CHECK(std::get<std::vector<RetrievedClip>>(result.segments)[0].range == TimeRange::from_seconds(250, 260));
}

TEST_CASE("grounding tool loop: immediate finish, bad replies, and the turn budget") {
  SUBCASE("finish first") {
    auto backend = scripted({{"sequences", {{"grounding_agent", {json{{"tool", "finish"}, {"args", {{"answer", "the whole video"}}}}}}}}});
    ModelGateway gw(backend, quiet_options());
    auto result = GroundingAgent(gw, Budgets{}).run("x", mcq("q", "x?"), synthetic_video(60'000, 1000));
    CHECK_FALSE(result.tool_used.has_value());
    CHECK(result.size() == 0);
    CHECK(result.report == "the whole video");
  }
  SUBCASE("errors are fed back") {
    auto backend = scripted({{"sequences",
                              {{"grounding_agent",
                                {"no json at all", json{{"tool", "teleport"}}, json{{"tool", "retrieve_tool"}, {"args", json::object()}},
                                 json{{"tool", "finish"}, {"args", {{"answer", "done"}}}}}}}}});
    ModelGateway gw(backend, quiet_options());
    auto result = GroundingAgent(gw, Budgets{}).run("x", mcq("q", "x?"), synthetic_video(60'000, 1000));
    CHECK(result.report == "done");
    auto ex = gw.exchanges();
    REQUIRE(ex.size() == 4);
    const auto& last = ex[3].request_messages;
    CHECK(last[2].text().find("no JSON") != std::string::npos);
    CHECK(last[4].text().find("unknown tool") != std::string::npos);
    CHECK(last[6].text().find("cue") != std::string::npos);
  }
  SUBCASE("never finishing") {
    auto backend = scripted({{"fallbacks", {{"grounding_agent", "hmm"}}}});
    ModelGateway gw(backend, quiet_options());
    Budgets b;
    b.tool_calls_per_agent = 4;
    try {
      GroundingAgent(gw, b).run("x", mcq("q", "x?"), synthetic_video(60'000, 1000));
      FAIL("expected ToolLoopExceeded");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ToolLoopExceeded);
    }
    CHECK(backend->calls("grounding_agent") == 4);
  }
}
