#include "symphony/grounding.hpp"
#include "symphony/json_extract.hpp"
#include "symphony/media.hpp"
#include "symphony/scripted_backend.hpp"
#include "symphony/harness.hpp"

#include <benchmark/benchmark.h>
#include <spdlog/spdlog.h>

#include <optional>
#include <string>
#include <vector>

using namespace symphony;

namespace {

FrameManifest dense_video(std::int64_t duration_ms, std::int64_t step_ms) {
  std::vector<Frame> frames;
  for (std::int64_t t = 0; t < duration_ms; t += step_ms) frames.push_back({Timecode(t), "f.jpg"});
  return FrameManifest("bench", Timecode(duration_ms), std::move(frames));
}

void BM_PartitionSegments(benchmark::State& state) {
  const Timecode duration(state.range(0) * 60'000);
  for (auto _ : state) benchmark::DoNotOptimize(partition_segments(duration, 60));
}
BENCHMARK(BM_PartitionSegments)->Arg(10)->Arg(90)->Arg(600);

void BM_SampleFps(benchmark::State& state) {
  const auto video = dense_video(3'600'000, 100);
  const auto range = TimeRange::from_seconds(600, 600 + state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_fps(range, 0.5, 40, video));
}
BENCHMARK(BM_SampleFps)->Arg(60)->Arg(600);

// A model reply wrapped in prose and a code fence, as chat models tend to answer.
void BM_ExtractJson(benchmark::State& state) {
  std::string reply = "Sure, here is my decision.\n```json\n{\"agent\": \"Grounding Agent\", \"instruct\": \"";
  reply += std::string(static_cast<std::size_t>(state.range(0)), 'x');
  reply += "\", \"notes\": [1, 2, {\"nested\": \"}\"}]}\n```\nLet me know.";
  for (auto _ : state) benchmark::DoNotOptimize(extract_json(reply));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(reply.size()));
}
BENCHMARK(BM_ExtractJson)->Arg(64)->Arg(4096);

void BM_MajorityVote(benchmark::State& state) {
  const std::vector<std::optional<std::string>> votes{"A", "C", std::nullopt, "C", "A", "C", "D"};
  for (auto _ : state) benchmark::DoNotOptimize(majority_vote(votes));
}
BENCHMARK(BM_MajorityVote);

// Fan-out of segment scoring against an instant scripted backend.
void BM_VlmGroundFanOut(benchmark::State& state) {
  const auto segments = state.range(0);
  const auto video = dense_video(segments * 60'000, 2000);
  const nlohmann::json script{
      {"fallbacks",
       {{"vlm_scoring", R"({"clip_caption":"c","reasoning":"r","relevance_score":2})"}}}};
  Budgets budgets;
  EnhancedQuery q{"q", "a", {"b"}, QueryComplexity::Type2};
  for (auto _ : state) {
    ModelGateway gw(std::make_shared<ScriptedBackend>(Script::from_json(script)), GatewayOptions{});
    benchmark::DoNotOptimize(GroundingAgent(gw, budgets).vlm_ground(q, video));
  }
  state.SetItemsProcessed(state.iterations() * segments);
}
BENCHMARK(BM_VlmGroundFanOut)->Arg(10)->Arg(90)->UseRealTime();

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
