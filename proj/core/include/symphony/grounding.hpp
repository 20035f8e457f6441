#pragma once

#include "symphony/gateway.hpp"
#include "symphony/media.hpp"
#include "symphony/subtitles.hpp"
#include "symphony/types.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace symphony {

enum class QueryComplexity { Type1, Type2 };

/// The question rewritten as things a camera could see.
struct EnhancedQuery {
  std::string original;  // rendered question, options included
  std::string analysis;
  std::vector<std::string> concrete_cues;  // never empty for Type2
  QueryComplexity complexity = QueryComplexity::Type2;

  /// What the scoring prompt receives as the upstream analysis.
  std::string scoring_instruction() const;
};

/// One segment's verdict on the 1-4 relevance scale. `reasoning` is empty
/// exactly when score == 1.
struct SegmentScore {
  TimeRange range;
  int score = 1;
  std::string clip_caption;
  std::optional<std::string> reasoning;
};

struct RetrievedClip {
  TimeRange range;
  float similarity = 0.0f;
};

enum class GroundingTool { Retrieve, VlmScoring };

struct GroundingResult {
  std::optional<GroundingTool> tool_used;  // empty when the agent finished without a tool
  /// Kept segments: VLM path -> SegmentScore (score >= keep threshold, by
  /// score desc then start asc); Retrieve path -> RetrievedClip (top-k by
  /// similarity desc, ties by start).
  std::variant<std::vector<SegmentScore>, std::vector<RetrievedClip>> segments;
  /// VLM path only: every partition segment's score, in time order.
  std::vector<SegmentScore> all_scores;
  std::string report;

  std::size_t size() const;
};

nlohmann::json to_json(const GroundingResult& r);
std::string_view tool_name(GroundingTool t);

/// Localizes the parts of a video that matter for a question. Picks between
/// embedding retrieval (explicit single-scene questions) and fan-out VLM
/// relevance scoring (abstract or multi-hop ones); the choice is the
/// model's, made inside the tool loop.
class GroundingAgent {
 public:
  GroundingAgent(ModelGateway& gateway, const Budgets& budgets);

  /// Tool loop: analyze, call retrieve_tool or vlm_scoring_tool, finish with
  /// a localization report. Throws ToolLoopExceeded after
  /// tool_calls_per_agent model turns without `finish`.
  GroundingResult run(const std::string& instruct, const Question& question,
                      const FrameManifest& video);

  /// One model call (plus one reprompt on missing JSON). A Type2 verdict
  /// without cues falls back to the question text as its only cue.
  /// Throws GroundingParseFailure.
  EnhancedQuery enhance_query(const Question& question);

  /// Never throws for bad model output: a parse failure or out-of-range
  /// score becomes score 1 with a warning. Transport errors propagate.
  SegmentScore score_segment(const EnhancedQuery& query, const TimeRange& segment,
                             const FrameManifest& video);

  /// Scores every segment of the partition with at most
  /// scoring_concurrency calls in flight, keeps score >= score_keep_min.
  /// Segments whose call fails count as score 1; if every call fails the
  /// last transport error is rethrown.
  GroundingResult vlm_ground(const EnhancedQuery& query, const FrameManifest& video);

  /// Top clip_top_k 10 s windows by cosine between the query embedding and
  /// the mean embedding of each window's frames.
  GroundingResult clip_retrieve(const std::string& query_text, const FrameManifest& video);

 private:
  ModelGateway& gateway_;
  Budgets budgets_;
};

/// Parses a scoring reply. Returns nullopt when the reply has no JSON or
/// the score is not an integer in [1, 4].
std::optional<SegmentScore> parse_segment_score(std::string_view reply, const TimeRange& range);

}  // namespace symphony
