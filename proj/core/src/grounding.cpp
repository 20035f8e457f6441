#include "symphony/grounding.hpp"

#include "symphony/error.hpp"
#include "symphony/json_extract.hpp"
#include "symphony/parallel.hpp"
#include "symphony/prompts.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <numeric>

namespace symphony {

namespace {

constexpr double kClipEmbedFps = 0.2;
constexpr int kClipEmbedFrames = 2;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end()) return out;
  if (it->is_string()) {
    if (!it->get<std::string>().empty()) out.push_back(it->get<std::string>());
    return out;
  }
  if (!it->is_array()) return out;
  for (const auto& v : *it) {
    if (v.is_string() && !v.get<std::string>().empty()) out.push_back(v.get<std::string>());
  }
  return out;
}

std::optional<QueryComplexity> parse_complexity(const std::string& s) {
  const auto l = lower(s);
  if (l.find('1') != std::string::npos) return QueryComplexity::Type1;
  if (l.find('2') != std::string::npos) return QueryComplexity::Type2;
  return std::nullopt;
}

std::string format_score_line(const SegmentScore& s) {
  auto line = fmt::format("{} score {}: {}", format_range(s.range), s.score, s.clip_caption);
  if (s.reasoning && !s.reasoning->empty()) line += fmt::format("\n  reasoning: {}", *s.reasoning);
  return line;
}

}  // namespace

std::string EnhancedQuery::scoring_instruction() const {
  std::string out = analysis;
  if (!concrete_cues.empty()) {
    std::string cues;
    for (const auto& c : concrete_cues) {
      if (!cues.empty()) cues += "; ";
      cues += c;
    }
    if (!out.empty()) out += "\n";
    out += "Concrete visual cues: " + cues;
  }
  return out;
}

std::size_t GroundingResult::size() const {
  return std::visit([](const auto& v) { return v.size(); }, segments);
}

std::string_view tool_name(GroundingTool t) {
  return t == GroundingTool::Retrieve ? "retrieve_tool" : "vlm_scoring_tool";
}

nlohmann::json to_json(const GroundingResult& r) {
  nlohmann::json j;
  j["tool_used"] = r.tool_used ? nlohmann::json(tool_name(*r.tool_used)) : nlohmann::json(nullptr);
  auto segs = nlohmann::json::array();
  if (const auto* scores = std::get_if<std::vector<SegmentScore>>(&r.segments)) {
    for (const auto& s : *scores) {
      segs.push_back({{"start", format_timecode(s.range.start)},
                      {"end", format_timecode(s.range.end)},
                      {"start_ms", s.range.start.millis()},
                      {"end_ms", s.range.end.millis()},
                      {"score", s.score},
                      {"clip_caption", s.clip_caption},
                      {"reasoning", s.reasoning ? nlohmann::json(*s.reasoning) : nlohmann::json(nullptr)}});
    }
  } else {
    for (const auto& c : std::get<std::vector<RetrievedClip>>(r.segments)) {
      segs.push_back({{"start", format_timecode(c.range.start)},
                      {"end", format_timecode(c.range.end)},
                      {"start_ms", c.range.start.millis()},
                      {"end_ms", c.range.end.millis()},
                      {"similarity", c.similarity}});
    }
  }
  j["segments"] = std::move(segs);
  j["segments_scored"] = r.all_scores.size();
  j["report"] = r.report;
  return j;
}

std::optional<SegmentScore> parse_segment_score(std::string_view reply, const TimeRange& range) {
  nlohmann::json j;
  try {
    j = extract_json(reply);
  } catch (const Error&) {
    return std::nullopt;
  }
  auto it = j.find("relevance_score");
  if (it == j.end()) return std::nullopt;
  int score = 0;
  if (it->is_number_integer()) {
    score = it->get<int>();
  } else if (it->is_number_float()) {
    const double d = it->get<double>();
    if (d != static_cast<double>(static_cast<int>(d))) return std::nullopt;
    score = static_cast<int>(d);
  } else if (it->is_string()) {
    const auto s = it->get<std::string>();
    if (s.size() != 1 || !std::isdigit(static_cast<unsigned char>(s[0]))) return std::nullopt;
    score = s[0] - '0';
  } else {
    return std::nullopt;
  }
  if (score < 1 || score > 4) return std::nullopt;

  SegmentScore out;
  out.range = range;
  out.score = score;
  out.clip_caption = string_field(j, "clip_caption");
  if (score > 1) {
    auto reasoning = string_field(j, "reasoning");
    if (lower(reasoning) == "null") reasoning.clear();
    out.reasoning = std::move(reasoning);
  }
  return out;
}

GroundingAgent::GroundingAgent(ModelGateway& gateway, const Budgets& budgets)
    : gateway_(gateway), budgets_(budgets) {}

EnhancedQuery GroundingAgent::enhance_query(const Question& question) {
  question.validate();
  std::vector<ChatMessage> messages{
      ChatMessage::user(render_prompt(PromptId::QueryEnhance, {{"question", question.render()}}))};
  nlohmann::json j;
  for (int attempt = 0;; ++attempt) {
    const auto reply = gateway_.chat(BackendRole::VLM, "query_enhance", messages);
    try {
      j = extract_json(reply);
      break;
    } catch (const Error& e) {
      if (attempt >= 1) {
        throw Error(ErrorCode::GroundingParseFailure,
                    fmt::format("query enhancement reply had no JSON after a reprompt: {}", e.what()));
      }
      messages.push_back(ChatMessage::assistant(reply));
      messages.push_back(ChatMessage::user(fmt::format(
          "Your reply could not be parsed ({}: {}). Reply with only the JSON object.",
          to_string(e.code()), e.what())));
    }
  }

  EnhancedQuery q;
  q.original = question.render();
  q.analysis = string_field(j, "analysis");
  q.concrete_cues = string_list(j, "concrete_cues");
  q.complexity = parse_complexity(string_field(j, "complexity")).value_or(QueryComplexity::Type2);
  if (q.complexity == QueryComplexity::Type2 && q.concrete_cues.empty()) {
    q.concrete_cues.push_back(question.text);
  }
  return q;
}

SegmentScore GroundingAgent::score_segment(const EnhancedQuery& query, const TimeRange& segment,
                                           const FrameManifest& video) {
  const auto frames = sample_fps(segment, budgets_.scoring_fps(), budgets_.frame_cap, video);
  if (frames.empty()) {
    spdlog::warn("segment {} has no frames; scored 1", format_range(segment));
    return {segment, 1, "no frames available", std::nullopt};
  }
  const auto prompt = render_prompt(PromptId::VlmScoring,
                                    {{"question", query.original},
                                     {"scoring_instruction", query.scoring_instruction()},
                                     {"range", format_range(segment)}});
  const auto reply = gateway_.vision_chat("vlm_scoring", prompt, frames);
  if (auto parsed = parse_segment_score(reply, segment)) return std::move(*parsed);
  spdlog::warn("unparseable relevance score for segment {}; treated as 1", format_range(segment));
  return {segment, 1, std::string(), std::nullopt};
}

GroundingResult GroundingAgent::vlm_ground(const EnhancedQuery& query, const FrameManifest& video) {
  const auto segments = partition_segments(video.duration(), budgets_.segment_duration_s);
  std::vector<SegmentScore> scores(segments.size());
  std::vector<char> failed(segments.size(), 0);
  std::exception_ptr last_transport_error;
  std::mutex mu;

  parallel_for(segments.size(), budgets_.scoring_concurrency, [&](std::size_t i) {
    try {
      scores[i] = score_segment(query, segments[i], video);
    } catch (const TransportError& e) {
      spdlog::warn("scoring {} failed: {}; treated as 1", format_range(segments[i]), e.what());
      scores[i] = {segments[i], 1, std::string(), std::nullopt};
      failed[i] = 1;
      std::lock_guard lock(mu);
      last_transport_error = std::current_exception();
    }
  });
  if (!segments.empty() &&
      std::all_of(failed.begin(), failed.end(), [](char f) { return f != 0; })) {
    std::rethrow_exception(last_transport_error);
  }

  std::vector<SegmentScore> kept;
  for (const auto& s : scores) {
    if (s.score >= budgets_.score_keep_min) kept.push_back(s);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const SegmentScore& a, const SegmentScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.range.start < b.range.start;
  });

  GroundingResult result;
  result.tool_used = GroundingTool::VlmScoring;
  if (kept.empty()) {
    result.report = fmt::format(
        "VLM relevance scoring of {} segments ({} s each): no relevant content found.",
        segments.size(), budgets_.segment_duration_s);
  } else {
    result.report = fmt::format(
        "VLM relevance scoring of {} segments ({} s each): {} relevant (score >= {}), most relevant first.",
        segments.size(), budgets_.segment_duration_s, kept.size(), budgets_.score_keep_min);
    for (const auto& s : kept) result.report += "\n" + format_score_line(s);
  }
  result.segments = std::move(kept);
  result.all_scores = std::move(scores);
  return result;
}

GroundingResult GroundingAgent::clip_retrieve(const std::string& query_text,
                                              const FrameManifest& video) {
  const auto windows = clip_windows(video.duration(), budgets_.clip_window_s);
  std::vector<std::vector<Frame>> window_frames;
  std::vector<std::pair<std::size_t, Frame>> jobs;  // (window index, frame)
  window_frames.reserve(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    window_frames.push_back(sample_fps(windows[w], kClipEmbedFps, kClipEmbedFrames, video));
    for (const auto& f : window_frames.back()) jobs.emplace_back(w, f);
  }

  const auto query_vec = gateway_.embed_text(query_text);
  std::vector<Embedding> frame_vecs(jobs.size());
  parallel_for(jobs.size(), budgets_.scoring_concurrency, [&](std::size_t i) {
    frame_vecs[i] = gateway_.embed_image(jobs[i].second);
  });

  std::vector<Embedding> window_vecs(windows.size());
  std::vector<int> counts(windows.size(), 0);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& acc = window_vecs[jobs[i].first];
    const auto& v = frame_vecs[i];
    if (acc.empty()) acc.assign(v.size(), 0.0f);
    for (std::size_t d = 0; d < std::min(acc.size(), v.size()); ++d) acc[d] += v[d];
    counts[jobs[i].first] += 1;
  }

  std::vector<RetrievedClip> clips;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (counts[w] == 0) continue;
    auto& v = window_vecs[w];
    for (float& x : v) x /= static_cast<float>(counts[w]);
    normalize(v);
    clips.push_back({windows[w], cosine_similarity(query_vec, v)});
  }
  std::stable_sort(clips.begin(), clips.end(), [](const RetrievedClip& a, const RetrievedClip& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.range.start < b.range.start;
  });
  if (clips.size() > static_cast<std::size_t>(budgets_.clip_top_k)) {
    clips.resize(static_cast<std::size_t>(budgets_.clip_top_k));
  }

  GroundingResult result;
  result.tool_used = GroundingTool::Retrieve;
  result.report = fmt::format("Embedding retrieval for \"{}\": top {} of {} clips ({} s each).",
                              query_text, clips.size(), windows.size(), budgets_.clip_window_s);
  for (const auto& c : clips) {
    result.report += fmt::format("\n{} similarity {:.3f}", format_range(c.range), c.similarity);
  }
  result.segments = std::move(clips);
  return result;
}

GroundingResult GroundingAgent::run(const std::string& instruct, const Question& question,
                                    const FrameManifest& video) {
  std::vector<ChatMessage> messages{ChatMessage::user(
      render_prompt(PromptId::Grounding, {{"question", question.render()},
                                          {"duration", format_timecode(video.duration())},
                                          {"instruct", instruct}}))};
  std::optional<GroundingResult> last;

  for (int turn = 0; turn < budgets_.tool_calls_per_agent; ++turn) {
    const auto reply = gateway_.chat(BackendRole::VLM, "grounding_agent", messages);
    messages.push_back(ChatMessage::assistant(reply));

    std::string feedback;
    try {
      const auto call = extract_json(reply);
      const auto tool = lower(string_field(call, "tool"));
      const auto args = call.contains("args") && call["args"].is_object() ? call["args"]
                                                                           : nlohmann::json::object();
      if (tool == "finish") {
        GroundingResult result = last.value_or(GroundingResult{});
        auto answer = string_field(args, "answer");
        if (answer.empty()) answer = string_field(call, "answer");
        if (!result.tool_used) {
          result.report = answer;
        } else if (!answer.empty()) {
          result.report = answer + "\n\n" + result.report;
        }
        return result;
      }
      if (tool == "retrieve_tool" || tool == "retrieve") {
        auto cue = string_field(args, "cue");
        if (cue.empty()) {
          feedback = "error: retrieve_tool needs a non-empty \"cue\" argument.";
        } else {
          last = clip_retrieve(cue, video);
          feedback = "retrieve_tool result:\n" + last->report;
        }
      } else if (tool == "vlm_scoring_tool" || tool == "vlm_scoring") {
        EnhancedQuery q;
        q.original = question.render();
        q.analysis = string_field(args, "scoring_instruction");
        if (q.analysis.empty()) q.analysis = string_field(call, "analysis");
        q.concrete_cues = string_list(call, "concrete_cues");
        q.complexity = QueryComplexity::Type2;
        if (q.analysis.empty() && q.concrete_cues.empty()) {
          feedback = "error: vlm_scoring_tool needs a \"scoring_instruction\" argument.";
        } else {
          last = vlm_ground(q, video);
          feedback = "vlm_scoring_tool result:\n" + last->report;
        }
      } else {
        feedback = fmt::format(
            "error: unknown tool \"{}\". Use retrieve_tool, vlm_scoring_tool or finish.", tool);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoJsonFound) throw;
      feedback = "error: reply contained no JSON tool call. Reply with exactly one JSON object.";
    }
    messages.push_back(ChatMessage::user(feedback));
  }
  throw Error(ErrorCode::ToolLoopExceeded,
              fmt::format("grounding agent did not finish within {} turns",
                          budgets_.tool_calls_per_agent));
}

}  // namespace symphony
