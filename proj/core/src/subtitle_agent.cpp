#include "symphony/subtitle_agent.hpp"

#include "symphony/error.hpp"
#include "symphony/json_extract.hpp"
#include "symphony/prompts.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <regex>
#include <span>
#include <sstream>

namespace symphony {

namespace {

std::string field_text(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  if (it->is_array()) {
    std::string out;
    for (const auto& v : *it) {
      if (!out.empty()) out += "\n";
      out += v.is_string() ? v.get<std::string>() : v.dump();
    }
    return out;
  }
  return it->dump();
}

SubtitleAnalysis from_json(const nlohmann::json& j) {
  return {field_text(j, "relevant_subtitle_info"), field_text(j, "key_entities_and_sentiment"),
          field_text(j, "overall_topic")};
}

SubtitleAnalysis ask_json(ModelGateway& gateway, std::string prompt) {
  std::vector<ChatMessage> messages{ChatMessage::user(std::move(prompt))};
  for (int attempt = 0;; ++attempt) {
    const auto reply = gateway.chat(BackendRole::SubtitleLLM, "subtitle", messages);
    try {
      return from_json(extract_json(reply));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoJsonFound) throw;
      if (attempt >= 1) {
        throw Error(ErrorCode::SubtitleParseFailure,
                    fmt::format("subtitle analysis reply had no JSON after a reprompt: {}", e.what()));
      }
      messages.push_back(ChatMessage::assistant(reply));
      messages.push_back(ChatMessage::user(fmt::format(
          "Your reply could not be parsed ({}). Please return only the JSON object.", e.what())));
    }
  }
}

SubtitleAnalysis analyze_span(ModelGateway& gateway, const std::string& question,
                              std::span<const SubtitleCue> cues, const SubtitleAgentOptions& opt) {
  auto rendered = render_cues(cues);
  if (rendered.size() <= opt.split_chars || cues.size() < 2) {
    return ask_json(gateway, render_prompt(PromptId::Subtitle,
                                           {{"question", question}, {"subtitles", rendered}}));
  }
  const auto half = cues.size() / 2;
  const auto first = analyze_span(gateway, question, cues.first(half), opt);
  const auto second = analyze_span(gateway, question, cues.subspan(half), opt);
  return ask_json(gateway, render_prompt(PromptId::SubtitleMerge,
                                         {{"question", question},
                                          {"first", to_json(first).dump(2)},
                                          {"second", to_json(second).dump(2)}}));
}

}  // namespace

std::string SubtitleAnalysis::render() const {
  return fmt::format("Relevant subtitles:\n{}\nKey entities and sentiment: {}\nOverall topic: {}",
                     relevant_subtitle_info.empty() ? "(none)" : relevant_subtitle_info,
                     key_entities_and_sentiment, overall_topic);
}

nlohmann::json to_json(const SubtitleAnalysis& a) {
  nlohmann::json j;
  j["relevant_subtitle_info"] = a.relevant_subtitle_info;
  j["key_entities_and_sentiment"] = a.key_entities_and_sentiment;
  j["overall_topic"] = a.overall_topic;
  return j;
}

std::vector<std::string> invalid_subtitle_lines(const std::string& relevant,
                                                std::optional<Timecode> duration) {
  static const std::regex kLine(R"(^\[(\d{2,}:\d{2}:\d{2}) - (\d{2,}:\d{2}:\d{2})\]: .*)");
  std::vector<std::string> bad;
  std::istringstream in(relevant);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::smatch m;
    if (!std::regex_match(line, m, kLine)) {
      bad.push_back(line);
      continue;
    }
    try {
      const auto start = parse_timecode(m[1].str());
      const auto end = parse_timecode(m[2].str());
      if (end < start || (duration && end > *duration)) {
        bad.push_back(line);
      }
    } catch (const Error&) {
      bad.push_back(line);
    }
  }
  return bad;
}

SubtitleAnalysis analyze_subtitles(ModelGateway& gateway, const Question& question,
                                   const SubtitleTrack& track, const SubtitleAgentOptions& options) {
  if (track.empty()) {
    return {std::string(), "No subtitles are available for this video.",
            "No subtitles are available for this video."};
  }
  auto analysis = analyze_span(gateway, question.render(), track.cues, options);
  for (const auto& line : invalid_subtitle_lines(analysis.relevant_subtitle_info,
                                                 options.video_duration)) {
    spdlog::warn("subtitle analysis echoed an invalid line: {}", line);
  }
  analysis.relevant_subtitle_info =
      clip_text(std::move(analysis.relevant_subtitle_info), options.relevant_info_chars);
  return analysis;
}

}  // namespace symphony
