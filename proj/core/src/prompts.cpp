#include "symphony/prompts.hpp"

#include "prompt_assets.hpp"

#include <cctype>

namespace symphony {

std::string_view prompt_name(PromptId id) {
  switch (id) {
    case PromptId::Planner: return "planner";
    case PromptId::Reflector: return "reflector";
    case PromptId::Subtitle: return "subtitle";
    case PromptId::SubtitleMerge: return "subtitle_merge";
    case PromptId::Perception: return "perception";
    case PromptId::Grounding: return "grounding";
    case PromptId::QueryEnhance: return "query_enhance";
    case PromptId::VlmScoring: return "vlm_scoring";
    case PromptId::FrameInspector: return "frame_inspector";
    case PromptId::GlobalSummary: return "global_summary";
    case PromptId::MultiSegment: return "multi_segment";
    case PromptId::FinalAnswer: return "final_answer";
  }
  return "planner";
}

std::string_view prompt_template(PromptId id) { return detail::prompt_asset(prompt_name(id)); }

std::string render_template(std::string_view tmpl, const PromptVars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() &&
             (std::isalnum(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_')) {
        ++j;
      }
      if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
        if (auto it = vars.find(tmpl.substr(i + 1, j - i - 1)); it != vars.end()) {
          out += it->second;
          i = j + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string render_prompt(PromptId id, const PromptVars& vars) {
  return render_template(prompt_template(id), vars);
}

}  // namespace symphony
