#include "symphony/json_extract.hpp"

#include "symphony/error.hpp"

#include <optional>
#include <string>

namespace symphony {

namespace {

std::string strip_think_blocks(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find("<think>", pos);
    if (open == std::string_view::npos) break;
    auto close = text.find("</think>", open);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    pos = close + 8;
  }
  out.append(text.substr(pos));
  return out;
}

// End index (inclusive) of the object opened at `open`, honoring strings.
std::optional<std::size_t> match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i;
  }
  return std::nullopt;
}

// Drops `//` comments and commas that directly precede a closing bracket,
// leaving string contents alone.
std::string drop_trailing_commas(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out += c;
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '/' && i + 1 < s.size() && s[i + 1] == '/') {
      auto nl = s.find('\n', i);
      if (nl == std::string_view::npos) break;
      i = nl - 1;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size()) {
        if (s[j] == ' ' || s[j] == '\t' || s[j] == '\r' || s[j] == '\n') {
          ++j;
        } else if (s.substr(j, 2) == "//") {
          auto nl = s.find('\n', j);
          j = nl == std::string_view::npos ? s.size() : nl;
        } else {
          break;
        }
      }
      if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;
    }
    out += c;
  }
  return out;
}

std::optional<nlohmann::json> try_parse(std::string_view candidate) {
  auto parsed = nlohmann::json::parse(candidate, nullptr, /*allow_exceptions=*/false,
                                      /*ignore_comments=*/true);
  if (parsed.is_discarded()) {
    parsed = nlohmann::json::parse(drop_trailing_commas(candidate), nullptr, false, true);
  }
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

}  // namespace

nlohmann::json extract_json(std::string_view raw) {
  const std::string text = strip_think_blocks(raw);
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string::npos) {
    if (auto close = match_brace(text, pos)) {
      if (auto obj = try_parse(std::string_view(text).substr(pos, *close - pos + 1))) {
        return std::move(*obj);
      }
    }
    ++pos;
  }
  throw Error(ErrorCode::NoJsonFound, "no JSON object found in model output");
}

}  // namespace symphony
