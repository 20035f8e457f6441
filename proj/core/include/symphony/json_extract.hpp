#pragma once

#include <nlohmann/json.hpp>

#include <string_view>

namespace symphony {

/// First balanced `{...}` in `text` that parses as a JSON object. Surrounding
/// prose, code fences and `<think>` blocks are skipped. Comments and trailing
/// commas inside the object are tolerated since models copy them from
/// prompt examples. Throws NoJsonFound.
nlohmann::json extract_json(std::string_view text);

}  // namespace symphony
