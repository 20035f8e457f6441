#pragma once

#include <string_view>

namespace symphony::detail {

// Defined in the generated prompt_assets.cpp. Throws std::out_of_range for
// an unknown name.
std::string_view prompt_asset(std::string_view name);

}  // namespace symphony::detail
