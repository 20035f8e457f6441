#pragma once

#include "symphony/model.hpp"
#include "symphony/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace symphony {

struct EndpointConfig {
  std::string endpoint_url;  // base URL, e.g. https://host/v1
  std::string model_name;
  std::string api_key_env;   // name of the environment variable holding the key
  int max_concurrency = 0;   // 0: unbounded
  double timeout_s = 120.0;
};

/// Backend configuration file:
///
///     {
///       "schema_version": 1,
///       "backends": {
///         "planner":  {"endpoint_url": "...", "model_name": "...", "api_key_env": "...",
///                      "max_concurrency": 8, "timeout_s": 300},
///         "reflector": {...}, "subtitle_llm": {...}, "vlm": {...}, "embedder": {...}
///       },
///       "budgets": {"inner_rounds": 15, ...}
///     }
struct AppConfig {
  std::map<BackendRole, EndpointConfig> backends;
  Budgets budgets;

  static AppConfig parse(const nlohmann::json& doc);
  static AppConfig load(const std::filesystem::path& path);
};

}  // namespace symphony
