#include "symphony/config.hpp"

#include "symphony/error.hpp"

#include <fmt/format.h>

#include <fstream>

namespace symphony {

AppConfig AppConfig::parse(const nlohmann::json& doc) {
  AppConfig cfg;
  try {
    if (doc.value("schema_version", 1) != 1) {
      throw Error(ErrorCode::ConfigError, "unsupported config schema_version");
    }
    if (auto it = doc.find("backends"); it != doc.end()) {
      for (const auto& [key, value] : it->items()) {
        const auto role = parse_role(key);
        if (!role) throw Error(ErrorCode::ConfigError, fmt::format("unknown backend role '{}'", key));
        EndpointConfig ep;
        ep.endpoint_url = value.at("endpoint_url").get<std::string>();
        ep.model_name = value.at("model_name").get<std::string>();
        ep.api_key_env = value.value("api_key_env", std::string());
        ep.max_concurrency = value.value("max_concurrency", 0);
        ep.timeout_s = value.value("timeout_s", 120.0);
        if (ep.endpoint_url.empty() || ep.model_name.empty()) {
          throw Error(ErrorCode::ConfigError,
                      fmt::format("backend '{}' needs endpoint_url and model_name", key));
        }
        cfg.backends.emplace(*role, std::move(ep));
      }
    }
    if (auto it = doc.find("budgets"); it != doc.end()) merge_budgets(*it, cfg.budgets);
    cfg.budgets.validate();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return cfg;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, fmt::format("cannot open config '{}'", path.string()));
  auto doc = nlohmann::json::parse(in, nullptr, false, true);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::ConfigError, fmt::format("config '{}' is not valid JSON", path.string()));
  }
  return parse(doc);
}

}  // namespace symphony
