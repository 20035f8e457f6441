#include "symphony/config.hpp"
#include "symphony/error.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <fstream>

using namespace symphony;
using nlohmann::json;

TEST_CASE("a full config parses endpoints and budget overrides") {
  auto cfg = AppConfig::parse(json::parse(R"({
    "schema_version": 1,
    "backends": {
      "planner": {"endpoint_url": "https://api.example/v1", "model_name": "big",
                  "api_key_env": "PLANNER_KEY", "max_concurrency": 8, "timeout_s": 300},
      "vlm": {"endpoint_url": "http://localhost:8000/v1", "model_name": "vl"},
      "embedder": {"endpoint_url": "http://localhost:8001", "model_name": "clip"}
    },
    "budgets": {"inner_rounds": 10, "scoring_concurrency": 4}
  })"));
  REQUIRE(cfg.backends.size() == 3);
  const auto& p = cfg.backends.at(BackendRole::Planner);
  CHECK(p.endpoint_url == "https://api.example/v1");
  CHECK(p.api_key_env == "PLANNER_KEY");
  CHECK(p.max_concurrency == 8);
  CHECK(p.timeout_s == 300.0);
  CHECK(cfg.backends.at(BackendRole::VLM).max_concurrency == 0);
  CHECK(cfg.backends.at(BackendRole::VLM).timeout_s == 120.0);
  CHECK(cfg.budgets.inner_rounds == 10);
  CHECK(cfg.budgets.scoring_concurrency == 4);
  CHECK(cfg.budgets.reflection_rounds == 3);
}

TEST_CASE("config errors are reported as ConfigError") {
  auto code_of = [](const char* text) {
    try {
      AppConfig::parse(json::parse(text));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code_of(R"({"schema_version": 2})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"backends": {"oracle": {"endpoint_url": "x", "model_name": "y"}}})") ==
        ErrorCode::ConfigError);
  CHECK(code_of(R"({"backends": {"vlm": {"model_name": "y"}}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"backends": {"vlm": {"endpoint_url": "", "model_name": "y"}}})") ==
        ErrorCode::ConfigError);
  CHECK(code_of(R"({"budgets": {"frame_cap": 0}})") == ErrorCode::ConfigError);
}

TEST_CASE("config files load from disk") {
  testing::TempDir dir;
  std::ofstream(dir / "ok.json") << R"({"backends": {"reflector": {"endpoint_url": "http://h/v1", "model_name": "m"}}})";
  std::ofstream(dir / "bad.json") << "{not json";
  CHECK(AppConfig::load(dir / "ok.json").backends.count(BackendRole::Reflector) == 1);
  CHECK_THROWS_AS(AppConfig::load(dir / "bad.json"), Error);
  CHECK_THROWS_AS(AppConfig::load(dir / "missing.json"), Error);
}

TEST_CASE("role keys round trip") {
  for (auto r : kAllRoles) CHECK(parse_role(role_key(r)) == r);
  CHECK_FALSE(parse_role("VLM").has_value());
  CHECK(role_key(BackendRole::SubtitleLLM) == "subtitle_llm");
}
