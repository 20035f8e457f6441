#include "symphony/error.hpp"
#include "symphony/json_extract.hpp"

#include <doctest.h>

using namespace symphony;

TEST_CASE("first JSON object inside prose and code fences") {
  const auto j = extract_json("Sure!\n```json\n{\"agent\": \"finish\", \"instruct\": \"C\"}\n```\nDone.");
  CHECK(j["agent"] == "finish");
}

TEST_CASE("think blocks and unbalanced braces ahead of the object are skipped") {
  const auto j = extract_json("<think>maybe {\"agent\": \"wrong\"}</think> set {x} then {\"a\": 1}");
  CHECK(j["a"] == 1);
}

TEST_CASE("braces inside strings do not confuse matching") {
  const auto j = extract_json(R"(reply: {"text": "a } b { c", "n": 2})");
  CHECK(j["text"] == "a } b { c");
}

TEST_CASE("comments and trailing commas copied from prompt examples are tolerated") {
  const auto j = extract_json(
      "{\n  \"credible\": false, // true means credible\n  \"comment\": \"x, y\",\n}");
  CHECK(j["credible"] == false);
  CHECK(j["comment"] == "x, y");
  const auto k = extract_json(R"({"url": "http://a/b", "list": [1, 2,],})");
  CHECK(k["url"] == "http://a/b");
  CHECK(k["list"].size() == 2);
}

TEST_CASE("no object means NoJsonFound") {
  for (const char* text : {"", "plain words", "[1, 2, 3]", "{broken", "<think>{\"a\":1}</think>"}) {
    CAPTURE(text);
    try {
      extract_json(text);
      FAIL("found JSON in " << text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoJsonFound);
    }
  }
}
