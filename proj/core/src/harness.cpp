#include "symphony/harness.hpp"

#include "symphony/error.hpp"
#include "symphony/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace symphony {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string str_field(const nlohmann::json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = j.find(k);
    if (it == j.end() || it->is_null()) continue;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number()) return it->dump();
  }
  return {};
}

std::vector<Option> parse_options(const nlohmann::json& v) {
  std::vector<Option> out;
  if (v.is_array()) {
    char next = 'A';
    for (const auto& o : v) {
      if (o.is_object()) {
        out.push_back({str_field(o, {"label"}), str_field(o, {"text"})});
      } else if (o.is_string()) {
        // "(B) cake" carries its own label; a bare "cake" takes the next letter.
        static const std::regex kLabeled(R"(^\s*\(([A-Za-z0-9])\)\s*(.*)$)");
        const auto text = o.get<std::string>();
        std::smatch m;
        if (std::regex_match(text, m, kLabeled)) {
          out.push_back({m[1].str(), m[2].str()});
        } else {
          out.push_back({std::string(1, next), text});
        }
      }
      ++next;
    }
  } else if (v.is_object()) {
    for (const auto& [label, text] : v.items()) {
      out.push_back({label, text.is_string() ? text.get<std::string>() : text.dump()});
    }
  }
  return out;
}

// Splits "question\n(A) one\n(B) two" into the stem and its options.
std::pair<std::string, std::vector<Option>> split_inline_options(const std::string& text) {
  static const std::regex kOption(R"(^\s*\(([A-Za-z0-9])\)\s*(.*)$)");
  std::istringstream in(text);
  std::string line;
  std::string stem;
  std::vector<Option> options;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, kOption)) {
      options.push_back({m[1].str(), trim(m[2].str())});
    } else if (options.empty()) {
      if (!stem.empty()) stem += "\n";
      stem += line;
    } else if (!trim(line).empty()) {
      options.back().text += " " + trim(line);
    }
  }
  return {trim(stem), std::move(options)};
}

std::string strip_label(std::string s) {
  s = trim(s);
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '(' || c == ')'; }),
          s.end());
  return trim(s);
}

ojson tokens_json(const std::map<BackendRole, RoleTokens>& tokens) {
  ojson j = ojson::object();
  for (const auto role : kAllRoles) {
    auto it = tokens.find(role);
    if (it == tokens.end()) continue;
    j[std::string(role_key(role))] = {{"prompt_tokens", it->second.prompt_tokens},
                                      {"completion_tokens", it->second.completion_tokens},
                                      {"calls", it->second.calls}};
  }
  return j;
}

std::map<BackendRole, RoleTokens> tokens_from_json(const nlohmann::json& j) {
  std::map<BackendRole, RoleTokens> out;
  if (!j.is_object()) return out;
  for (const auto& [key, v] : j.items()) {
    auto role = parse_role(key);
    if (!role) continue;
    out[*role] = {v.value("prompt_tokens", std::int64_t{0}), v.value("completion_tokens", std::int64_t{0}),
                  v.value("calls", std::int64_t{0})};
  }
  return out;
}

void add_tokens(std::map<BackendRole, RoleTokens>& into, const std::map<BackendRole, RoleTokens>& t) {
  for (const auto& [role, v] : t) {
    auto& acc = into[role];
    acc.prompt_tokens += v.prompt_tokens;
    acc.completion_tokens += v.completion_tokens;
    acc.calls += v.calls;
  }
}

std::optional<SubtitleTrack> find_subtitles(const BenchItem& item, const fs::path& video_dir) {
  if (item.subtitle_path) return parse_subtitles(*item.subtitle_path);
  for (const char* name : {"subtitles.srt", "subtitles.vtt"}) {
    if (fs::exists(video_dir / name)) return parse_subtitles(video_dir / name);
  }
  return std::nullopt;
}

}  // namespace

std::string vote_key(const Answer& a) {
  if (a.choice_label) return *a.choice_label;
  return lower(trim(a.free_text));
}

VoteChoice majority_vote(const std::vector<std::optional<std::string>>& labels) {
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::size_t> first_seen;
  std::size_t completed = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    ++completed;
    ++counts[*labels[i]];
    first_seen.emplace(*labels[i], i);
  }
  if (completed == 0) throw Error(ErrorCode::InvalidArgument, "no completed instances to vote on");
  for (const auto& [label, n] : counts) {
    if (n * 2 > completed) return {first_seen[label], false};
  }
  // No strict majority: the earliest completed instance wins.
  const auto first = std::find_if(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); });
  return {static_cast<std::size_t>(first - labels.begin()), true};
}

VoteOutcome vote_ask(const Question& question, const FrameManifest& video,
                     const SubtitleTrack* subtitles, const Budgets& budgets, int k,
                     const GatewayFactory& factory) {
  if (k < 1 || k % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("vote count must be odd and >= 1, got {}", k));
  }
  VoteOutcome out;
  out.instances.resize(static_cast<std::size_t>(k));
  std::vector<std::optional<std::string>> errors(static_cast<std::size_t>(k));
  std::vector<std::optional<EpisodeAbortedError>> aborts(static_cast<std::size_t>(k));

  parallel_for(static_cast<std::size_t>(k), k, [&](std::size_t i) {
    try {
      auto gateway = factory(question.question_id, static_cast<int>(i));
      Orchestrator orch(gateway, budgets);
      out.instances[i] = orch.run_episode(question, video, subtitles);
    } catch (const EpisodeAbortedError& e) {
      errors[i] = e.what();
      aborts[i] = e;
    } catch (const Error& e) {
      errors[i] = e.what();
      aborts[i] = EpisodeAbortedError(e.what(), nullptr);
    }
  });

  std::vector<std::optional<std::string>> keys;
  for (const auto& inst : out.instances) {
    keys.push_back(inst ? std::optional<std::string>(vote_key(inst->answer)) : std::nullopt);
  }
  for (auto& e : errors) {
    if (e) out.errors.push_back(std::move(*e));
  }
  if (std::none_of(keys.begin(), keys.end(), [](const auto& key) { return key.has_value(); })) {
    throw *aborts.front();
  }
  out.choice = majority_vote(keys);
  out.answer = out.instances[out.choice.instance]->answer;
  return out;
}

void BenchItem::validate() const {
  question.validate();
  if (video_id.empty()) throw Error(ErrorCode::InvalidArgument, "bench item has no video_id");
  if (!question.has_label(answer_label)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("item {}: gold label \"{}\" is not an option", question.question_id,
                            answer_label));
  }
}

std::optional<DatasetFormat> parse_dataset_format(std::string_view s) {
  const auto l = lower(s);
  if (l == "auto") return DatasetFormat::Auto;
  if (l == "native") return DatasetFormat::Native;
  if (l == "lvbench") return DatasetFormat::LvBench;
  return std::nullopt;
}

std::string lvbench_category(std::string_view question_type) {
  static const std::map<std::string, std::string> kCodes{
      {"entity recognition", "ER"},         {"event understanding", "EU"},
      {"key information retrieval", "KIR"}, {"temporal grounding", "TG"},
      {"reasoning", "Rea"},                 {"summarization", "Sum"}};
  const auto l = lower(trim(question_type));
  if (auto it = kCodes.find(l); it != kCodes.end()) return it->second;
  return trim(question_type);
}

BenchItem native_item(const nlohmann::json& r) {
  BenchItem item;
  item.video_id = str_field(r, {"video_id"});
  item.question.question_id = str_field(r, {"question_id", "id", "uid"});
  auto text = str_field(r, {"question"});
  if (r.contains("options")) {
    item.question.text = trim(text);
    item.question.options = parse_options(r["options"]);
  } else {
    auto [stem, opts] = split_inline_options(text);
    item.question.text = stem;
    item.question.options = std::move(opts);
  }
  auto category = str_field(r, {"category"});
  if (!category.empty()) item.question.category = category;
  item.answer_label = strip_label(str_field(r, {"answer", "answer_label"}));
  auto sub = str_field(r, {"subtitle_path", "subtitles"});
  if (!sub.empty()) item.subtitle_path = sub;
  return item;
}

std::vector<BenchItem> lvbench_items(const nlohmann::json& record) {
  std::vector<BenchItem> out;
  const auto video_id = str_field(record, {"key", "video_id", "video"});
  auto one = [&](const nlohmann::json& qa) {
    BenchItem item;
    item.video_id = video_id.empty() ? str_field(qa, {"key", "video_id"}) : video_id;
    item.question.question_id = str_field(qa, {"uid", "question_id", "id"});
    auto [stem, opts] = split_inline_options(str_field(qa, {"question"}));
    item.question.text = stem;
    item.question.options = std::move(opts);
    item.answer_label = strip_label(str_field(qa, {"answer"}));
    if (auto it = qa.find("question_type"); it != qa.end()) {
      if (it->is_array() && !it->empty() && (*it)[0].is_string()) {
        item.question.category = lvbench_category((*it)[0].get<std::string>());
      } else if (it->is_string()) {
        item.question.category = lvbench_category(it->get<std::string>());
      }
    }
    out.push_back(std::move(item));
  };
  if (auto it = record.find("qa"); it != record.end() && it->is_array()) {
    for (const auto& qa : *it) one(qa);
  } else {
    one(record);
  }
  return out;
}

std::vector<BenchItem> load_bench_items(const fs::path& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, fmt::format("cannot open dataset {}", path.string()));
  std::vector<BenchItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("{}:{}: invalid JSON: {}", path.string(), line_no, e.what()));
    }
    auto fmt_here = format;
    if (fmt_here == DatasetFormat::Auto) {
      fmt_here = (j.contains("qa") || j.contains("uid") || j.contains("question_type"))
                     ? DatasetFormat::LvBench
                     : DatasetFormat::Native;
    }
    auto batch = fmt_here == DatasetFormat::LvBench ? lvbench_items(j)
                                                    : std::vector<BenchItem>{native_item(j)};
    for (auto& item : batch) {
      if (item.question.question_id.empty()) {
        item.question.question_id = fmt::format("item-{}", items.size() + 1);
      }
      if (item.subtitle_path && item.subtitle_path->is_relative()) {
        item.subtitle_path = path.parent_path() / *item.subtitle_path;
      }
      try {
        item.validate();
      } catch (const Error& e) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
      }
      items.push_back(std::move(item));
    }
  }
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (!ids.insert(item.question.question_id).second) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("duplicate question_id \"{}\" in {}", item.question.question_id,
                              path.string()));
    }
  }
  return items;
}

ojson to_json(const ItemResult& r) {
  ojson j;
  j["question_id"] = r.question_id;
  j["video_id"] = r.video_id;
  j["category"] = r.category;
  j["gold"] = r.gold;
  j["predicted"] = r.predicted ? ojson(*r.predicted) : ojson(nullptr);
  j["correct"] = r.correct;
  j["error"] = r.error ? ojson(*r.error) : ojson(nullptr);
  j["no_majority"] = r.no_majority;
  j["tokens"] = tokens_json(r.tokens);
  return j;
}

ItemResult item_result_from_json(const nlohmann::json& j) {
  ItemResult r;
  r.question_id = j.at("question_id").get<std::string>();
  r.video_id = j.value("video_id", std::string());
  r.category = j.value("category", std::string());
  r.gold = j.value("gold", std::string());
  if (j.contains("predicted") && j["predicted"].is_string()) r.predicted = j["predicted"].get<std::string>();
  r.correct = j.value("correct", false);
  if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
  r.no_majority = j.value("no_majority", false);
  if (j.contains("tokens")) r.tokens = tokens_from_json(j["tokens"]);
  return r;
}

BenchReport build_report(const std::vector<BenchItem>& items,
                         const std::map<std::string, ItemResult>& results) {
  BenchReport report;
  for (const auto& item : items) {
    auto it = results.find(item.question.question_id);
    if (it == results.end()) {
      ++report.pending;
      continue;
    }
    const auto& r = it->second;
    ++report.total;
    auto& cat = report.per_category[r.category.empty() ? std::string("uncategorized") : r.category];
    ++cat.total;
    if (r.correct) {
      ++report.correct;
      ++cat.correct;
    }
    add_tokens(report.tokens, r.tokens);
    report.items.push_back(r);
  }
  return report;
}

ojson to_json(const BenchReport& r) {
  ojson j;
  j["schema_version"] = kReportSchemaVersion;
  j["complete"] = r.complete();
  j["total"] = r.total;
  j["correct"] = r.correct;
  j["pending"] = r.pending;
  j["overall_accuracy"] = r.overall_accuracy();
  auto cats = ojson::object();
  for (const auto& [name, c] : r.per_category) {
    cats[name] = {{"total", c.total}, {"correct", c.correct}, {"accuracy", c.accuracy()}};
  }
  j["per_category_accuracy"] = std::move(cats);
  j["tokens"] = tokens_json(r.tokens);
  auto items = ojson::array();
  for (const auto& item : r.items) items.push_back(to_json(item));
  j["items"] = std::move(items);
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

std::string render_summary(const BenchReport& r) {
  std::string out = fmt::format("items: {} scored, {} pending\n", r.total, r.pending);
  out += fmt::format("overall accuracy: {:.4f} ({}/{})\n", r.overall_accuracy(), r.correct, r.total);
  out += fmt::format("\n{:<16} {:>6} {:>8} {:>9}\n", "category", "total", "correct", "accuracy");
  for (const auto& [name, c] : r.per_category) {
    out += fmt::format("{:<16} {:>6} {:>8} {:>9.4f}\n", name, c.total, c.correct, c.accuracy());
  }
  out += "\ntokens:\n";
  for (const auto& [role, t] : r.tokens) {
    out += fmt::format("  {:<13} calls {:>6}  prompt {:>10}  completion {:>9}\n", role_key(role),
                       t.calls, t.prompt_tokens, t.completion_tokens);
  }
  std::size_t errors = 0;
  for (const auto& item : r.items) errors += item.error ? 1 : 0;
  if (errors > 0) out += fmt::format("\n{} item(s) failed and were scored incorrect\n", errors);
  out += fmt::format("\nwall time: {:.1f} s\n", r.wall_time_s);
  return out;
}

std::string safe_file_stem(std::string_view id) {
  std::string out;
  for (char c : id) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

void write_json_file(const fs::path& path, const ojson& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

BenchReport run_bench(const BenchOptions& options, const GatewayFactory& factory) {
  const auto started = std::chrono::steady_clock::now();
  const auto items = load_bench_items(options.dataset, options.format);
  fs::create_directories(options.out_dir);
  const auto ledger_path = options.out_dir / "completed.jsonl";

  std::map<std::string, ItemResult> results;
  if (std::ifstream in(ledger_path); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      try {
        auto r = item_result_from_json(nlohmann::json::parse(line));
        results[r.question_id] = std::move(r);
      } catch (const std::exception& e) {
        spdlog::warn("ignoring unreadable ledger line in {}: {}", ledger_path.string(), e.what());
      }
    }
  }

  std::vector<const BenchItem*> todo;
  for (const auto& item : items) {
    if (!results.contains(item.question.question_id)) todo.push_back(&item);
  }
  if (options.max_items && todo.size() > *options.max_items) todo.resize(*options.max_items);

  std::map<std::string, FrameManifest> manifests;
  std::map<std::string, std::string> manifest_errors;
  for (const auto* item : todo) {
    if (manifests.contains(item->video_id) || manifest_errors.contains(item->video_id)) continue;
    try {
      manifests.emplace(item->video_id, load_manifest(options.videos_root / item->video_id));
    } catch (const Error& e) {
      spdlog::warn("video '{}' unavailable: {}", item->video_id, e.what());
      manifest_errors.emplace(item->video_id, fmt::format("{}: {}", to_string(e.code()), e.what()));
    }
  }

  std::ofstream ledger(ledger_path, std::ios::app);
  std::mutex mu;
  parallel_for(todo.size(), options.jobs, [&](std::size_t i) {
    const auto& item = *todo[i];
    ItemResult r;
    r.question_id = item.question.question_id;
    r.video_id = item.video_id;
    r.category = item.question.category.value_or("");
    r.gold = item.answer_label;
    const auto log_path =
        options.out_dir / "logs" / (safe_file_stem(item.question.question_id) + ".json");
    try {
      if (auto bad = manifest_errors.find(item.video_id); bad != manifest_errors.end()) {
        throw Error(ErrorCode::MissingManifest, bad->second);
      }
      const auto& video = manifests.at(item.video_id);
      const auto subtitles = find_subtitles(item, options.videos_root / item.video_id);
      const SubtitleTrack* subs = subtitles ? &*subtitles : nullptr;
      if (options.votes > 1) {
        auto vote = vote_ask(item.question, video, subs, options.budgets, options.votes, factory);
        r.predicted = vote.answer.choice_label;
        r.no_majority = vote.choice.no_majority;
        for (const auto& inst : vote.instances) {
          if (inst) add_tokens(r.tokens, inst->tokens);
        }
        write_json_file(log_path, vote.instances[vote.choice.instance]->log);
      } else {
        auto gateway = factory(item.question.question_id, 0);
        Orchestrator orch(gateway, options.budgets);
        auto outcome = orch.run_episode(item.question, video, subs);
        r.predicted = outcome.answer.choice_label;
        r.tokens = outcome.tokens;
        write_json_file(log_path, outcome.log);
      }
      r.correct = r.predicted && *r.predicted == item.answer_label;
    } catch (const EpisodeAbortedError& e) {
      r.error = e.what();
      if (!e.partial_log().is_null()) write_json_file(log_path, e.partial_log());
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    std::lock_guard lock(mu);
    ledger << to_json(r).dump() << '\n';
    ledger.flush();
    results[r.question_id] = std::move(r);
  });
  ledger.close();

  auto report = build_report(items, results);
  report.executed = todo.size();
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_json_file(options.out_dir / "report.json", to_json(report));
  std::ofstream(options.out_dir / "summary.txt", std::ios::trunc) << render_summary(report);
  return report;
}

}  // namespace symphony
