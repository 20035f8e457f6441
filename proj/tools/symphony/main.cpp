#include "extract.hpp"

#include "symphony/config.hpp"
#include "symphony/error.hpp"
#include "symphony/gateway.hpp"
#include "symphony/grounding.hpp"
#include "symphony/harness.hpp"
#include "symphony/media.hpp"
#include "symphony/openai_backend.hpp"
#include "symphony/orchestrator.hpp"
#include "symphony/scripted_backend.hpp"
#include "symphony/subtitles.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace symphony;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitEpisode = 1;
constexpr int kExitUsage = 2;

struct GlobalArgs {
  std::string config;
  std::string backend_script;
  int jobs = 1;
  std::string log_dir = "symphony-logs";
  bool json = false;
  bool verbose = false;
};

struct QuestionArgs {
  std::string video;
  std::string question;
  std::vector<std::string> options;
  std::string question_id = "ask";
  std::string subtitles;
};

void add_question_flags(CLI::App* cmd, QuestionArgs& q) {
  cmd->add_option("--video", q.video, "Frame directory holding manifest.json")->required();
  cmd->add_option("--question", q.question, "Question text")->required();
  cmd->add_option("--option", q.options,
                  "Answer option as LABEL=text (repeatable; labels default to A, B, C...)");
  cmd->add_option("--question-id", q.question_id, "Identifier used for logs and scripts");
  cmd->add_option("--subtitles", q.subtitles, "SRT or WebVTT subtitle file");
}

Question build_question(const QuestionArgs& a) {
  Question q;
  q.question_id = a.question_id;
  q.text = a.question;
  char next = 'A';
  for (const auto& raw : a.options) {
    const auto eq = raw.find('=');
    if (eq != std::string::npos && eq > 0 && eq <= 3) {
      q.options.push_back({raw.substr(0, eq), raw.substr(eq + 1)});
    } else {
      q.options.push_back({std::string(1, next), raw});
    }
    ++next;
  }
  q.validate();
  return q;
}

std::optional<SubtitleTrack> load_subtitles(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return parse_subtitles(path);
}

// Everything needed to hand each episode its own gateway.
class Runtime {
 public:
  explicit Runtime(const GlobalArgs& g) {
    if (g.config.empty() == g.backend_script.empty()) {
      throw Error(ErrorCode::ConfigError, "give exactly one of --config or --backend-script");
    }
    GatewayOptions opts;
    if (!g.config.empty()) {
      auto cfg = AppConfig::load(g.config);
      budgets_ = cfg.budgets;
      opts.max_concurrency.clear();
      for (const auto& [role, ep] : cfg.backends) {
        if (ep.max_concurrency > 0) opts.max_concurrency[role] = ep.max_concurrency;
      }
      if (!opts.max_concurrency.contains(BackendRole::VLM)) {
        opts.max_concurrency[BackendRole::VLM] = budgets_.scoring_concurrency;
      }
      opts.frame_cap = budgets_.frame_cap;
      root_.emplace(std::make_shared<OpenAiBackend>(cfg.backends), opts);
    } else {
      std::ifstream in(g.backend_script);
      if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + g.backend_script);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", g.backend_script, e.what()));
      }
      if (doc.contains("budgets")) merge_budgets(doc["budgets"], budgets_);
      budgets_.validate();
      book_.emplace(doc);
      opts.max_concurrency[BackendRole::VLM] = budgets_.scoring_concurrency;
      opts.frame_cap = budgets_.frame_cap;
      root_.emplace(std::make_shared<ScriptedBackend>(Script{}), opts);
    }
  }

  const Budgets& budgets() const { return budgets_; }

  ModelGateway gateway(const std::string& question_id, int instance) const {
    if (book_) {
      return root_->with_backend(std::make_shared<ScriptedBackend>(book_->select(question_id, instance)));
    }
    return root_->fork();
  }

  GatewayFactory factory() const {
    return [this](const std::string& id, int instance) { return gateway(id, instance); };
  }

 private:
  Budgets budgets_;
  std::optional<ScriptBook> book_;
  std::optional<ModelGateway> root_;
};

std::string answer_text(const Answer& a) { return a.choice_label ? *a.choice_label : a.free_text; }

ojson answer_json(const Answer& a) {
  return {{"choice_label", a.choice_label ? ojson(*a.choice_label) : ojson(nullptr)},
          {"free_text", a.free_text},
          {"confidence_note", a.confidence_note ? ojson(*a.confidence_note) : ojson(nullptr)}};
}

fs::path log_path(const GlobalArgs& g, const std::string& stem) {
  return fs::path(g.log_dir) / (safe_file_stem(stem) + ".json");
}

int cmd_ask(const GlobalArgs& g, const QuestionArgs& qa) {
  Runtime rt(g);
  const auto question = build_question(qa);
  const auto video = load_manifest(qa.video);
  const auto subs = load_subtitles(qa.subtitles);
  auto gateway = rt.gateway(question.question_id, 0);
  Orchestrator orch(gateway, rt.budgets());
  const auto path = log_path(g, question.question_id);
  try {
    auto outcome = orch.run_episode(question, video, subs ? &*subs : nullptr);
    write_json_file(path, outcome.log);
    if (g.json) {
      ojson j;
      j["question_id"] = question.question_id;
      j["answer"] = answer_json(outcome.answer);
      j["attempts_used"] = outcome.attempts_used;
      j["steps_used"] = outcome.steps_used;
      j["tokens"] = outcome.log["tokens"];
      j["log"] = path.string();
      std::cout << j.dump(2) << '\n';
    } else {
      std::cout << answer_text(outcome.answer) << '\n';
      if (outcome.answer.choice_label && !outcome.answer.free_text.empty()) {
        std::cout << "reply: " << outcome.answer.free_text << '\n';
      }
      if (outcome.answer.confidence_note) std::cout << *outcome.answer.confidence_note << '\n';
      std::cout << fmt::format("attempts: {}  steps: {}\n", outcome.attempts_used, outcome.steps_used);
      for (const auto& step : outcome.log["steps"]) {
        std::cout << fmt::format("  {}. {}: {}\n", step["index"].get<int>(),
                                 step["agent"].get<std::string>(),
                                 step["instruct"].get<std::string>());
      }
      std::cout << "log: " << path.string() << '\n';
    }
    return kExitOk;
  } catch (const EpisodeAbortedError& e) {
    write_json_file(path, e.partial_log());
    std::cerr << "episode aborted: " << e.what() << "\nlog: " << path.string() << '\n';
    return kExitEpisode;
  }
}

int cmd_vote(const GlobalArgs& g, const QuestionArgs& qa, int k) {
  Runtime rt(g);
  const auto question = build_question(qa);
  const auto video = load_manifest(qa.video);
  const auto subs = load_subtitles(qa.subtitles);
  try {
    auto vote = vote_ask(question, video, subs ? &*subs : nullptr, rt.budgets(), k, rt.factory());
    ojson instances = ojson::array();
    for (std::size_t i = 0; i < vote.instances.size(); ++i) {
      const auto path = log_path(g, fmt::format("{}.instance{}", question.question_id, i));
      if (vote.instances[i]) {
        write_json_file(path, vote.instances[i]->log);
        instances.push_back({{"instance", i},
                             {"answer", vote_key(vote.instances[i]->answer)},
                             {"log", path.string()}});
      } else {
        instances.push_back({{"instance", i}, {"answer", nullptr}, {"log", nullptr}});
      }
    }
    if (g.json) {
      ojson j;
      j["question_id"] = question.question_id;
      j["answer"] = answer_json(vote.answer);
      j["chosen_instance"] = vote.choice.instance;
      j["no_majority"] = vote.choice.no_majority;
      j["instances"] = instances;
      j["errors"] = vote.errors;
      std::cout << j.dump(2) << '\n';
    } else {
      std::cout << answer_text(vote.answer) << '\n';
      if (vote.choice.no_majority) std::cout << "no_majority: answer taken from instance " << vote.choice.instance << '\n';
      for (const auto& inst : instances) {
        std::cout << fmt::format("  instance {}: {}\n", inst["instance"].get<std::size_t>(),
                                 inst["answer"].is_null() ? std::string("aborted")
                                                          : inst["answer"].get<std::string>());
      }
    }
    return kExitOk;
  } catch (const EpisodeAbortedError& e) {
    const auto path = log_path(g, question.question_id + ".aborted");
    if (!e.partial_log().is_null()) write_json_file(path, e.partial_log());
    std::cerr << "all voting instances aborted: " << e.what() << '\n';
    return kExitEpisode;
  }
}

int cmd_ground(const GlobalArgs& g, const QuestionArgs& qa, const std::string& tool,
               const std::string& sidecar) {
  Runtime rt(g);
  const auto question = build_question(qa);
  const auto video = load_manifest(qa.video);
  auto gateway = rt.gateway(question.question_id, 0);
  GroundingAgent agent(gateway, rt.budgets());
  GroundingResult result;
  try {
    if (tool == "retrieve") {
      result = agent.clip_retrieve(question.text, video);
    } else if (tool == "vlm") {
      result = agent.vlm_ground(agent.enhance_query(question), video);
    } else {
      result = agent.run(question.text, question, video);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::InvalidArgument) throw;
    std::cerr << "grounding failed: " << e.what() << '\n';
    return kExitEpisode;
  }
  const auto j = ojson::parse(to_json(result).dump());
  const fs::path out = sidecar.empty() ? log_path(g, question.question_id + ".grounding") : fs::path(sidecar);
  write_json_file(out, j);
  if (g.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << result.report << "\nsidecar: " << out.string() << '\n';
  }
  return kExitOk;
}

int cmd_bench(const GlobalArgs& g, BenchOptions opts, const std::string& format) {
  Runtime rt(g);
  auto f = parse_dataset_format(format);
  if (!f) throw Error(ErrorCode::ConfigError, "unknown dataset format: " + format);
  opts.format = *f;
  opts.jobs = g.jobs;
  opts.budgets = rt.budgets();
  const auto report = run_bench(opts, rt.factory());
  if (g.json) {
    std::cout << to_json(report).dump(2) << '\n';
  } else {
    std::cout << render_summary(report);
    std::cout << "report: " << (opts.out_dir / "report.json").string() << '\n';
  }
  return kExitOk;
}

int usage_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::EpisodeAborted:
    case ErrorCode::Timeout:
    case ErrorCode::HttpStatus:
    case ErrorCode::RateLimited:
    case ErrorCode::Connection:
    case ErrorCode::ScriptExhausted:
      return kExitEpisode;
    default:
      return kExitUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent question answering over long videos"};
  app.require_subcommand(1);
  GlobalArgs g;
  app.add_option("--config", g.config, "Backend configuration JSON");
  app.add_option("--backend-script", g.backend_script, "Scripted backend JSON (offline runs)");
  app.add_option("--jobs", g.jobs, "Episodes run in parallel")->check(CLI::PositiveNumber);
  app.add_option("--log-dir", g.log_dir, "Directory for episode logs");
  app.add_flag("--json", g.json, "Machine-readable output on stdout");
  app.add_flag("-v,--verbose", g.verbose, "Log warnings to stderr");

  QuestionArgs ask_args;
  auto* ask = app.add_subcommand("ask", "Answer one question about a video");
  add_question_flags(ask, ask_args);

  QuestionArgs vote_args;
  int k = 3;
  auto* vote = app.add_subcommand("vote", "Answer by majority vote over independent episodes");
  add_question_flags(vote, vote_args);
  vote->add_option("-k,--votes", k, "Number of episodes (odd)")->check(CLI::PositiveNumber);

  QuestionArgs ground_args;
  std::string tool = "auto";
  std::string sidecar;
  auto* ground = app.add_subcommand("ground", "Locate the segments relevant to a question");
  add_question_flags(ground, ground_args);
  ground->add_option("--tool", tool, "auto, retrieve or vlm")
      ->check(CLI::IsMember({"auto", "retrieve", "vlm"}));
  ground->add_option("--sidecar", sidecar, "Where to write the JSON result");

  BenchOptions bench_opts;
  std::string dataset, videos, out_dir = "bench-out", format = "auto";
  std::size_t max_items = 0;
  auto* bench = app.add_subcommand("bench", "Evaluate a JSON-Lines multiple-choice dataset");
  bench->add_option("--dataset", dataset, "JSON-Lines dataset")->required();
  bench->add_option("--videos", videos, "Directory with one frame directory per video_id")->required();
  bench->add_option("--out", out_dir, "Output directory (report, ledger, logs)");
  bench->add_option("--format", format, "auto, native or lvbench");
  bench->add_option("--votes", bench_opts.votes, "Episodes per item (odd)")->check(CLI::PositiveNumber);
  bench->add_option("--max-items", max_items, "Run at most this many pending items");

  ExtractOptions extract_opts;
  auto* extract = app.add_subcommand("extract", "Extract frames from a video file with ffmpeg");
  extract->add_option("--input", extract_opts.input, "Video file")->required();
  extract->add_option("--out", extract_opts.out_dir, "Frame directory to create")->required();
  extract->add_option("--fps", extract_opts.fps, "Frames per second to extract");
  extract->add_option("--video-id", extract_opts.video_id, "Identifier stored in the manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(g.verbose ? spdlog::level::warn : spdlog::level::err);

  try {
    if (*ask) return cmd_ask(g, ask_args);
    if (*vote) return cmd_vote(g, vote_args, k);
    if (*ground) return cmd_ground(g, ground_args, tool, sidecar);
    if (*bench) {
      bench_opts.dataset = dataset;
      bench_opts.videos_root = videos;
      bench_opts.out_dir = out_dir;
      if (max_items > 0) bench_opts.max_items = max_items;
      return cmd_bench(g, bench_opts, format);
    }
    if (*extract) {
      const auto manifest = run_extract(extract_opts);
      std::cout << "wrote " << manifest.string() << '\n';
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return usage_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
