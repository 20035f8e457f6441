#pragma once

#include "symphony/gateway.hpp"
#include "symphony/media.hpp"
#include "symphony/orchestrator.hpp"
#include "symphony/subtitles.hpp"
#include "symphony/types.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace symphony {

inline constexpr int kReportSchemaVersion = 1;

/// Builds the gateway one episode runs on. `instance` is the voting slot
/// (0 for plain runs).
using GatewayFactory = std::function<ModelGateway(const std::string& question_id, int instance)>;

struct VoteChoice {
  std::size_t instance = 0;  // index of the instance whose answer is returned
  bool no_majority = false;
};

/// Picks among per-instance answers, in launch order; nullopt marks an
/// aborted instance. The winner has the highest count, ties going to the
/// label launched first, and no_majority is set unless the winner holds a
/// strict majority of the completed instances. Throws InvalidArgument when
/// every instance aborted.
VoteChoice majority_vote(const std::vector<std::optional<std::string>>& labels);

/// Key an answer votes under: its option label, or its normalized free text.
std::string vote_key(const Answer& a);

struct VoteOutcome {
  Answer answer;
  VoteChoice choice;
  std::vector<std::optional<EpisodeOutcome>> instances;  // nullopt = aborted
  std::vector<std::string> errors;                        // one per aborted instance
};

/// Runs k independent episodes concurrently and votes on their answers.
/// Throws EpisodeAbortedError when every instance aborts.
VoteOutcome vote_ask(const Question& question, const FrameManifest& video,
                     const SubtitleTrack* subtitles, const Budgets& budgets, int k,
                     const GatewayFactory& factory);

struct BenchItem {
  std::string video_id;
  Question question;
  std::string answer_label;
  std::optional<std::filesystem::path> subtitle_path;

  void validate() const;
};

enum class DatasetFormat { Auto, Native, LvBench };

std::optional<DatasetFormat> parse_dataset_format(std::string_view s);

/// Reads a JSON-Lines dataset. Relative subtitle paths resolve against the
/// dataset's directory.
std::vector<BenchItem> load_bench_items(const std::filesystem::path& path,
                                        DatasetFormat format = DatasetFormat::Auto);

/// One LVBench-style record (a video with a `qa` list, or a single flattened
/// question) to bench items. Options are read from "(A) text" lines of the
/// question.
std::vector<BenchItem> lvbench_items(const nlohmann::json& record);
BenchItem native_item(const nlohmann::json& record);

/// Short category code for LVBench question types ("entity recognition" -> "ER").
std::string lvbench_category(std::string_view question_type);

struct BenchOptions {
  std::filesystem::path dataset;
  DatasetFormat format = DatasetFormat::Auto;
  std::filesystem::path videos_root;  // manifests live in <videos_root>/<video_id>
  std::filesystem::path out_dir;      // report.json, summary.txt, completed.jsonl, logs/
  int jobs = 1;
  int votes = 1;
  /// Stop after this many newly run items (the rest stay pending for a resume).
  std::optional<std::size_t> max_items;
  Budgets budgets;
};

struct ItemResult {
  std::string question_id;
  std::string video_id;
  std::string category;
  std::string gold;
  std::optional<std::string> predicted;
  bool correct = false;
  std::optional<std::string> error;
  bool no_majority = false;
  std::map<BackendRole, RoleTokens> tokens;
};

nlohmann::ordered_json to_json(const ItemResult& r);
ItemResult item_result_from_json(const nlohmann::json& j);

struct CategoryScore {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

struct BenchReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::map<std::string, CategoryScore> per_category;
  std::vector<ItemResult> items;  // dataset order
  std::map<BackendRole, RoleTokens> tokens;
  std::size_t pending = 0;        // items not yet run
  std::size_t executed = 0;       // items run in this invocation
  double wall_time_s = 0.0;

  double overall_accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
  }
  bool complete() const { return pending == 0; }
};

/// Aggregates results in the order of `items`; items without a result count
/// as pending.
BenchReport build_report(const std::vector<BenchItem>& items,
                         const std::map<std::string, ItemResult>& results);

nlohmann::ordered_json to_json(const BenchReport& r);
std::string render_summary(const BenchReport& r);

/// Runs every item not already in <out_dir>/completed.jsonl with up to
/// `jobs` episodes in flight, appending each result to the ledger as it
/// finishes. Per-item failures are scored incorrect with an error note.
/// Writes report.json and summary.txt.
BenchReport run_bench(const BenchOptions& options, const GatewayFactory& factory);

/// Writes an episode log as pretty JSON, creating parent directories.
void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j);

/// File-name-safe form of an identifier.
std::string safe_file_stem(std::string_view id);

}  // namespace symphony
