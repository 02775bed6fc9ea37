#include "tpeval/run_store.hpp"

#include <algorithm>
#include <fstream>

#include "tpeval/digest.hpp"
#include "tpeval/errors.hpp"

namespace tpeval {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatVersion = "1";

void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::optional<Json> read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what(), path.string(), 1);
  }
}

}  // namespace

std::string make_run_id(const std::string& task_id,
                        const std::string& config_digest,
                        const std::string& dataset_digest) {
  return "r" + short_digest({task_id, config_digest, dataset_digest});
}

RunStore::RunStore(fs::path root) : root_(std::move(root)) {}

fs::path RunStore::run_dir(const std::string& run_id) const {
  return root_ / run_id;
}

bool RunStore::exists(const std::string& run_id) const {
  return fs::exists(run_dir(run_id) / "config.json");
}

void RunStore::init_run(const RunHistory& history, const TaskSpec& task,
                        const std::string& dataset_digest) {
  const std::string digest = config_digest(history.config);
  if (exists(history.run_id)) {
    const std::string stored = stored_config_digest(history.run_id);
    if (stored != digest) {
      throw ConfigMismatch("run " + history.run_id +
                           " was recorded under config digest " + stored +
                           ", current config digests to " + digest);
    }
    return;
  }
  Json j;
  j["format_version"] = kFormatVersion;
  j["run_id"] = history.run_id;
  j["task_id"] = history.task_id;
  j["config_digest"] = digest;
  j["dataset_digest"] = dataset_digest;
  j["task"] = to_json(task);
  j["config"] = to_json(history.config);
  write_atomic(run_dir(history.run_id) / "config.json", j.dump(2) + "\n");
}

void RunStore::append_iteration(const std::string& run_id,
                                const IterationRecord& record) {
  const fs::path path = run_dir(run_id) / "history.jsonl";
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to " + path.string());
  out << to_json(record).dump() << "\n";
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

void RunStore::write_final(const RunHistory& history, const TaskSpec& task) {
  if (!history.final_selection) {
    throw Error("write_final called before a selection exists");
  }
  const CandidateRecord* selected =
      history.find_candidate(*history.final_selection);
  if (!selected) {
    throw Error("final selection " + *history.final_selection +
                " is not in the history");
  }
  Json j;
  j["format_version"] = kFormatVersion;
  j["run_id"] = history.run_id;
  j["task_id"] = history.task_id;
  j["final_selection"] = *history.final_selection;
  j["text"] = selected->candidate.text;
  j["iteration"] = selected->candidate.iteration;
  j["source"] = to_string(selected->candidate.source);
  j["few_correct"] = selected->score.correct_count;
  j["few_n"] = selected->score.n_evaluated;
  j["similarity"] = selected->score.similarity;
  j["alpha_star"] = history.config.alpha_star;
  j["combined_alpha_star"] =
      combined_score(selected->score.accuracy(), selected->score.similarity,
                     history.config.alpha_star);
  j["original_prompt"] = task.original_prompt;
  write_atomic(run_dir(history.run_id) / "final.json", j.dump(2) + "\n");
}

void RunStore::write_eval(const std::string& run_id, const std::string& name,
                          const Json& evaluation) {
  const fs::path path = run_dir(run_id) / "eval.json";
  Json j = read_json_file(path).value_or(Json::object());
  j[name] = evaluation;
  write_atomic(path, j.dump(2) + "\n");
}

void RunStore::write_backend_stats(const std::string& run_id, const Json& stats) {
  write_atomic(run_dir(run_id) / "backend_stats.json", stats.dump(2) + "\n");
}

std::optional<RunHistory> RunStore::load(const std::string& run_id) const {
  const auto config = read_json_file(run_dir(run_id) / "config.json");
  if (!config) return std::nullopt;

  RunHistory history;
  history.run_id = config->at("run_id").get<std::string>();
  history.task_id = config->at("task_id").get<std::string>();
  history.config = run_config_from_json(config->at("config"));

  const fs::path hist_path = run_dir(run_id) / "history.jsonl";
  std::ifstream in(hist_path, std::ios::binary);
  if (in) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        history.iterations.push_back(
            iteration_record_from_json(Json::parse(line)));
      } catch (const Json::exception& e) {
        throw ParseError(e.what(), hist_path.string(), line_no);
      }
    }
  }

  if (const auto final_json = read_json_file(run_dir(run_id) / "final.json")) {
    history.final_selection = final_json->at("final_selection").get<std::string>();
  }
  return history;
}

std::optional<TaskSpec> RunStore::load_task(const std::string& run_id) const {
  const auto config = read_json_file(run_dir(run_id) / "config.json");
  if (!config) return std::nullopt;
  return task_spec_from_json(config->at("task"));
}

std::optional<Json> RunStore::load_final(const std::string& run_id) const {
  return read_json_file(run_dir(run_id) / "final.json");
}

std::optional<Json> RunStore::load_eval(const std::string& run_id) const {
  return read_json_file(run_dir(run_id) / "eval.json");
}

std::string RunStore::stored_config_digest(const std::string& run_id) const {
  const auto config = read_json_file(run_dir(run_id) / "config.json");
  if (!config) throw Error("run " + run_id + " has no config.json");
  return config->at("config_digest").get<std::string>();
}

std::vector<std::string> RunStore::list_runs() const {
  std::vector<std::string> out;
  if (!fs::exists(root_)) return out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (entry.is_directory() && fs::exists(entry.path() / "config.json")) {
      out.push_back(entry.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tpeval
