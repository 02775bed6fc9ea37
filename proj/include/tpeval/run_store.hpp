#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tpeval/domain.hpp"
#include "tpeval/json_codec.hpp"

namespace tpeval {

// Content-derived run identity: the same task, config and data always map to
// the same run directory, which is what makes resume-by-digest possible.
std::string make_run_id(const std::string& task_id,
                        const std::string& config_digest,
                        const std::string& dataset_digest);

// One directory per run under `root`:
//   <run_id>/config.json         task, config and identity digests
//   <run_id>/history.jsonl       one completed iteration per line, flushed
//                                as soon as the iteration finishes
//   <run_id>/final.json          selection result, present once finished
//   <run_id>/eval.json           named Test-split evaluations (optional)
//   <run_id>/backend_stats.json  backend call counters (optional)
// Writers use temp-file + rename; history.jsonl is append-only.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path run_dir(const std::string& run_id) const;
  bool exists(const std::string& run_id) const;

  // Creates the run directory and config.json. Idempotent for identical
  // content; throws ConfigMismatch if the stored digest differs.
  void init_run(const RunHistory& history, const TaskSpec& task,
                const std::string& dataset_digest);

  void append_iteration(const std::string& run_id, const IterationRecord& record);
  void write_final(const RunHistory& history, const TaskSpec& task);
  void write_eval(const std::string& run_id, const std::string& name,
                  const Json& evaluation);
  void write_backend_stats(const std::string& run_id, const Json& stats);

  // Reconstructs the run from disk; nullopt when the directory is absent.
  std::optional<RunHistory> load(const std::string& run_id) const;
  std::optional<TaskSpec> load_task(const std::string& run_id) const;
  std::optional<Json> load_final(const std::string& run_id) const;
  std::optional<Json> load_eval(const std::string& run_id) const;
  std::string stored_config_digest(const std::string& run_id) const;

  std::vector<std::string> list_runs() const;  // sorted run ids

 private:
  std::filesystem::path root_;
};

}  // namespace tpeval
