#pragma once

#include <map>
#include <string>
#include <vector>

#include "tpeval/backends.hpp"
#include "tpeval/domain.hpp"
#include "tpeval/run_store.hpp"

namespace tpeval::engine {

// Runs the full optimization loop for one task: iteration 0 scores the
// original prompt; each round r in 1..N builds a meta-prompt from the top-K
// history at α, proposes candidates under the decaying edit budget, scores
// them on the Few split and (when enabled) attaches introspection; the final
// selection re-ranks every history candidate at α*. Every completed
// iteration is flushed to the store before the next begins, so an aborted
// run resumes from its last complete iteration. A run that already exists
// in the store under the same config/data digests is continued, and a
// finished one is returned as-is. A round whose optimizer output never
// parses is recorded with zero candidates and the run continues.
RunHistory optimize(const TaskSpec& task, const std::vector<ExampleItem>& examples,
                    const RunConfig& config, BackendRegistry& registry,
                    RunStore& store);

// Explicit resume: the stored run must exist and its config and dataset
// digests must match the ones implied by the arguments (ConfigMismatch
// otherwise); then continues exactly like optimize.
RunHistory resume(const std::string& run_id, const TaskSpec& task,
                  const std::vector<ExampleItem>& examples,
                  const RunConfig& config, BackendRegistry& registry,
                  RunStore& store);

// argmax of combined_score(accuracy, similarity, alpha_star) over all
// scored candidates; ties break like select_top_k.
std::string finalize_selection(const RunHistory& history, double alpha_star);

// Scores one prompt text on the examples carrying `split`, through the same
// path as the optimization loop but without touching any history. The
// returned record's similarity field is left 0.
ScoreRecord evaluate(const TaskSpec& task, const std::vector<ExampleItem>& examples,
                     Split split, const std::string& prompt_text,
                     BackendRegistry& registry, const std::string& model_backend,
                     const std::string& analyzer_backend, int max_tokens = 512);

struct CrossCell {
  bool present = false;   // false when any needed run is missing
  double mean_accuracy = 0.0;
  int task_count = 0;
};

// (optimized-for model) x (applied-to model) grid of mean Test accuracies.
struct CrossMatrix {
  std::vector<std::string> models;
  // cells[optimized_for][applied_to]
  std::map<std::string, std::map<std::string, CrossCell>> cells;
};

// Applies each model's stored optimized prompts (final selections found in
// the store) to every model in `models`, averaging Test accuracy over the
// benchmark tasks. A cell stays absent unless the optimized-for model has a
// stored selection for every task.
CrossMatrix cross_apply(const std::vector<std::string>& models,
                        const std::vector<std::pair<TaskSpec, std::vector<ExampleItem>>>& benchmark,
                        BackendRegistry& registry, const RunStore& store,
                        const std::string& analyzer_backend, int max_tokens = 512);

// One prior successful optimization shown as an in-context example.
struct IclLibraryEntry {
  std::string task_id;
  std::string task_name;
  std::string original_prompt;
  std::string optimized_prompt;
  double improvement = 0.0;  // ordering key: higher first, ties by task_id
};

struct ZeroShotResult {
  std::vector<PromptCandidate> candidates;  // source = ZeroShotICL
  std::string meta_prompt_text;
};

// Rewrites a new task's prompt purely from prior (original -> optimized)
// pairs — no scoring loop and no labels. The library is ordered by
// descending improvement then task_id, so the meta-prompt is byte-stable.
ZeroShotResult zero_shot_optimize(const TaskSpec& task,
                                  std::vector<IclLibraryEntry> library,
                                  BackendRegistry& registry,
                                  const RunConfig& config);

}  // namespace tpeval::engine
