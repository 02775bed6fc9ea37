#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tpeval/engine.hpp"
#include "tpeval/run_store.hpp"

namespace tpeval::report {

// One task's Test-split accuracies under the original and the optimized
// prompt, plus the zero-shot rewrite when one was evaluated. Counts are
// kept exact; accuracies are derived at render time.
struct TaskRow {
  std::string model_id;
  std::string task_id;
  std::string category;
  int original_correct = 0;
  int original_n = 0;
  int optimized_correct = 0;
  int optimized_n = 0;
  std::optional<std::pair<int, int>> zero_shot;  // (correct, n)

  double original_accuracy() const;
  double optimized_accuracy() const;
  // Strict rational comparison: no float rounding decides improvement.
  bool improved() const;
};

struct ModelSummary {
  std::string model_id;
  int total_tasks = 0;
  int improved_tasks = 0;
  double original_score = 0.0;   // mean task accuracy x 100
  double optimized_score = 0.0;  // mean task accuracy x 100
  // (sum of optimized acc over improved tasks) /
  // (sum of original acc over improved tasks) - 1, in percent.
  // 0.0 when no task improved.
  double ratio_percent = 0.0;
};

struct CategoryQuotient {
  std::string model_id;
  std::string category;
  double quotient = 1.0;  // mean optimized acc / mean original acc
  int task_count = 0;
};

struct Report {
  std::vector<TaskRow> rows;              // sorted by (model_id, task_id)
  std::vector<ModelSummary> models;       // sorted by model_id
  std::vector<CategoryQuotient> categories;
  std::vector<std::string> warnings;      // excluded/incomplete runs
};

// Pure function of the run store: a run contributes a row iff its eval.json
// has both an "original" and an "optimized" entry; anything else is listed
// in warnings. Re-running over the same store is byte-identical.
Report build_report(const RunStore& store);

std::string render_table(const Report& report);  // human-readable, formula footer
std::string render_task_tsv(const Report& report);
std::string render_model_tsv(const Report& report);
std::string render_category_tsv(const Report& report);

std::string render_cross_table(const engine::CrossMatrix& matrix);
std::string render_cross_tsv(const engine::CrossMatrix& matrix);

}  // namespace tpeval::report
