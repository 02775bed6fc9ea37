#include "tpeval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace tpeval::report {

namespace {

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

double ratio(int correct, int n) {
  return n == 0 ? 0.0 : static_cast<double>(correct) / n;
}

}  // namespace

double TaskRow::original_accuracy() const {
  return ratio(original_correct, original_n);
}

double TaskRow::optimized_accuracy() const {
  return ratio(optimized_correct, optimized_n);
}

bool TaskRow::improved() const {
  return static_cast<long>(optimized_correct) * original_n >
         static_cast<long>(original_correct) * optimized_n;
}

Report build_report(const RunStore& store) {
  Report report;

  for (const auto& run_id : store.list_runs()) {
    const auto history = store.load(run_id);
    const auto task = store.load_task(run_id);
    const auto eval = store.load_eval(run_id);
    if (!history || !task) {
      report.warnings.push_back("run " + run_id + ": unreadable, excluded");
      continue;
    }
    if (!eval || !eval->contains("original") || !eval->contains("optimized")) {
      report.warnings.push_back("run " + run_id +
                                ": no complete Test evaluation, excluded");
      continue;
    }
    TaskRow row;
    row.model_id = history->config.model_backend;
    row.task_id = history->task_id;
    row.category = task->category;
    row.original_correct = eval->at("original").at("correct").get<int>();
    row.original_n = eval->at("original").at("n").get<int>();
    row.optimized_correct = eval->at("optimized").at("correct").get<int>();
    row.optimized_n = eval->at("optimized").at("n").get<int>();
    if (eval->contains("zero_shot")) {
      row.zero_shot = {eval->at("zero_shot").at("correct").get<int>(),
                       eval->at("zero_shot").at("n").get<int>()};
    }
    report.rows.push_back(std::move(row));
  }

  std::sort(report.rows.begin(), report.rows.end(),
            [](const TaskRow& a, const TaskRow& b) {
              return std::tie(a.model_id, a.task_id) <
                     std::tie(b.model_id, b.task_id);
            });

  std::map<std::string, std::vector<const TaskRow*>> by_model;
  for (const auto& row : report.rows) by_model[row.model_id].push_back(&row);

  for (const auto& [model_id, rows] : by_model) {
    ModelSummary summary;
    summary.model_id = model_id;
    summary.total_tasks = static_cast<int>(rows.size());
    double orig_sum = 0.0, opt_sum = 0.0;
    double improved_orig_sum = 0.0, improved_opt_sum = 0.0;
    for (const auto* row : rows) {
      orig_sum += row->original_accuracy();
      opt_sum += row->optimized_accuracy();
      if (row->improved()) {
        ++summary.improved_tasks;
        improved_orig_sum += row->original_accuracy();
        improved_opt_sum += row->optimized_accuracy();
      }
    }
    summary.original_score = 100.0 * orig_sum / summary.total_tasks;
    summary.optimized_score = 100.0 * opt_sum / summary.total_tasks;
    summary.ratio_percent =
        summary.improved_tasks == 0 || improved_orig_sum == 0.0
            ? 0.0
            : 100.0 * (improved_opt_sum / improved_orig_sum - 1.0);
    report.models.push_back(summary);

    std::map<std::string, std::vector<const TaskRow*>> by_category;
    for (const auto* row : rows) by_category[row->category].push_back(row);
    for (const auto& [category, cat_rows] : by_category) {
      double orig = 0.0, opt = 0.0;
      for (const auto* row : cat_rows) {
        orig += row->original_accuracy();
        opt += row->optimized_accuracy();
      }
      if (orig == 0.0) {
        report.warnings.push_back("model " + model_id + " category '" +
                                  category +
                                  "': original accuracy 0, quotient skipped");
        continue;
      }
      CategoryQuotient q;
      q.model_id = model_id;
      q.category = category;
      q.quotient = opt / orig;
      q.task_count = static_cast<int>(cat_rows.size());
      report.categories.push_back(q);
    }
  }
  return report;
}

std::string render_table(const Report& report) {
  const bool any_zero_shot =
      std::any_of(report.rows.begin(), report.rows.end(),
                  [](const TaskRow& r) { return r.zero_shot.has_value(); });

  std::string out;
  for (const auto& summary : report.models) {
    out += "Model: " + summary.model_id + "\n";
    out += any_zero_shot
               ? "  task | category | original | zero-shot | optimized | improved\n"
               : "  task | category | original | optimized | improved\n";
    for (const auto& row : report.rows) {
      if (row.model_id != summary.model_id) continue;
      out += "  " + row.task_id + " | " + row.category + " | " +
             format_fixed(100.0 * row.original_accuracy(), 1);
      if (any_zero_shot) {
        out += " | " + (row.zero_shot
                            ? format_fixed(100.0 * ratio(row.zero_shot->first,
                                                         row.zero_shot->second),
                                           1)
                            : std::string("n/a"));
      }
      out += " | " + format_fixed(100.0 * row.optimized_accuracy(), 1);
      out += std::string(" | ") + (row.improved() ? "yes" : "no") + "\n";
    }
    out += "  overall: original " + format_fixed(summary.original_score, 1) +
           ", optimized " + format_fixed(summary.optimized_score, 1) +
           ", improved tasks " + std::to_string(summary.improved_tasks) + "/" +
           std::to_string(summary.total_tasks) + ", ratio " +
           format_fixed(summary.ratio_percent, 1) + "%\n";
  }

  if (!report.categories.empty()) {
    out += "Category improvement quotients:\n";
    for (const auto& q : report.categories) {
      out += "  " + q.model_id + " | " + q.category + " | " +
             format_fixed(q.quotient, 3) + " | " + std::to_string(q.task_count) +
             " task(s)\n";
    }
  }
  for (const auto& w : report.warnings) out += "warning: " + w + "\n";
  out +=
      "ratio = (sum of optimized accuracy over improved tasks) / "
      "(sum of original accuracy over improved tasks) - 1; 0.0% when no task "
      "improved.\n";
  return out;
}

std::string render_task_tsv(const Report& report) {
  std::string out =
      "model\ttask\tcategory\toriginal_correct\toriginal_n\toriginal_acc\t"
      "optimized_correct\toptimized_n\toptimized_acc\tzero_shot_correct\t"
      "zero_shot_n\tzero_shot_acc\timproved\n";
  for (const auto& row : report.rows) {
    out += row.model_id + "\t" + row.task_id + "\t" + row.category + "\t" +
           std::to_string(row.original_correct) + "\t" +
           std::to_string(row.original_n) + "\t" +
           format_fixed(row.original_accuracy(), 6) + "\t" +
           std::to_string(row.optimized_correct) + "\t" +
           std::to_string(row.optimized_n) + "\t" +
           format_fixed(row.optimized_accuracy(), 6) + "\t";
    if (row.zero_shot) {
      out += std::to_string(row.zero_shot->first) + "\t" +
             std::to_string(row.zero_shot->second) + "\t" +
             format_fixed(ratio(row.zero_shot->first, row.zero_shot->second), 6);
    } else {
      out += "n/a\tn/a\tn/a";
    }
    out += std::string("\t") + (row.improved() ? "1" : "0") + "\n";
  }
  return out;
}

std::string render_model_tsv(const Report& report) {
  std::string out =
      "model\ttasks\timproved\toriginal_score\toptimized_score\tratio_percent\n";
  for (const auto& s : report.models) {
    out += s.model_id + "\t" + std::to_string(s.total_tasks) + "\t" +
           std::to_string(s.improved_tasks) + "\t" +
           format_fixed(s.original_score, 1) + "\t" +
           format_fixed(s.optimized_score, 1) + "\t" +
           format_fixed(s.ratio_percent, 1) + "\n";
  }
  return out;
}

std::string render_category_tsv(const Report& report) {
  std::string out = "model\tcategory\tquotient\ttasks\n";
  for (const auto& q : report.categories) {
    out += q.model_id + "\t" + q.category + "\t" + format_fixed(q.quotient, 3) +
           "\t" + std::to_string(q.task_count) + "\n";
  }
  return out;
}

std::string render_cross_table(const engine::CrossMatrix& matrix) {
  std::string out = "optimized-for \\ applied-to";
  for (const auto& m : matrix.models) out += " | " + m;
  out += "\n";
  for (const auto& row : matrix.models) {
    out += row;
    for (const auto& col : matrix.models) {
      const auto& cell = matrix.cells.at(row).at(col);
      out += " | " + (cell.present ? format_fixed(cell.mean_accuracy, 4)
                                   : std::string("n/a"));
    }
    out += "\n";
  }
  return out;
}

std::string render_cross_tsv(const engine::CrossMatrix& matrix) {
  std::string out = "optimized_for\tapplied_to\tmean_test_accuracy\ttasks\n";
  for (const auto& row : matrix.models) {
    for (const auto& col : matrix.models) {
      const auto& cell = matrix.cells.at(row).at(col);
      out += row + "\t" + col + "\t" +
             (cell.present ? format_fixed(cell.mean_accuracy, 6)
                           : std::string("n/a")) +
             "\t" + std::to_string(cell.task_count) + "\n";
    }
  }
  return out;
}

}  // namespace tpeval::report
