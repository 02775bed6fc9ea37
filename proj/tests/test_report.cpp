#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "test_util.hpp"
#include "tpeval/engine.hpp"
#include "tpeval/json_codec.hpp"
#include "tpeval/report.hpp"
#include "tpeval/run_store.hpp"

namespace {

using namespace tpeval;

TaskSpec make_task(const std::string& task_id, const std::string& category) {
  TaskSpec task;
  task.task_id = task_id;
  task.name = task_id;
  task.category = category;
  task.original_prompt = "Answer. {question}";
  task.option_labels = {"A", "B"};
  return task;
}

// Seeds one finished-looking run: config.json, a single iteration, and the
// named eval entries the report reads.
std::string seed_run(RunStore& store, const std::string& model_id,
                     const TaskSpec& task, int orig_correct, int opt_correct,
                     int n, std::optional<std::pair<int, int>> zero_shot = {},
                     bool with_eval = true) {
  RunConfig config;
  config.model_backend = model_id;
  RunHistory history;
  history.task_id = task.task_id;
  history.config = config;
  const std::string data_digest = "d-" + task.task_id;
  history.run_id =
      make_run_id(task.task_id, config_digest(config), data_digest);

  IterationRecord it0;
  it0.index = 0;
  CandidateRecord record;
  record.candidate = make_initial_candidate(task);
  record.score.candidate_id = record.candidate.candidate_id;
  record.score.correct_count = orig_correct;
  record.score.n_evaluated = n;
  record.score.similarity = 1.0;
  it0.candidates.push_back(record);
  history.iterations.push_back(it0);

  store.init_run(history, task, data_digest);
  store.append_iteration(history.run_id, it0);
  if (with_eval) {
    store.write_eval(history.run_id, "original",
                     Json{{"prompt_text", task.original_prompt},
                          {"correct", orig_correct},
                          {"n", n}});
    store.write_eval(history.run_id, "optimized",
                     Json{{"prompt_text", "better"},
                          {"correct", opt_correct},
                          {"n", n}});
    if (zero_shot) {
      store.write_eval(history.run_id, "zero_shot",
                       Json{{"prompt_text", "zs"},
                            {"correct", zero_shot->first},
                            {"n", zero_shot->second}});
    }
  }
  return history.run_id;
}

report::TaskRow make_row(int orig_correct, int orig_n, int opt_correct,
                         int opt_n) {
  report::TaskRow row;
  row.original_correct = orig_correct;
  row.original_n = orig_n;
  row.optimized_correct = opt_correct;
  row.optimized_n = opt_n;
  return row;
}

}  // namespace

TEST_CASE("improved() compares exact rationals, not rounded floats") {
  CHECK(!make_row(1, 2, 2, 4).improved());   // 1/2 == 2/4
  CHECK(make_row(1, 2, 3, 4).improved());
  CHECK(!make_row(1, 3, 333, 1000).improved());  // 0.333 < 1/3
  CHECK(make_row(1, 3, 334, 1000).improved());   // 0.334 > 1/3
  CHECK(!make_row(3, 4, 0, 0).improved());       // empty optimized split
  CHECK(make_row(0, 25, 1, 25).improved());
}

TEST_CASE("build_report aggregates rows, summaries and quotients") {
  test_util::TempDir tmp;
  RunStore store(tmp.path() / "runs");

  // model m1: five tasks, n=25 each
  seed_run(store, "m1", make_task("t1", "counting"), 13, 14, 25,
           std::pair<int, int>{10, 25});
  seed_run(store, "m1", make_task("t2", "counting"), 12, 13, 25);
  seed_run(store, "m1", make_task("t3", "ocr"), 13, 14, 25);
  seed_run(store, "m1", make_task("t4", "ocr"), 12, 12, 25);  // not improved
  seed_run(store, "m1", make_task("t5", "spatial"), 13, 15, 25);
  // model m0: one task, so model ordering is observable
  seed_run(store, "m0", make_task("t9", "counting"), 10, 20, 25);
  // a run with no eval.json must be excluded with a warning
  const std::string incomplete =
      seed_run(store, "m1", make_task("t6", "ocr"), 0, 0, 25, {}, false);

  const report::Report rep = report::build_report(store);

  REQUIRE(rep.rows.size() == 6);
  CHECK(rep.rows[0].model_id == "m0");  // sorted by (model, task)
  CHECK(rep.rows[0].task_id == "t9");
  for (size_t i = 2; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i - 1].task_id < rep.rows[i].task_id);
  }
  const auto& t1 = rep.rows[1];
  CHECK(t1.task_id == "t1");
  CHECK(t1.category == "counting");
  CHECK(t1.original_correct == 13);
  CHECK(t1.original_n == 25);
  CHECK(t1.optimized_correct == 14);
  REQUIRE(t1.zero_shot.has_value());
  CHECK(t1.zero_shot->first == 10);
  CHECK(!rep.rows[2].zero_shot.has_value());

  REQUIRE(rep.models.size() == 2);
  CHECK(rep.models[0].model_id == "m0");
  const auto& m1 = rep.models[1];
  CHECK(m1.model_id == "m1");
  CHECK(m1.total_tasks == 5);
  CHECK(m1.improved_tasks == 4);
  // means: orig (.52+.48+.52+.48+.52)/5 = .504; opt (.56+.52+.56+.48+.60)/5 = .544
  CHECK(m1.original_score == doctest::Approx(50.4).epsilon(1e-12));
  CHECK(m1.optimized_score == doctest::Approx(54.4).epsilon(1e-12));
  // ratio over improved tasks: 100 * (2.24 / 2.04 - 1)
  CHECK(m1.ratio_percent ==
        doctest::Approx(100.0 * (2.24 / 2.04 - 1.0)).epsilon(1e-12));

  // quotients per (model, category): mean optimized acc / mean original acc
  double counting = 0.0, ocr = 0.0, spatial = 0.0;
  int counting_tasks = 0;
  for (const auto& q : rep.categories) {
    if (q.model_id != "m1") continue;
    if (q.category == "counting") { counting = q.quotient; counting_tasks = q.task_count; }
    if (q.category == "ocr") ocr = q.quotient;
    if (q.category == "spatial") spatial = q.quotient;
  }
  CHECK(counting == doctest::Approx((0.56 + 0.52) / (0.52 + 0.48)).epsilon(1e-12));
  CHECK(counting_tasks == 2);
  CHECK(ocr == doctest::Approx((0.56 + 0.48) / (0.52 + 0.48)).epsilon(1e-12));
  CHECK(spatial == doctest::Approx(0.60 / 0.52).epsilon(1e-12));

  REQUIRE(rep.warnings.size() == 1);
  CHECK(rep.warnings[0].find(incomplete) != std::string::npos);
  CHECK(rep.warnings[0].find("no complete Test evaluation, excluded") !=
        std::string::npos);

  // pure function of the store: a rebuild renders byte-identically
  const report::Report again = report::build_report(store);
  CHECK(report::render_table(again) == report::render_table(rep));
  CHECK(report::render_task_tsv(again) == report::render_task_tsv(rep));
}

TEST_CASE("ratio and quotient guard division by zero") {
  test_util::TempDir tmp;
  RunStore store(tmp.path() / "runs");
  // improves from zero: improved_tasks = 1 but the ratio denominator is 0
  seed_run(store, "m1", make_task("t1", "counting"), 0, 14, 25);

  const report::Report rep = report::build_report(store);
  REQUIRE(rep.models.size() == 1);
  CHECK(rep.models[0].improved_tasks == 1);
  CHECK(rep.models[0].ratio_percent == 0.0);
  CHECK(rep.categories.empty());  // quotient skipped
  REQUIRE(rep.warnings.size() == 1);
  CHECK(rep.warnings[0].find("original accuracy 0, quotient skipped") !=
        std::string::npos);
}

TEST_CASE("render_table lays out rows, overall lines and the formula footer") {
  test_util::TempDir tmp;
  RunStore store(tmp.path() / "runs");
  seed_run(store, "m1", make_task("t1", "counting"), 13, 14, 25,
           std::pair<int, int>{10, 25});
  seed_run(store, "m1", make_task("t2", "ocr"), 12, 12, 25);

  const auto rep = report::build_report(store);
  const std::string table = report::render_table(rep);

  CHECK(table.find("Model: m1\n") != std::string::npos);
  // one row carries zero-shot, so the wide header is used
  CHECK(table.find("task | category | original | zero-shot | optimized | improved") !=
        std::string::npos);
  CHECK(table.find("t1 | counting | 52.0 | 40.0 | 56.0 | yes") != std::string::npos);
  CHECK(table.find("t2 | ocr | 48.0 | n/a | 48.0 | no") != std::string::npos);
  CHECK(table.find("improved tasks 1/2") != std::string::npos);
  CHECK(table.find("Category improvement quotients:") != std::string::npos);
  CHECK(table.find("m1 | counting | 1.077 | 1 task(s)") != std::string::npos);
  CHECK(table.find("ratio = (sum of optimized accuracy over improved tasks)") !=
        std::string::npos);

  // without any zero-shot evaluation the narrow header is used
  test_util::TempDir tmp2;
  RunStore store2(tmp2.path() / "runs");
  seed_run(store2, "m1", make_task("t1", "counting"), 13, 14, 25);
  const std::string narrow = report::render_table(report::build_report(store2));
  CHECK(narrow.find("task | category | original | optimized | improved") !=
        std::string::npos);
  CHECK(narrow.find("zero-shot") == std::string::npos);
}

TEST_CASE("TSV renders carry exact counts and n/a placeholders") {
  test_util::TempDir tmp;
  RunStore store(tmp.path() / "runs");
  seed_run(store, "m1", make_task("t1", "counting"), 13, 14, 25,
           std::pair<int, int>{10, 25});
  seed_run(store, "m1", make_task("t2", "ocr"), 12, 12, 25);
  const auto rep = report::build_report(store);

  const std::string tasks = report::render_task_tsv(rep);
  CHECK(tasks.find("model\ttask\tcategory\toriginal_correct\toriginal_n\t"
                   "original_acc\toptimized_correct\toptimized_n\toptimized_acc\t"
                   "zero_shot_correct\tzero_shot_n\tzero_shot_acc\timproved\n") == 0);
  CHECK(tasks.find("m1\tt1\tcounting\t13\t25\t0.520000\t14\t25\t0.560000\t10\t25\t"
                   "0.400000\t1\n") != std::string::npos);
  CHECK(tasks.find("m1\tt2\tocr\t12\t25\t0.480000\t12\t25\t0.480000\tn/a\tn/a\t"
                   "n/a\t0\n") != std::string::npos);

  const std::string models = report::render_model_tsv(rep);
  CHECK(models.find("model\ttasks\timproved\toriginal_score\toptimized_score\t"
                    "ratio_percent\n") == 0);
  CHECK(models.find("m1\t2\t1\t50.0\t52.0\t") != std::string::npos);

  const std::string categories = report::render_category_tsv(rep);
  CHECK(categories.find("model\tcategory\tquotient\ttasks\n") == 0);
  CHECK(categories.find("m1\tcounting\t1.077\t1\n") != std::string::npos);
}

TEST_CASE("cross renders show n/a for absent cells") {
  engine::CrossMatrix matrix;
  matrix.models = {"a", "b"};
  engine::CrossCell present;
  present.present = true;
  present.mean_accuracy = 0.8125;
  present.task_count = 2;
  matrix.cells["a"]["a"] = present;
  present.mean_accuracy = 0.25;
  matrix.cells["a"]["b"] = present;
  matrix.cells["b"]["a"] = {};
  matrix.cells["b"]["b"] = {};

  const std::string table = report::render_cross_table(matrix);
  CHECK(table.find("optimized-for \\ applied-to | a | b\n") == 0);
  CHECK(table.find("a | 0.8125 | 0.2500\n") != std::string::npos);
  CHECK(table.find("b | n/a | n/a\n") != std::string::npos);

  const std::string tsv = report::render_cross_tsv(matrix);
  CHECK(tsv.find("optimized_for\tapplied_to\tmean_test_accuracy\ttasks\n") == 0);
  CHECK(tsv.find("a\ta\t0.812500\t2\n") != std::string::npos);
  CHECK(tsv.find("b\tb\tn/a\t0\n") != std::string::npos);
}
