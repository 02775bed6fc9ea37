// Command-line front end: optimize | report | cross | zero-shot.
// Exit codes: 0 success, 1 validation failure, 2 backend failure,
// 3 configuration error.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "tpeval/app_config.hpp"
#include "tpeval/data.hpp"
#include "tpeval/engine.hpp"
#include "tpeval/errors.hpp"
#include "tpeval/report.hpp"
#include "tpeval/run_store.hpp"

namespace {

using namespace tpeval;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitBackend = 2;
constexpr int kExitConfig = 3;

struct CommonArgs {
  std::string benchmark;
  std::string config;
  std::string out = "out";
  std::string tasks = "all";
  // Per-flag overrides of the config file's run section.
  std::optional<std::string> model, optimizer, analyzer, embedder;
  std::optional<double> alpha, alpha_star;
  std::optional<uint64_t> seed;
  bool no_introspection = false;
};

void add_run_override_flags(CLI::App* cmd, CommonArgs& args,
                            bool with_model = true) {
  if (with_model) {
    cmd->add_option("--model", args.model, "Model-under-test backend id");
  }
  cmd->add_option("--optimizer", args.optimizer, "Optimizer backend id");
  cmd->add_option("--analyzer", args.analyzer, "Answer-analyzer backend id");
  cmd->add_option("--embedder", args.embedder, "Embedding backend id");
  cmd->add_option("--alpha", args.alpha,
                  "Accuracy weight during optimization (0..1)");
  cmd->add_option("--alpha-star", args.alpha_star,
                  "Accuracy weight at final re-ranking (0..1)");
  cmd->add_option("--seed", args.seed, "Run seed (splits, synthetic data)");
  cmd->add_flag("--no-introspection", args.no_introspection,
                "Disable analyzer introspection of wrong answers");
}

app::AppConfig load_config(const std::string& path) {
  try {
    return app::load_app_config(path);
  } catch (const ParseError& e) {
    // a broken config file is a configuration error, not a data error
    throw ConfigError(e.what());
  }
}

void apply_overrides(RunConfig& run, const CommonArgs& args) {
  if (args.model) run.model_backend = *args.model;
  if (args.optimizer) run.optimizer_backend = *args.optimizer;
  if (args.analyzer) run.analyzer_backend = *args.analyzer;
  if (args.embedder) run.embedder_backend = *args.embedder;
  if (args.alpha) run.alpha = *args.alpha;
  if (args.alpha_star) run.alpha_star = *args.alpha_star;
  if (args.seed) run.seed = *args.seed;
  if (args.no_introspection) run.introspection_enabled = false;
}

data::LoadedBenchmark load_and_split(const CommonArgs& args,
                                     const app::AppConfig& config) {
  data::LoadOptions opts;
  opts.strict_images = config.strict_images;
  data::LoadedBenchmark bench = data::load_benchmark(args.benchmark, opts);
  for (const auto& w : bench.warnings) std::cerr << "warning: " << w << "\n";
  for (auto& [task, examples] : bench.tasks) {
    data::assign_splits(examples, config.split_policy,
                        data::derive_split_seed(config.run.seed, task.task_id));
  }
  return bench;
}

std::vector<size_t> select_tasks(const data::LoadedBenchmark& bench,
                                 const std::string& tasks_arg) {
  std::vector<size_t> selected;
  if (tasks_arg == "all" || tasks_arg.empty()) {
    for (size_t i = 0; i < bench.tasks.size(); ++i) selected.push_back(i);
    return selected;
  }
  std::set<std::string> wanted;
  size_t pos = 0;
  while (pos <= tasks_arg.size()) {
    const size_t comma = tasks_arg.find(',', pos);
    const std::string id =
        tasks_arg.substr(pos, comma == std::string::npos ? std::string::npos
                                                         : comma - pos);
    if (!id.empty()) wanted.insert(id);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  for (size_t i = 0; i < bench.tasks.size(); ++i) {
    if (wanted.erase(bench.tasks[i].first.task_id)) selected.push_back(i);
  }
  if (!wanted.empty()) {
    std::vector<std::string> missing(wanted.begin(), wanted.end());
    std::string msg = "unknown task id(s):";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError({msg});
  }
  return selected;
}

std::shared_ptr<ResponseCache> make_cache(const CommonArgs& args,
                                          const app::AppConfig& config) {
  if (config.cache_dir.empty()) return nullptr;
  return std::make_shared<ResponseCache>(std::filesystem::path(args.out) /
                                         config.cache_dir);
}

void write_eval_entry(RunStore& store, const std::string& run_id,
                      const std::string& name, const std::string& prompt_text,
                      const ScoreRecord& record) {
  Json entry;
  entry["prompt_text"] = prompt_text;
  entry["correct"] = record.correct_count;
  entry["n"] = record.n_evaluated;
  store.write_eval(run_id, name, entry);
}

// --- optimize ---------------------------------------------------------

int cmd_optimize(const CommonArgs& args, const std::string& resume_run_id,
                 bool evaluate_after) {
  const app::AppConfig config = load_config(args.config);
  RunConfig run_config = config.run;
  apply_overrides(run_config, args);

  const data::LoadedBenchmark bench = load_and_split(args, config);
  RunStore store(std::filesystem::path(args.out) / "runs");
  const auto cache = make_cache(args, config);

  std::vector<size_t> selected;
  if (!resume_run_id.empty()) {
    const auto stored = store.load(resume_run_id);
    if (!stored) {
      throw ConfigMismatch("run " + resume_run_id + " not found under " +
                           store.root().string());
    }
    for (size_t i = 0; i < bench.tasks.size(); ++i) {
      if (bench.tasks[i].first.task_id == stored->task_id) selected.push_back(i);
    }
    if (selected.empty()) {
      throw ValidationError({"run " + resume_run_id + " is for task '" +
                             stored->task_id +
                             "', which is not in this benchmark"});
    }
  } else {
    selected = select_tasks(bench, args.tasks);
  }

  bool validation_failed = false;
  bool backend_failed = false;
  for (const size_t index : selected) {
    const auto& [task, examples] = bench.tasks[index];
    try {
      BackendRegistry registry(cache);
      app::register_backends(registry, config, task.task_id, bench.tasks);

      RunHistory history =
          resume_run_id.empty()
              ? engine::optimize(task, examples, run_config, registry, store)
              : engine::resume(resume_run_id, task, examples, run_config,
                               registry, store);

      const CandidateRecord* selected_candidate =
          history.find_candidate(*history.final_selection);
      const CandidateRecord& initial = history.iterations.front().candidates.front();
      std::printf(
          "task %s: run %s, original_few_acc %.4f, selected_combined %.4f, "
          "prompt \"%s\"\n",
          task.task_id.c_str(), history.run_id.c_str(),
          initial.score.accuracy(),
          combined_score(selected_candidate->score.accuracy(),
                         selected_candidate->score.similarity,
                         run_config.alpha_star),
          selected_candidate->candidate.text.c_str());

      if (evaluate_after) {
        const ScoreRecord original = engine::evaluate(
            task, examples, Split::Test, task.original_prompt, registry,
            run_config.model_backend, run_config.analyzer_backend,
            run_config.max_tokens_model);
        const ScoreRecord optimized = engine::evaluate(
            task, examples, Split::Test, selected_candidate->candidate.text,
            registry, run_config.model_backend, run_config.analyzer_backend,
            run_config.max_tokens_model);
        write_eval_entry(store, history.run_id, "original",
                         task.original_prompt, original);
        write_eval_entry(store, history.run_id, "optimized",
                         selected_candidate->candidate.text, optimized);
        std::printf("task %s: test original %.4f -> optimized %.4f\n",
                    task.task_id.c_str(), original.accuracy(),
                    optimized.accuracy());
      }
      store.write_backend_stats(history.run_id, registry.stats_json());
    } catch (const ValidationError& e) {
      std::cerr << "task " << task.task_id << " failed validation:\n"
                << e.what() << "\n";
      validation_failed = true;
    } catch (const ConfigMismatch&) {
      throw;  // config identity problems abort the whole invocation
    } catch (const Error& e) {
      std::cerr << "task " << task.task_id << " failed: " << e.what() << "\n";
      backend_failed = true;
    }
  }
  if (validation_failed) return kExitValidation;
  if (backend_failed) return kExitBackend;
  return kExitOk;
}

// --- report -----------------------------------------------------------

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

int cmd_report(const std::string& out_dir) {
  RunStore store(std::filesystem::path(out_dir) / "runs");
  const report::Report rep = report::build_report(store);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";

  const std::string table = report::render_table(rep);
  std::fputs(table.c_str(), stdout);

  const std::filesystem::path dir = std::filesystem::path(out_dir) / "report";
  write_text_file(dir / "report.txt", table);
  write_text_file(dir / "tasks.tsv", report::render_task_tsv(rep));
  write_text_file(dir / "models.tsv", report::render_model_tsv(rep));
  write_text_file(dir / "categories.tsv", report::render_category_tsv(rep));
  return kExitOk;
}

// --- cross ------------------------------------------------------------

int cmd_cross(const CommonArgs& args, std::vector<std::string> models) {
  const app::AppConfig config = load_config(args.config);
  RunConfig run_config = config.run;
  apply_overrides(run_config, args);

  const data::LoadedBenchmark bench = load_and_split(args, config);
  RunStore store(std::filesystem::path(args.out) / "runs");
  const auto cache = make_cache(args, config);

  if (models.empty()) {
    std::set<std::string> seen;
    for (const auto& run_id : store.list_runs()) {
      if (const auto history = store.load(run_id)) {
        seen.insert(history->config.model_backend);
      }
    }
    models.assign(seen.begin(), seen.end());
  }
  if (models.empty()) {
    throw ValidationError({"no models: the run store is empty and no --model "
                           "flags were given"});
  }

  BackendRegistry registry(cache);
  app::register_backends(registry, config, "", bench.tasks);

  const engine::CrossMatrix matrix =
      engine::cross_apply(models, bench.tasks, registry, store,
                          run_config.analyzer_backend,
                          run_config.max_tokens_model);

  const std::string table = report::render_cross_table(matrix);
  std::fputs(table.c_str(), stdout);
  const std::filesystem::path dir = std::filesystem::path(args.out) / "report";
  write_text_file(dir / "cross.txt", table);
  write_text_file(dir / "cross.tsv", report::render_cross_tsv(matrix));
  return kExitOk;
}

// --- zero-shot --------------------------------------------------------

std::vector<engine::IclLibraryEntry> build_icl_library(
    const RunStore& store, const std::set<std::string>& excluded) {
  std::vector<engine::IclLibraryEntry> library;
  for (const auto& run_id : store.list_runs()) {
    const auto final_json = store.load_final(run_id);
    const auto task = store.load_task(run_id);
    if (!final_json || !task || excluded.count(task->task_id)) continue;
    engine::IclLibraryEntry entry;
    entry.task_id = task->task_id;
    entry.task_name = task->name;
    entry.original_prompt = task->original_prompt;
    entry.optimized_prompt = final_json->at("text").get<std::string>();
    if (const auto eval = store.load_eval(run_id);
        eval && eval->contains("original") && eval->contains("optimized")) {
      const double orig = eval->at("original").at("correct").get<double>() /
                          eval->at("original").at("n").get<double>();
      const double opt = eval->at("optimized").at("correct").get<double>() /
                         eval->at("optimized").at("n").get<double>();
      entry.improvement = opt - orig;
    }
    library.push_back(std::move(entry));
  }
  return library;
}

int cmd_zero_shot(const CommonArgs& args,
                  const std::vector<std::string>& exclude_tasks,
                  bool evaluate_after) {
  const app::AppConfig config = load_config(args.config);
  RunConfig run_config = config.run;
  apply_overrides(run_config, args);

  const data::LoadedBenchmark bench = load_and_split(args, config);
  RunStore store(std::filesystem::path(args.out) / "runs");
  const auto cache = make_cache(args, config);
  const std::vector<size_t> selected = select_tasks(bench, args.tasks);

  for (const size_t index : selected) {
    const auto& [task, examples] = bench.tasks[index];

    std::set<std::string> excluded(exclude_tasks.begin(), exclude_tasks.end());
    excluded.insert(task.task_id);  // the target is always held out
    const auto library = build_icl_library(store, excluded);
    if (library.empty()) {
      throw ValidationError({"zero-shot rewriting of '" + task.task_id +
                             "' needs at least one prior optimized run in " +
                             store.root().string()});
    }

    BackendRegistry registry(cache);
    app::register_backends(registry, config, task.task_id, bench.tasks);
    const engine::ZeroShotResult result =
        engine::zero_shot_optimize(task, library, registry, run_config);
    const PromptCandidate& candidate = result.candidates.front();
    std::printf("task %s: zero-shot prompt \"%s\"\n", task.task_id.c_str(),
                candidate.text.c_str());

    Json out_json;
    out_json["task_id"] = task.task_id;
    out_json["library_size"] = library.size();
    out_json["meta_prompt"] = result.meta_prompt_text;
    Json texts = Json::array();
    for (const auto& c : result.candidates) texts.push_back(c.text);
    out_json["prompts"] = texts;

    if (evaluate_after) {
      const ScoreRecord record = engine::evaluate(
          task, examples, Split::Test, candidate.text, registry,
          run_config.model_backend, run_config.analyzer_backend,
          run_config.max_tokens_model);
      out_json["test_correct"] = record.correct_count;
      out_json["test_n"] = record.n_evaluated;
      std::printf("task %s: zero-shot test accuracy %.4f\n",
                  task.task_id.c_str(), record.accuracy());

      // attach to the task's few-shot run (if one exists) so reports can
      // show original / zero-shot / optimized side by side
      const std::string run_id =
          make_run_id(task.task_id, config_digest(run_config),
                      dataset_digest(task, examples));
      if (store.exists(run_id)) {
        Json entry;
        entry["prompt_text"] = candidate.text;
        entry["correct"] = record.correct_count;
        entry["n"] = record.n_evaluated;
        store.write_eval(run_id, "zero_shot", entry);
      }
    }
    write_text_file(std::filesystem::path(args.out) / "zero_shot" /
                        (task.task_id + ".json"),
                    out_json.dump(2) + "\n");
  }
  return kExitOk;
}

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBackend;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-model prompt customization: optimizer-scorer loop over "
               "pluggable model backends"};
  app.require_subcommand(1);

  CommonArgs opt_args;
  std::string resume_run_id;
  bool opt_evaluate = false;
  CLI::App* optimize = app.add_subcommand(
      "optimize", "Run the optimization loop for benchmark tasks");
  optimize->add_option("--benchmark", opt_args.benchmark, "Benchmark directory")
      ->required();
  optimize->add_option("--config", opt_args.config, "Runtime config JSON")
      ->required();
  optimize->add_option("--tasks", opt_args.tasks,
                       "Comma-separated task ids, or 'all'");
  optimize->add_option("--out", opt_args.out, "Output directory");
  optimize->add_option("--resume", resume_run_id, "Continue a stored run id");
  optimize->add_flag("--evaluate", opt_evaluate,
                     "Also evaluate original and selected prompts on Test");
  add_run_override_flags(optimize, opt_args);

  std::string report_out = "out";
  CLI::App* report_cmd =
      app.add_subcommand("report", "Summarize completed runs");
  report_cmd->add_option("--out", report_out,
                         "Output directory holding runs/");

  CommonArgs cross_args;
  std::vector<std::string> cross_models;
  CLI::App* cross = app.add_subcommand(
      "cross", "Apply each model's optimized prompts to every other model");
  cross->add_option("--benchmark", cross_args.benchmark, "Benchmark directory")
      ->required();
  cross->add_option("--config", cross_args.config, "Runtime config JSON")
      ->required();
  cross->add_option("--out", cross_args.out, "Output directory");
  cross->add_option("--model", cross_models,
                    "Model backend id to include (repeatable; default: all "
                    "models found in the run store)");
  add_run_override_flags(cross, cross_args, /*with_model=*/false);

  CommonArgs zs_args;
  std::vector<std::string> zs_exclude;
  bool zs_evaluate = false;
  CLI::App* zero_shot = app.add_subcommand(
      "zero-shot", "Rewrite a task's prompt from prior optimizations only");
  zero_shot->add_option("--benchmark", zs_args.benchmark, "Benchmark directory")
      ->required();
  zero_shot->add_option("--config", zs_args.config, "Runtime config JSON")
      ->required();
  zero_shot->add_option("--tasks", zs_args.tasks,
                        "Comma-separated task ids, or 'all'");
  zero_shot->add_option("--out", zs_args.out, "Output directory");
  zero_shot->add_option("--exclude-task", zs_exclude,
                        "Drop this task from the ICL library (repeatable)");
  zero_shot->add_flag("--evaluate", zs_evaluate,
                      "Evaluate the rewritten prompt on the Test split");
  add_run_override_flags(zero_shot, zs_args);

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(optimize)) {
    return guarded([&] { return cmd_optimize(opt_args, resume_run_id, opt_evaluate); });
  }
  if (app.got_subcommand(report_cmd)) {
    return guarded([&] { return cmd_report(report_out); });
  }
  if (app.got_subcommand(cross)) {
    return guarded([&] { return cmd_cross(cross_args, cross_models); });
  }
  return guarded([&] { return cmd_zero_shot(zs_args, zs_exclude, zs_evaluate); });
}
