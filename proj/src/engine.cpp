#include "tpeval/engine.hpp"

#include <algorithm>
#include <iostream>

#include "tpeval/digest.hpp"
#include "tpeval/errors.hpp"
#include "tpeval/optimizer.hpp"
#include "tpeval/prompts.hpp"
#include "tpeval/scorer.hpp"

namespace tpeval::engine {

namespace {

std::vector<ExampleItem> examples_in_split(const std::vector<ExampleItem>& all,
                                           Split split) {
  std::vector<ExampleItem> out;
  for (const auto& ex : all) {
    if (ex.split == split) out.push_back(ex);
  }
  return out;
}

CandidateRecord score_and_annotate(const TaskSpec& task,
                                   const PromptCandidate& candidate,
                                   const std::vector<ExampleItem>& few,
                                   BackendRegistry& registry,
                                   const RunConfig& config) {
  CandidateRecord record;
  record.candidate = candidate;
  record.score = scorer::score_candidate(task, candidate, few, registry,
                                         config.model_backend,
                                         config.analyzer_backend,
                                         config.max_tokens_model);
  record.score.similarity = scorer::semantic_similarity(
      candidate.text, task.original_prompt, registry, config.embedder_backend);
  if (config.introspection_enabled) {
    IntrospectionNote note = scorer::generate_introspection(
        task, candidate, record.score, few, registry, config.analyzer_backend,
        config.max_wrong_examples_in_introspection, config.max_tokens_model);
    if (!note.empty()) record.introspection = std::move(note);
  }
  return record;
}

}  // namespace

RunHistory optimize(const TaskSpec& task, const std::vector<ExampleItem>& examples,
                    const RunConfig& config, BackendRegistry& registry,
                    RunStore& store) {
  ValidateOptions opts;
  opts.require_few_split = true;
  if (const auto report = validate_task(task, examples, opts); !report.ok()) {
    throw ValidationError(report.violations);
  }
  const std::vector<ExampleItem> few = examples_in_split(examples, Split::Few);

  const std::string cfg_digest = config_digest(config);
  const std::string data_digest = dataset_digest(task, examples);
  const std::string run_id = make_run_id(task.task_id, cfg_digest, data_digest);

  RunHistory history;
  if (auto stored = store.load(run_id)) {
    history = std::move(*stored);
  } else {
    history.run_id = run_id;
    history.task_id = task.task_id;
  }
  history.config = config;
  store.init_run(history, task, data_digest);
  if (history.final_selection) return history;  // already finished

  if (history.iterations.empty()) {
    IterationRecord it0;
    it0.index = 0;
    it0.candidates.push_back(score_and_annotate(
        task, make_initial_candidate(task), few, registry, config));
    history.iterations.push_back(it0);
    store.append_iteration(run_id, it0);
  }

  const int budget_initial = optimizer::resolved_edit_budget_initial(config, task);
  const int first_round = history.iterations.back().index + 1;
  for (int round = first_round; round <= config.iterations; ++round) {
    const int counter = optimizer::edit_budget(
        round - 1, budget_initial, config.edit_budget_floor, config.iterations);
    const auto parts =
        optimizer::build_meta_prompt(task, history, few, round, counter, config);
    const std::string flat = parts.flatten();

    IterationRecord record;
    record.index = round;
    record.meta_prompt_digest = short_digest({flat});
    record.meta_prompt_text = flat;
    record.edit_counter = counter;
    record.reference_texts = parts.reference_texts;

    optimizer::ProposalResult proposals;
    try {
      proposals = optimizer::propose_candidates(task, history, parts, round,
                                                counter, registry, config);
    } catch (const MalformedOptimizerOutput& e) {
      std::cerr << "warning: round " << round << " of run " << run_id << ": "
                << e.what() << "\n";
      record.rejections.push_back({"", e.what()});
    }
    record.rejections.insert(record.rejections.end(),
                             proposals.rejections.begin(),
                             proposals.rejections.end());
    for (const auto& candidate : proposals.accepted) {
      record.candidates.push_back(
          score_and_annotate(task, candidate, few, registry, config));
    }

    history.iterations.push_back(record);
    store.append_iteration(run_id, record);
  }

  history.final_selection = finalize_selection(history, config.alpha_star);
  store.write_final(history, task);
  return history;
}

RunHistory resume(const std::string& run_id, const TaskSpec& task,
                  const std::vector<ExampleItem>& examples,
                  const RunConfig& config, BackendRegistry& registry,
                  RunStore& store) {
  if (!store.exists(run_id)) {
    throw Error("run " + run_id + " does not exist in " +
                store.root().string());
  }
  const std::string cfg_digest = config_digest(config);
  const std::string stored = store.stored_config_digest(run_id);
  if (stored != cfg_digest) {
    throw ConfigMismatch("run " + run_id + " was recorded under config digest " +
                         stored + ", current config digests to " + cfg_digest);
  }
  const std::string expected = make_run_id(
      task.task_id, cfg_digest, dataset_digest(task, examples));
  if (expected != run_id) {
    throw ConfigMismatch("run " + run_id +
                         " does not match the current task/data (expected " +
                         expected + "); the dataset has changed");
  }
  return optimize(task, examples, config, registry, store);
}

std::string finalize_selection(const RunHistory& history, double alpha_star) {
  const auto top = optimizer::select_top_k(history, 1, alpha_star);
  if (top.empty()) throw Error("no scored candidates to select from");
  return top.front().candidate.candidate_id;
}

ScoreRecord evaluate(const TaskSpec& task, const std::vector<ExampleItem>& examples,
                     Split split, const std::string& prompt_text,
                     BackendRegistry& registry, const std::string& model_backend,
                     const std::string& analyzer_backend, int max_tokens) {
  const std::vector<ExampleItem> subset = examples_in_split(examples, split);
  if (subset.empty()) {
    throw Error(std::string("empty split: no examples are tagged ") +
                to_string(split));
  }
  PromptCandidate probe;
  probe.candidate_id = make_candidate_id(task.task_id, -1, prompt_text);
  probe.text = prompt_text;
  return scorer::score_candidate(task, probe, subset, registry, model_backend,
                                 analyzer_backend, max_tokens);
}

CrossMatrix cross_apply(const std::vector<std::string>& models,
                        const std::vector<std::pair<TaskSpec, std::vector<ExampleItem>>>& benchmark,
                        BackendRegistry& registry, const RunStore& store,
                        const std::string& analyzer_backend, int max_tokens) {
  // model id -> task id -> stored optimized prompt
  std::map<std::string, std::map<std::string, std::string>> prompts;
  for (const auto& run_id : store.list_runs()) {
    const auto final_json = store.load_final(run_id);
    if (!final_json) continue;
    const auto full = store.load(run_id);
    if (!full) continue;
    prompts[full->config.model_backend][full->task_id] =
        final_json->at("text").get<std::string>();
  }

  CrossMatrix matrix;
  matrix.models = models;
  for (const auto& optimized_for : models) {
    for (const auto& applied_to : models) {
      CrossCell cell;
      double sum = 0.0;
      bool complete = true;
      for (const auto& [task, examples] : benchmark) {
        const auto by_task = prompts.find(optimized_for);
        if (by_task == prompts.end() ||
            !by_task->second.count(task.task_id)) {
          complete = false;
          break;
        }
        const ScoreRecord record =
            evaluate(task, examples, Split::Test, by_task->second.at(task.task_id),
                     registry, applied_to, analyzer_backend, max_tokens);
        sum += record.accuracy();
        ++cell.task_count;
      }
      if (complete && cell.task_count > 0) {
        cell.present = true;
        cell.mean_accuracy = sum / cell.task_count;
      } else {
        cell = CrossCell{};
      }
      matrix.cells[optimized_for][applied_to] = cell;
    }
  }
  return matrix;
}

ZeroShotResult zero_shot_optimize(const TaskSpec& task,
                                  std::vector<IclLibraryEntry> library,
                                  BackendRegistry& registry,
                                  const RunConfig& config) {
  if (library.empty()) {
    throw Error("zero-shot optimization needs at least one library entry");
  }
  std::sort(library.begin(), library.end(),
            [](const IclLibraryEntry& a, const IclLibraryEntry& b) {
              if (a.improvement != b.improvement) {
                return a.improvement > b.improvement;
              }
              return a.task_id < b.task_id;
            });

  std::string text = prompts::kIclHeader;
  for (const auto& entry : library) {
    text += "\n\nTask: " +
            (entry.task_name.empty() ? entry.task_id : entry.task_name);
    text += "\nOriginal prompt: " + entry.original_prompt;
    text += "\nOptimized prompt: " + entry.optimized_prompt;
  }
  text += "\n\nNew task: " + (task.name.empty() ? task.task_id : task.name);
  text += "\nOriginal prompt: " + task.original_prompt;
  text += "\n\nWrite " + std::to_string(config.zero_shot_candidates) +
          " rewritten prompt(s) for the new task, each wrapped in " +
          prompts::kPromptOpenTag + prompts::kPromptCloseTag +
          " tags, and output nothing else.";

  ZeroShotResult result;
  result.meta_prompt_text = text;
  const std::string digest = short_digest({text});

  bool any_tag_parsed = false;
  int attempts = 0;
  std::string request_text = text;
  while (attempts < 1 + config.proposal_retries &&
         static_cast<int>(result.candidates.size()) < config.zero_shot_candidates) {
    ++attempts;
    ChatRequest req;
    req.messages = {{Role::User, request_text, {}}};
    req.temperature = config.optimizer_temperature;
    req.max_tokens = config.max_tokens_optimizer;
    req.model_id = config.optimizer_backend;
    req.purpose = CallPurpose::ZeroShot;
    const ChatResponse resp = registry.chat(config.optimizer_backend, req);

    const auto texts = optimizer::parse_tagged_prompts(resp.text);
    any_tag_parsed = any_tag_parsed || !texts.empty();
    for (const auto& t : texts) {
      if (static_cast<int>(result.candidates.size()) >=
          config.zero_shot_candidates) {
        break;
      }
      if (normalize_whitespace(t).empty()) continue;
      PromptCandidate c;
      c.candidate_id = make_candidate_id(task.task_id, 0, t);
      c.text = t;
      c.iteration = 0;
      c.source = CandidateSource::ZeroShotICL;
      c.meta_prompt_digest = digest;
      result.candidates.push_back(std::move(c));
    }
    if (static_cast<int>(result.candidates.size()) <
        config.zero_shot_candidates) {
      request_text = text + "\n\nNotice: your reply contained no usable " +
                     prompts::kPromptOpenTag + prompts::kPromptCloseTag +
                     " tags. Follow the output format exactly.";
    }
  }
  if (result.candidates.empty()) {
    throw MalformedOptimizerOutput(
        "optimizer produced no usable rewritten prompt after " +
        std::to_string(attempts) + " attempt(s)");
  }
  return result;
}

}  // namespace tpeval::engine
