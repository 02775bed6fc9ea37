#include "tpeval/json_codec.hpp"

#include "tpeval/digest.hpp"

namespace tpeval {

Json to_json(const TaskSpec& v) {
  Json j;
  j["task_id"] = v.task_id;
  j["name"] = v.name;
  j["category"] = v.category;
  j["prompt_mode"] = to_string(v.prompt_mode);
  j["original_prompt"] = v.original_prompt;
  j["question_slot"] = v.question_slot;
  j["option_labels"] = v.option_labels;
  return j;
}

TaskSpec task_spec_from_json(const Json& j) {
  TaskSpec v;
  v.task_id = j.at("task_id").get<std::string>();
  v.name = j.at("name").get<std::string>();
  v.category = j.value("category", std::string{});
  v.prompt_mode = prompt_mode_from_string(j.at("prompt_mode").get<std::string>());
  v.original_prompt = j.at("original_prompt").get<std::string>();
  v.question_slot = j.value("question_slot", std::string{"question"});
  v.option_labels = j.value("option_labels", std::vector<std::string>{});
  return v;
}

Json to_json(const ExampleItem& v) {
  Json j;
  j["example_id"] = v.example_id;
  j["question"] = v.question;
  j["image_refs"] = v.image_refs;
  Json opts = Json::object();
  for (const auto& [label, text] : v.options) opts[label] = text;
  j["options"] = opts;
  j["ground_truth"] = v.ground_truth;
  if (v.split != Split::Unassigned) j["split"] = to_string(v.split);
  return j;
}

ExampleItem example_item_from_json(const Json& j) {
  ExampleItem v;
  v.example_id = j.at("example_id").get<std::string>();
  v.question = j.value("question", std::string{});
  v.image_refs = j.value("image_refs", std::vector<std::string>{});
  if (j.contains("options")) {
    for (const auto& [label, text] : j.at("options").items()) {
      v.options.emplace_back(label, text.get<std::string>());
    }
  }
  v.ground_truth = j.at("ground_truth").get<std::string>();
  if (j.contains("split")) {
    v.split = split_from_string(j.at("split").get<std::string>());
  }
  return v;
}

Json to_json(const PromptCandidate& v) {
  Json j;
  j["candidate_id"] = v.candidate_id;
  j["text"] = v.text;
  j["iteration"] = v.iteration;
  j["source"] = to_string(v.source);
  j["meta_prompt_digest"] = v.meta_prompt_digest;
  return j;
}

PromptCandidate prompt_candidate_from_json(const Json& j) {
  PromptCandidate v;
  v.candidate_id = j.at("candidate_id").get<std::string>();
  v.text = j.at("text").get<std::string>();
  v.iteration = j.at("iteration").get<int>();
  v.source = candidate_source_from_string(j.at("source").get<std::string>());
  v.meta_prompt_digest = j.value("meta_prompt_digest", std::string{});
  return v;
}

Json to_json(const ExampleOutcome& v) {
  Json j;
  j["extracted_label"] = v.extracted_label;
  j["correct"] = v.correct;
  j["response_digest"] = v.response_digest;
  return j;
}

ExampleOutcome example_outcome_from_json(const Json& j) {
  ExampleOutcome v;
  v.extracted_label = j.at("extracted_label").get<std::string>();
  v.correct = j.at("correct").get<bool>();
  v.response_digest = j.value("response_digest", std::string{});
  return v;
}

Json to_json(const ScoreRecord& v) {
  Json j;
  j["candidate_id"] = v.candidate_id;
  j["correct_count"] = v.correct_count;
  j["n_evaluated"] = v.n_evaluated;
  j["similarity"] = v.similarity;
  Json outcomes = Json::object();
  for (const auto& [id, o] : v.outcomes) outcomes[id] = to_json(o);
  j["outcomes"] = outcomes;
  return j;
}

ScoreRecord score_record_from_json(const Json& j) {
  ScoreRecord v;
  v.candidate_id = j.at("candidate_id").get<std::string>();
  v.correct_count = j.at("correct_count").get<int>();
  v.n_evaluated = j.at("n_evaluated").get<int>();
  v.similarity = j.at("similarity").get<double>();
  if (j.contains("outcomes")) {
    for (const auto& [id, o] : j.at("outcomes").items()) {
      v.outcomes[id] = example_outcome_from_json(o);
    }
  }
  return v;
}

Json to_json(const IntrospectionNote& v) {
  Json j;
  j["candidate_id"] = v.candidate_id;
  j["text"] = v.text;
  j["wrong_example_ids"] = v.wrong_example_ids;
  return j;
}

IntrospectionNote introspection_note_from_json(const Json& j) {
  IntrospectionNote v;
  v.candidate_id = j.at("candidate_id").get<std::string>();
  v.text = j.at("text").get<std::string>();
  v.wrong_example_ids = j.value("wrong_example_ids", std::vector<std::string>{});
  return v;
}

Json to_json(const RunConfig& v) {
  Json j;
  j["alpha"] = v.alpha;
  j["alpha_star"] = v.alpha_star;
  j["top_k"] = v.top_k;
  j["iterations"] = v.iterations;
  j["candidates_per_iter"] = v.candidates_per_iter;
  j["optimizer_temperature"] = v.optimizer_temperature;
  j["edit_budget_initial"] = v.edit_budget_initial;
  j["edit_budget_floor"] = v.edit_budget_floor;
  j["introspection_enabled"] = v.introspection_enabled;
  j["max_wrong_examples_in_introspection"] = v.max_wrong_examples_in_introspection;
  j["meta_prompt_examples"] = v.meta_prompt_examples;
  j["proposal_retries"] = v.proposal_retries;
  j["zero_shot_candidates"] = v.zero_shot_candidates;
  j["seed"] = v.seed;
  j["max_tokens_model"] = v.max_tokens_model;
  j["max_tokens_optimizer"] = v.max_tokens_optimizer;
  j["model_backend"] = v.model_backend;
  j["optimizer_backend"] = v.optimizer_backend;
  j["analyzer_backend"] = v.analyzer_backend;
  j["embedder_backend"] = v.embedder_backend;
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig d;
  RunConfig v;
  v.alpha = j.value("alpha", d.alpha);
  v.alpha_star = j.value("alpha_star", d.alpha_star);
  v.top_k = j.value("top_k", d.top_k);
  v.iterations = j.value("iterations", d.iterations);
  v.candidates_per_iter = j.value("candidates_per_iter", d.candidates_per_iter);
  v.optimizer_temperature =
      j.value("optimizer_temperature", d.optimizer_temperature);
  v.edit_budget_initial = j.value("edit_budget_initial", d.edit_budget_initial);
  v.edit_budget_floor = j.value("edit_budget_floor", d.edit_budget_floor);
  v.introspection_enabled =
      j.value("introspection_enabled", d.introspection_enabled);
  v.max_wrong_examples_in_introspection =
      j.value("max_wrong_examples_in_introspection",
              d.max_wrong_examples_in_introspection);
  v.meta_prompt_examples = j.value("meta_prompt_examples", d.meta_prompt_examples);
  v.proposal_retries = j.value("proposal_retries", d.proposal_retries);
  v.zero_shot_candidates = j.value("zero_shot_candidates", d.zero_shot_candidates);
  v.seed = j.value("seed", d.seed);
  v.max_tokens_model = j.value("max_tokens_model", d.max_tokens_model);
  v.max_tokens_optimizer =
      j.value("max_tokens_optimizer", d.max_tokens_optimizer);
  v.model_backend = j.value("model_backend", std::string{});
  v.optimizer_backend = j.value("optimizer_backend", std::string{});
  v.analyzer_backend = j.value("analyzer_backend", std::string{});
  v.embedder_backend = j.value("embedder_backend", std::string{});
  return v;
}

Json to_json(const RejectionRecord& v) {
  Json j;
  j["text"] = v.text;
  j["reason"] = v.reason;
  return j;
}

RejectionRecord rejection_record_from_json(const Json& j) {
  RejectionRecord v;
  v.text = j.at("text").get<std::string>();
  v.reason = j.at("reason").get<std::string>();
  return v;
}

Json to_json(const CandidateRecord& v) {
  Json j;
  j["candidate"] = to_json(v.candidate);
  j["score"] = to_json(v.score);
  if (v.introspection) j["introspection"] = to_json(*v.introspection);
  return j;
}

CandidateRecord candidate_record_from_json(const Json& j) {
  CandidateRecord v;
  v.candidate = prompt_candidate_from_json(j.at("candidate"));
  v.score = score_record_from_json(j.at("score"));
  if (j.contains("introspection")) {
    v.introspection = introspection_note_from_json(j.at("introspection"));
  }
  return v;
}

Json to_json(const IterationRecord& v) {
  Json j;
  j["index"] = v.index;
  j["meta_prompt_digest"] = v.meta_prompt_digest;
  j["meta_prompt_text"] = v.meta_prompt_text;
  j["edit_counter"] = v.edit_counter;
  j["reference_texts"] = v.reference_texts;
  Json cands = Json::array();
  for (const auto& c : v.candidates) cands.push_back(to_json(c));
  j["candidates"] = cands;
  Json rejs = Json::array();
  for (const auto& r : v.rejections) rejs.push_back(to_json(r));
  j["rejections"] = rejs;
  return j;
}

IterationRecord iteration_record_from_json(const Json& j) {
  IterationRecord v;
  v.index = j.at("index").get<int>();
  v.meta_prompt_digest = j.value("meta_prompt_digest", std::string{});
  v.meta_prompt_text = j.value("meta_prompt_text", std::string{});
  v.edit_counter = j.value("edit_counter", 0);
  v.reference_texts = j.value("reference_texts", std::vector<std::string>{});
  for (const auto& c : j.at("candidates")) {
    v.candidates.push_back(candidate_record_from_json(c));
  }
  if (j.contains("rejections")) {
    for (const auto& r : j.at("rejections")) {
      v.rejections.push_back(rejection_record_from_json(r));
    }
  }
  return v;
}

Json to_json(const RunHistory& v) {
  Json j;
  j["run_id"] = v.run_id;
  j["task_id"] = v.task_id;
  j["config"] = to_json(v.config);
  Json its = Json::array();
  for (const auto& it : v.iterations) its.push_back(to_json(it));
  j["iterations"] = its;
  if (v.final_selection) j["final_selection"] = *v.final_selection;
  return j;
}

RunHistory run_history_from_json(const Json& j) {
  RunHistory v;
  v.run_id = j.at("run_id").get<std::string>();
  v.task_id = j.at("task_id").get<std::string>();
  v.config = run_config_from_json(j.at("config"));
  for (const auto& it : j.at("iterations")) {
    v.iterations.push_back(iteration_record_from_json(it));
  }
  if (j.contains("final_selection")) {
    v.final_selection = j.at("final_selection").get<std::string>();
  }
  return v;
}

std::string config_digest(const RunConfig& config) {
  return short_digest({to_json(config).dump()});
}

std::string dataset_digest(const TaskSpec& task,
                           const std::vector<ExampleItem>& examples) {
  Json j;
  j["task"] = to_json(task);
  Json exs = Json::array();
  for (const auto& e : examples) exs.push_back(to_json(e));
  j["examples"] = exs;
  return short_digest({j.dump()});
}

}  // namespace tpeval
