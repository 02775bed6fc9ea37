#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tpeval {

// Collapses whitespace runs to single spaces and trims both ends.
// Case-sensitive. Used for text equality, dedupe and candidate ids.
std::string normalize_whitespace(const std::string& text);

// Lowercased alphanumeric word tokens ("helmet?" -> "helmet"). Shared by the
// bag-of-words embedder and the synthetic model's keyword matching.
std::vector<std::string> tokenize_words(const std::string& text);

enum class PromptMode { WholePrompt, Prefix };
enum class Split { Unassigned, Few, Test };
enum class CandidateSource { Initial, Optimizer, ZeroShotICL };

const char* to_string(PromptMode m);
const char* to_string(Split s);
const char* to_string(CandidateSource s);
PromptMode prompt_mode_from_string(const std::string& s);
Split split_from_string(const std::string& s);
CandidateSource candidate_source_from_string(const std::string& s);

// One benchmark task. In Prefix mode original_prompt is the initial prefix
// phrase and the per-example question is appended unchanged at render time.
struct TaskSpec {
  std::string task_id;
  std::string name;
  std::string category;
  PromptMode prompt_mode = PromptMode::WholePrompt;
  std::string original_prompt;
  // Placeholder token name. A {question_slot} placeholder in a WholePrompt
  // template is filled with the example's question text.
  std::string question_slot = "question";
  std::vector<std::string> option_labels;

  bool operator==(const TaskSpec&) const = default;
};

struct ExampleItem {
  std::string example_id;
  std::string question;
  std::vector<std::string> image_refs;
  // Ordered label -> text. Stored order is preserved end to end; the loader
  // never reorders options.
  std::vector<std::pair<std::string, std::string>> options;
  std::string ground_truth;
  Split split = Split::Unassigned;

  const std::string* option_text(const std::string& label) const;
  bool operator==(const ExampleItem&) const = default;
};

struct PromptCandidate {
  std::string candidate_id;
  std::string text;
  int iteration = 0;  // 0 = initial prompt
  CandidateSource source = CandidateSource::Initial;
  std::string meta_prompt_digest;  // empty for Initial

  bool operator==(const PromptCandidate&) const = default;
};

// Stable content id: same (task, iteration, normalized text) always maps to
// the same id, across processes and resumes.
std::string make_candidate_id(const std::string& task_id, int iteration,
                              const std::string& text);

PromptCandidate make_initial_candidate(const TaskSpec& task);

struct ExampleOutcome {
  std::string extracted_label;  // kUnparseable when extraction failed
  bool correct = false;
  std::string response_digest;

  bool operator==(const ExampleOutcome&) const = default;
};

// Sentinel label for responses no extraction stage could decode.
inline const std::string kUnparseable = "UNPARSEABLE";

struct ScoreRecord {
  std::string candidate_id;
  // Accuracy is stored exactly as a (correct, total) pair; the real-valued
  // accuracy is derived at presentation time only.
  int correct_count = 0;
  int n_evaluated = 0;
  double similarity = 0.0;  // s in [0,1]
  std::map<std::string, ExampleOutcome> outcomes;  // keyed by example_id

  double accuracy() const {
    return n_evaluated == 0 ? 0.0
                            : static_cast<double>(correct_count) / n_evaluated;
  }
  bool operator==(const ScoreRecord&) const = default;
};

struct IntrospectionNote {
  std::string candidate_id;
  std::string text;
  std::vector<std::string> wrong_example_ids;

  bool empty() const { return text.empty() && wrong_example_ids.empty(); }
  bool operator==(const IntrospectionNote&) const = default;
};

// c = alpha * a + (1 - alpha) * s. All inputs must lie in [0,1].
double combined_score(double accuracy, double similarity, double alpha);

struct RunConfig {
  double alpha = 0.8;
  double alpha_star = 0.6;
  int top_k = 8;
  int iterations = 16;
  int candidates_per_iter = 3;
  double optimizer_temperature = 1.0;
  // 0 = derive at run start: max(10, ceil(word count of p0 / 2)).
  int edit_budget_initial = 0;
  int edit_budget_floor = 3;
  bool introspection_enabled = true;
  int max_wrong_examples_in_introspection = 5;
  int meta_prompt_examples = 8;   // (question, answer) pairs shown to M_O
  int proposal_retries = 2;       // re-requests after rejected candidates
  int zero_shot_candidates = 1;
  uint64_t seed = 0;
  int max_tokens_model = 512;
  int max_tokens_optimizer = 1024;

  std::string model_backend;      // M_T
  std::string optimizer_backend;  // M_O
  std::string analyzer_backend;   // M_A
  std::string embedder_backend;

  bool operator==(const RunConfig&) const = default;
};

// Rejected optimizer proposal, kept for audit.
struct RejectionRecord {
  std::string text;
  std::string reason;

  bool operator==(const RejectionRecord&) const = default;
};

struct CandidateRecord {
  PromptCandidate candidate;
  ScoreRecord score;
  std::optional<IntrospectionNote> introspection;

  bool operator==(const CandidateRecord&) const = default;
};

struct IterationRecord {
  int index = 0;
  std::string meta_prompt_digest;  // empty for iteration 0
  std::string meta_prompt_text;    // kept verbatim for audit; empty for iter 0
  int edit_counter = 0;            // word-edit budget in force this iteration
  // Top-K prompt texts shown to the optimizer; the edit gate is measured
  // against the nearest of these.
  std::vector<std::string> reference_texts;
  std::vector<CandidateRecord> candidates;
  std::vector<RejectionRecord> rejections;

  bool operator==(const IterationRecord&) const = default;
};

// Append-only record of a whole optimization run. Single writer (the engine);
// replaying the serialized log reconstructs identical state.
struct RunHistory {
  std::string run_id;
  std::string task_id;
  RunConfig config;
  std::vector<IterationRecord> iterations;
  std::optional<std::string> final_selection;

  std::vector<const CandidateRecord*> all_candidates() const;
  const CandidateRecord* find_candidate(const std::string& candidate_id) const;
  bool operator==(const RunHistory&) const = default;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

struct ValidateOptions {
  // Also require a non-empty Few split (set when the examples feed a
  // scoring loop; meaningless before split assignment).
  bool require_few_split = false;
};

// Report-style checker: collects every invariant violation, mutates nothing.
ValidationReport validate_task(const TaskSpec& task,
                               const std::vector<ExampleItem>& examples,
                               const ValidateOptions& opts = {});

}  // namespace tpeval
