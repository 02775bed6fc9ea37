#pragma once

#include <string>
#include <vector>

#include "tpeval/backends.hpp"
#include "tpeval/domain.hpp"

namespace tpeval::optimizer {

// Whitespace-delimited tokens, case preserved (distinct from
// tokenize_words, which folds case and strips punctuation).
std::vector<std::string> split_whitespace(const std::string& text);

// Levenshtein distance over whitespace tokens: unit-cost insert, delete,
// substitute; case-sensitive.
int word_edit_distance(const std::string& a, const std::string& b);

// Default starting budget: max(10, ceil(word count of the prompt / 2)).
int default_edit_budget_initial(const std::string& original_prompt);

// Decaying word-edit budget for iteration i of total_iterations:
//   counter(i) = max(floor(B0 * (N - i) / N), budget_floor)
// Non-increasing in i.
int edit_budget(int iteration, int budget_initial, int budget_floor,
                int total_iterations);

// config.edit_budget_initial, with the 0 sentinel resolved from the task's
// original prompt.
int resolved_edit_budget_initial(const RunConfig& config, const TaskSpec& task);

// The k best scored candidates at weight alpha, best first. Ties break by
// higher similarity, then lower iteration, then candidate_id. Returns fewer
// than k when the history is smaller. Deterministic in the history contents,
// not its insertion order.
std::vector<CandidateRecord> select_top_k(const RunHistory& history, int k,
                                          double alpha);

// The four sections of the optimizer's input, kept separate for tests and
// flattened for the actual call.
struct MetaPromptParts {
  std::string description;
  std::string pseudo_gradient;
  std::string examples_block;
  std::string instruction;
  // Texts shown in the pseudo-gradient; the edit gate measures candidate
  // distance against the nearest of these.
  std::vector<std::string> reference_texts;

  std::string flatten() const;
};

// Deterministic function of its inputs: top-K prompts with combined scores
// (3 decimals) and introspection lines (omitted entirely when
// config.introspection_enabled is false), up to config.meta_prompt_examples
// few-split (question, answer) pairs in ascending example_id order, and an
// instruction carrying the verbatim edit clause for `counter`. `round` is
// the 1-based round number, stated in the text as "Round: r of N".
MetaPromptParts build_meta_prompt(const TaskSpec& task, const RunHistory& history,
                                  const std::vector<ExampleItem>& few_examples,
                                  int round, int counter,
                                  const RunConfig& config);

// Contents of <PROMPT>...</PROMPT> pairs, in order, trimmed.
std::vector<std::string> parse_tagged_prompts(const std::string& text);

struct ProposalResult {
  std::vector<PromptCandidate> accepted;
  std::vector<RejectionRecord> rejections;
};

// Calls the optimizer with the flattened meta-prompt and gates each parsed
// proposal: non-empty, not a normalized duplicate of any history candidate
// (or earlier acceptance), and within `counter` word edits of the nearest
// reference text. A rejecting attempt triggers up to config.proposal_retries
// re-requests with a violation notice appended. Accepts at most
// config.candidates_per_iter texts, each stamped iteration=round,
// source=Optimizer. Throws MalformedOptimizerOutput only when no attempt
// produced a single parseable tag.
ProposalResult propose_candidates(const TaskSpec& task, const RunHistory& history,
                                  const MetaPromptParts& meta_prompt, int round,
                                  int counter, BackendRegistry& registry,
                                  const RunConfig& config);

}  // namespace tpeval::optimizer
