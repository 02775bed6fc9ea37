#pragma once

#include <string>
#include <vector>

#include "tpeval/backends.hpp"
#include "tpeval/domain.hpp"

namespace tpeval::scorer {

// Formats an options block ("Options:\nA. ...\nB. ..."); empty input renders
// to an empty string.
std::string format_options_block(
    const std::vector<std::pair<std::string, std::string>>& options);

// Renders the prompt one example sees.
//   WholePrompt: {token} placeholders in the candidate text are filled —
//     the task's question_slot token takes the example's question, an
//     {options} token takes the options block. Unknown tokens throw
//     MissingSlot. Without an {options} token, a non-empty options block is
//     appended.
//   Prefix: candidate text + "\n" + untouched question, options appended.
std::string render_prompt(const TaskSpec& task, const std::string& candidate_text,
                          const ExampleItem& example);

// Choice extraction. Rule stage first:
//   1. a standalone label token at the start of the response
//      (case-sensitive) or after the last "answer is" (case-insensitive);
//   2. unique option-text containment.
// If the rules fail or are ambiguous, one analyzer call decides; returns
// kUnparseable when everything fails. kUnparseable is a value, not an error.
std::string extract_answer(
    const std::string& response_text,
    const std::vector<std::pair<std::string, std::string>>& options,
    BackendRegistry& registry, const std::string& analyzer_backend);

// Scores one candidate on an example set: one model call per example
// (cached), extraction per response, correct iff the extracted label equals
// the ground truth. Unparseable counts incorrect. Free-form tasks (no
// options) are graded by exact normalized string match.
ScoreRecord score_candidate(const TaskSpec& task, const PromptCandidate& candidate,
                            const std::vector<ExampleItem>& examples,
                            BackendRegistry& registry,
                            const std::string& model_backend,
                            const std::string& analyzer_backend,
                            int max_tokens = 512);

// Cosine similarity between the candidate and the task's original prompt
// fragment, negatives clamped to 0 so it shares [0,1] with accuracy.
double semantic_similarity(const std::string& candidate_text,
                           const std::string& original_text,
                           BackendRegistry& registry,
                           const std::string& embedder_backend);

// One analyzer call covering up to max_wrong incorrect outcomes (ascending
// example_id). Zero wrong outcomes yield an empty note; a failed analyzer
// call degrades to an empty note with a warning instead of aborting the run.
IntrospectionNote generate_introspection(const TaskSpec& task,
                                         const PromptCandidate& candidate,
                                         const ScoreRecord& score,
                                         const std::vector<ExampleItem>& examples,
                                         BackendRegistry& registry,
                                         const std::string& analyzer_backend,
                                         int max_wrong, int max_tokens = 512);

}  // namespace tpeval::scorer
