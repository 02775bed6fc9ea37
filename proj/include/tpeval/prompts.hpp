#pragma once

#include <string>

// Instruction texts sent to the answer analyzer and the optimizer. These are
// versioned resources: changing any of them changes meta-prompt digests and
// therefore run identities. Keep edits deliberate.

namespace tpeval::prompts {

inline constexpr const char* kResourceVersion = "1";

// --- answer analyzer ---

inline constexpr const char* kExtractionHeader =
    "You extract the final choice from a model's answer to a multiple-choice "
    "question. Reply with exactly one option label from the list and nothing "
    "else. If no choice can be determined, reply UNPARSEABLE.";

inline constexpr const char* kIntrospectionHeader =
    "A vision-language model answered the questions below incorrectly under "
    "the given prompt. Diagnose, briefly and concretely, what about the "
    "prompt is likely to have caused these mistakes. Reply with a short "
    "analysis the prompt writer can act on.";

// --- optimizer meta prompt ---

inline constexpr const char* kMetaDescription =
    "You are optimizing the text prompt of a visual question answering task. "
    "The evaluated model sees each prompt together with the task's images "
    "and must answer correctly as often as possible.";

inline constexpr const char* kMetaPrefixModeNote =
    "Only the leading phrase is optimized; each example's question is "
    "appended to it unchanged.";

inline constexpr const char* kPromptOpenTag = "<PROMPT>";
inline constexpr const char* kPromptCloseTag = "</PROMPT>";

// The edit-limit clause. The substituted form
// "You can only edit at most N words" must appear verbatim in every
// optimizer instruction.
inline constexpr const char* kEditClausePrefix = "You can only edit at most ";
inline constexpr const char* kEditClauseSuffix = " words";

std::string edit_clause(int counter);

// --- zero-shot ICL ---

inline constexpr const char* kIclHeader =
    "You rewrite benchmark task prompts so that a specific evaluated model "
    "answers more accurately. Below are tasks whose prompts were already "
    "successfully customized for this model, each as an original/optimized "
    "pair. Learn the phrasing this model prefers and rewrite the new task's "
    "prompt in the same spirit.";

}  // namespace tpeval::prompts
