#include "tpeval/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <optional>

#include "tpeval/digest.hpp"
#include "tpeval/errors.hpp"
#include "tpeval/prompts.hpp"

namespace tpeval::scorer {

namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

bool is_wrapping_punct(char c) {
  return c == '(' || c == ')' || c == '[' || c == ']' || c == '*' ||
         c == '"' || c == '\'' || c == '.' || c == ',' || c == ':' ||
         c == ';' || c == '!' || c == '>';
}

// First whitespace-delimited token with wrapping punctuation stripped.
std::string first_bare_token(const std::string& text) {
  size_t i = 0;
  while (i < text.size() &&
         (std::isspace(static_cast<unsigned char>(text[i])) ||
          is_wrapping_punct(text[i]))) {
    ++i;
  }
  size_t j = i;
  while (j < text.size() &&
         !std::isspace(static_cast<unsigned char>(text[j])) &&
         !is_wrapping_punct(text[j])) {
    ++j;
  }
  return text.substr(i, j - i);
}

std::optional<std::string> match_label(
    const std::string& token,
    const std::vector<std::pair<std::string, std::string>>& options,
    bool case_insensitive) {
  if (token.empty()) return std::nullopt;
  for (const auto& [label, _] : options) {
    if (case_insensitive ? to_lower(token) == to_lower(label)
                         : token == label) {
      return label;
    }
  }
  return std::nullopt;
}

// Rule 1: standalone label at the start (case-sensitive, so a leading
// article "a" does not read as label "A") or after the last "answer is"
// (case-insensitive).
std::optional<std::string> rule_standalone_label(
    const std::string& response,
    const std::vector<std::pair<std::string, std::string>>& options) {
  const std::string lower = to_lower(response);
  static const std::string kAnchor = "answer is";
  if (const size_t pos = lower.rfind(kAnchor); pos != std::string::npos) {
    const std::string after = response.substr(pos + kAnchor.size());
    if (auto label = match_label(first_bare_token(after), options, true)) {
      return label;
    }
  }
  return match_label(first_bare_token(response), options, false);
}

// Rule 2: exactly one option's text occurs in the response.
std::optional<std::string> rule_option_text(
    const std::string& response,
    const std::vector<std::pair<std::string, std::string>>& options) {
  const std::string hay = to_lower(normalize_whitespace(response));
  if (hay.empty()) return std::nullopt;
  std::optional<std::string> found;
  for (const auto& [label, text] : options) {
    const std::string needle = to_lower(normalize_whitespace(text));
    if (needle.empty()) continue;
    if (hay.find(needle) != std::string::npos) {
      if (found) return std::nullopt;  // ambiguous
      found = label;
    }
  }
  return found;
}

}  // namespace

std::string format_options_block(
    const std::vector<std::pair<std::string, std::string>>& options) {
  if (options.empty()) return {};
  std::string out = "Options:";
  for (const auto& [label, text] : options) {
    out += "\n" + label;
    if (!text.empty()) out += ". " + text;
  }
  return out;
}

std::string render_prompt(const TaskSpec& task, const std::string& candidate_text,
                          const ExampleItem& example) {
  const std::string options_block = format_options_block(example.options);

  if (task.prompt_mode == PromptMode::Prefix) {
    // The candidate is only the prefix; the question is never modified.
    std::string out = candidate_text + "\n" + example.question;
    if (!options_block.empty()) out += "\n" + options_block;
    return out;
  }

  std::string out;
  out.reserve(candidate_text.size() + 64);
  bool options_placed = false;
  size_t i = 0;
  while (i < candidate_text.size()) {
    const char c = candidate_text[i];
    if (c != '{') {
      out.push_back(c);
      ++i;
      continue;
    }
    const size_t close = candidate_text.find('}', i + 1);
    if (close == std::string::npos) {
      throw MissingSlot("unterminated placeholder in template of task '" +
                        task.task_id + "'");
    }
    const std::string token = candidate_text.substr(i + 1, close - i - 1);
    if (token == task.question_slot || token == "question") {
      out += example.question;
    } else if (token == "options") {
      out += options_block;
      options_placed = true;
    } else {
      throw MissingSlot("no value for placeholder '{" + token +
                        "}' in task '" + task.task_id + "'");
    }
    i = close + 1;
  }
  if (!options_placed && !options_block.empty()) out += "\n" + options_block;
  return out;
}

std::string extract_answer(
    const std::string& response_text,
    const std::vector<std::pair<std::string, std::string>>& options,
    BackendRegistry& registry, const std::string& analyzer_backend) {
  if (options.empty()) {
    throw Error("extract_answer requires a non-empty option set");
  }
  if (auto label = rule_standalone_label(response_text, options)) return *label;
  if (auto label = rule_option_text(response_text, options)) return *label;

  std::string instruction = prompts::kExtractionHeader;
  instruction += "\n\n" + format_options_block(options);
  instruction += "\nResponse: " + response_text;
  instruction += "\nAnswer:";

  ChatRequest req;
  req.messages = {{Role::User, instruction, {}}};
  req.temperature = 0.0;
  req.max_tokens = 16;
  req.model_id = analyzer_backend;
  req.purpose = CallPurpose::Extract;
  const ChatResponse resp = registry.chat(analyzer_backend, req);

  if (to_lower(resp.text).find("unparseable") != std::string::npos) {
    return kUnparseable;
  }
  if (auto label = match_label(first_bare_token(resp.text), options, true)) {
    return *label;
  }
  return kUnparseable;
}

ScoreRecord score_candidate(const TaskSpec& task, const PromptCandidate& candidate,
                            const std::vector<ExampleItem>& examples,
                            BackendRegistry& registry,
                            const std::string& model_backend,
                            const std::string& analyzer_backend,
                            int max_tokens) {
  if (examples.empty()) {
    throw Error("score_candidate requires a non-empty example set");
  }
  ScoreRecord record;
  record.candidate_id = candidate.candidate_id;

  for (const auto& example : examples) {
    const std::string rendered = render_prompt(task, candidate.text, example);

    ChatRequest req;
    req.messages = {{Role::User, rendered, example.image_refs}};
    req.temperature = 0.0;  // deterministic decoding for scoring stability
    req.max_tokens = max_tokens;
    req.model_id = model_backend;
    req.purpose = CallPurpose::Score;
    const ChatResponse resp = registry.chat(model_backend, req);

    ExampleOutcome outcome;
    outcome.response_digest = short_digest({resp.text});
    if (!example.options.empty() || !task.option_labels.empty()) {
      auto options = example.options;
      if (options.empty()) {
        for (const auto& l : task.option_labels) options.emplace_back(l, "");
      }
      outcome.extracted_label =
          extract_answer(resp.text, options, registry, analyzer_backend);
      outcome.correct = outcome.extracted_label != kUnparseable &&
                        outcome.extracted_label == example.ground_truth;
    } else {
      outcome.extracted_label = normalize_whitespace(resp.text);
      outcome.correct = outcome.extracted_label ==
                        normalize_whitespace(example.ground_truth);
    }
    if (outcome.correct) ++record.correct_count;
    ++record.n_evaluated;
    record.outcomes[example.example_id] = std::move(outcome);
  }
  return record;
}

double semantic_similarity(const std::string& candidate_text,
                           const std::string& original_text,
                           BackendRegistry& registry,
                           const std::string& embedder_backend) {
  if (candidate_text.empty() || original_text.empty()) {
    throw Error("semantic_similarity requires non-empty texts");
  }
  const EmbeddingVector a = registry.embed(embedder_backend, candidate_text);
  const EmbeddingVector b = registry.embed(embedder_backend, original_text);
  return std::max(0.0, cosine_similarity(a, b));
}

IntrospectionNote generate_introspection(const TaskSpec& task,
                                         const PromptCandidate& candidate,
                                         const ScoreRecord& score,
                                         const std::vector<ExampleItem>& examples,
                                         BackendRegistry& registry,
                                         const std::string& analyzer_backend,
                                         int max_wrong, int max_tokens) {
  IntrospectionNote note;
  note.candidate_id = candidate.candidate_id;

  // outcomes is keyed by example_id, so iteration is already ascending
  for (const auto& [example_id, outcome] : score.outcomes) {
    if (outcome.correct) continue;
    if (static_cast<int>(note.wrong_example_ids.size()) >= max_wrong) break;
    note.wrong_example_ids.push_back(example_id);
  }
  if (note.wrong_example_ids.empty()) return note;

  std::string text = prompts::kIntrospectionHeader;
  text += "\n\nPrompt: " + candidate.text + "\n";
  int index = 1;
  for (const auto& id : note.wrong_example_ids) {
    const auto it = std::find_if(
        examples.begin(), examples.end(),
        [&](const ExampleItem& e) { return e.example_id == id; });
    if (it == examples.end()) continue;
    const auto& outcome = score.outcomes.at(id);
    text += "\nMistake " + std::to_string(index++) + ":";
    text += "\nQuestion: " + it->question;
    const std::string options_block = format_options_block(it->options);
    if (!options_block.empty()) text += "\n" + options_block;
    text += "\nModel answer: " + (outcome.extracted_label == kUnparseable
                                      ? "(unparseable response)"
                                      : outcome.extracted_label);
    text += "\nCorrect answer: " + it->ground_truth + "\n";
  }

  ChatRequest req;
  req.messages = {{Role::User, text, {}}};
  req.temperature = 0.0;
  req.max_tokens = max_tokens;
  req.model_id = analyzer_backend;
  req.purpose = CallPurpose::Introspect;
  try {
    note.text = registry.chat(analyzer_backend, req).text;
  } catch (const Error& e) {
    std::cerr << "warning: introspection call failed for candidate "
              << candidate.candidate_id << ": " << e.what() << "\n";
    note.text.clear();
    note.wrong_example_ids.clear();
  }
  return note;
}

}  // namespace tpeval::scorer
