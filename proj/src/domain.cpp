#include "tpeval/domain.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "tpeval/digest.hpp"

namespace tpeval {

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

const char* to_string(PromptMode m) {
  return m == PromptMode::WholePrompt ? "whole" : "prefix";
}

const char* to_string(Split s) {
  switch (s) {
    case Split::Few:
      return "few";
    case Split::Test:
      return "test";
    default:
      return "unassigned";
  }
}

const char* to_string(CandidateSource s) {
  switch (s) {
    case CandidateSource::Initial:
      return "initial";
    case CandidateSource::Optimizer:
      return "optimizer";
    default:
      return "zero_shot_icl";
  }
}

PromptMode prompt_mode_from_string(const std::string& s) {
  if (s == "whole") return PromptMode::WholePrompt;
  if (s == "prefix") return PromptMode::Prefix;
  throw std::invalid_argument("unknown prompt mode: " + s);
}

Split split_from_string(const std::string& s) {
  if (s == "few") return Split::Few;
  if (s == "test") return Split::Test;
  if (s == "unassigned") return Split::Unassigned;
  throw std::invalid_argument("unknown split: " + s);
}

CandidateSource candidate_source_from_string(const std::string& s) {
  if (s == "initial") return CandidateSource::Initial;
  if (s == "optimizer") return CandidateSource::Optimizer;
  if (s == "zero_shot_icl") return CandidateSource::ZeroShotICL;
  throw std::invalid_argument("unknown candidate source: " + s);
}

const std::string* ExampleItem::option_text(const std::string& label) const {
  for (const auto& [l, t] : options) {
    if (l == label) return &t;
  }
  return nullptr;
}

std::string make_candidate_id(const std::string& task_id, int iteration,
                              const std::string& text) {
  return short_digest(
      {task_id, std::to_string(iteration), normalize_whitespace(text)});
}

PromptCandidate make_initial_candidate(const TaskSpec& task) {
  PromptCandidate c;
  c.text = task.original_prompt;
  c.iteration = 0;
  c.source = CandidateSource::Initial;
  c.candidate_id = make_candidate_id(task.task_id, 0, task.original_prompt);
  return c;
}

double combined_score(double accuracy, double similarity, double alpha) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(accuracy) || !in_unit(similarity) || !in_unit(alpha)) {
    throw std::domain_error("combined_score arguments must lie in [0,1]");
  }
  return alpha * accuracy + (1.0 - alpha) * similarity;
}

std::vector<const CandidateRecord*> RunHistory::all_candidates() const {
  std::vector<const CandidateRecord*> out;
  for (const auto& it : iterations) {
    for (const auto& c : it.candidates) out.push_back(&c);
  }
  return out;
}

const CandidateRecord* RunHistory::find_candidate(
    const std::string& candidate_id) const {
  for (const auto& it : iterations) {
    for (const auto& c : it.candidates) {
      if (c.candidate.candidate_id == candidate_id) return &c;
    }
  }
  return nullptr;
}

ValidationReport validate_task(const TaskSpec& task,
                               const std::vector<ExampleItem>& examples,
                               const ValidateOptions& opts) {
  ValidationReport report;
  auto add = [&](std::string v) { report.violations.push_back(std::move(v)); };

  if (task.task_id.empty()) add("task has empty task_id");
  if (normalize_whitespace(task.original_prompt).empty()) {
    add("task '" + task.task_id + "' has empty original_prompt");
  }
  {
    std::set<std::string> seen;
    for (const auto& l : task.option_labels) {
      if (l.empty()) add("task '" + task.task_id + "' has an empty option label");
      if (!seen.insert(l).second) {
        add("task '" + task.task_id + "' repeats option label '" + l + "'");
      }
    }
  }

  std::map<std::string, std::vector<size_t>> by_id;
  for (size_t i = 0; i < examples.size(); ++i) {
    by_id[examples[i].example_id].push_back(i);
  }
  for (const auto& [id, positions] : by_id) {
    if (positions.size() > 1) {
      std::string v = "duplicate example_id '" + id + "' at records";
      for (size_t p : positions) v += " #" + std::to_string(p);
      add(std::move(v));
    }
  }

  const std::set<std::string> labels(task.option_labels.begin(),
                                     task.option_labels.end());
  size_t few = 0;
  for (const auto& ex : examples) {
    if (ex.example_id.empty()) add("example with empty example_id");
    if (ex.ground_truth.empty()) {
      add("example '" + ex.example_id + "' has no ground truth");
    } else if (!task.option_labels.empty() && !labels.count(ex.ground_truth)) {
      add("example '" + ex.example_id + "' ground truth '" + ex.ground_truth +
          "' is not one of the task's option labels");
    }
    for (const auto& [label, text] : ex.options) {
      if (!task.option_labels.empty() && !labels.count(label)) {
        add("example '" + ex.example_id + "' carries unknown option label '" +
            label + "'");
      }
      (void)text;
    }
    if (ex.split == Split::Few) ++few;
  }

  if (opts.require_few_split && few == 0) {
    add("empty optimization split: task '" + task.task_id +
        "' has no Few examples");
  }
  return report;
}

}  // namespace tpeval
