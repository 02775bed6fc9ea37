#include "tpeval/optimizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "tpeval/digest.hpp"
#include "tpeval/errors.hpp"
#include "tpeval/prompts.hpp"

namespace tpeval::optimizer {

namespace {

std::string format3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double record_combined(const CandidateRecord& r, double alpha) {
  return combined_score(r.score.accuracy(), r.score.similarity, alpha);
}

}  // namespace

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) {
      ++j;
    }
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

int word_edit_distance(const std::string& a, const std::string& b) {
  const auto ta = split_whitespace(a);
  const auto tb = split_whitespace(b);
  const size_t n = ta.size(), m = tb.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (ta[i - 1] == tb[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

int default_edit_budget_initial(const std::string& original_prompt) {
  const int words = static_cast<int>(split_whitespace(original_prompt).size());
  return std::max(10, (words + 1) / 2);
}

int edit_budget(int iteration, int budget_initial, int budget_floor,
                int total_iterations) {
  const long scaled = static_cast<long>(budget_initial) *
                      (total_iterations - iteration) / total_iterations;
  return std::max(static_cast<int>(scaled), budget_floor);
}

int resolved_edit_budget_initial(const RunConfig& config, const TaskSpec& task) {
  return config.edit_budget_initial > 0
             ? config.edit_budget_initial
             : default_edit_budget_initial(task.original_prompt);
}

std::vector<CandidateRecord> select_top_k(const RunHistory& history, int k,
                                          double alpha) {
  std::vector<CandidateRecord> records;
  for (const auto* r : history.all_candidates()) records.push_back(*r);
  std::sort(records.begin(), records.end(),
            [alpha](const CandidateRecord& x, const CandidateRecord& y) {
              const double cx = record_combined(x, alpha);
              const double cy = record_combined(y, alpha);
              if (cx != cy) return cx > cy;
              if (x.score.similarity != y.score.similarity) {
                return x.score.similarity > y.score.similarity;
              }
              if (x.candidate.iteration != y.candidate.iteration) {
                return x.candidate.iteration < y.candidate.iteration;
              }
              return x.candidate.candidate_id < y.candidate.candidate_id;
            });
  if (static_cast<int>(records.size()) > k) records.resize(k);
  return records;
}

std::string MetaPromptParts::flatten() const {
  std::string out;
  for (const std::string* part :
       {&description, &pseudo_gradient, &examples_block, &instruction}) {
    if (part->empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += *part;
  }
  return out;
}

MetaPromptParts build_meta_prompt(const TaskSpec& task, const RunHistory& history,
                                  const std::vector<ExampleItem>& few_examples,
                                  int round, int counter,
                                  const RunConfig& config) {
  MetaPromptParts parts;

  parts.description = prompts::kMetaDescription;
  if (task.prompt_mode == PromptMode::Prefix) {
    parts.description += std::string("\n") + prompts::kMetaPrefixModeNote;
  }
  parts.description += "\nTask: " + (task.name.empty() ? task.task_id : task.name);
  parts.description += "\nRound: " + std::to_string(round) + " of " +
                       std::to_string(config.iterations);

  const auto top = select_top_k(history, config.top_k, config.alpha);
  parts.pseudo_gradient = "Previous prompts and their scores, best first:";
  for (const auto& entry : top) {
    parts.reference_texts.push_back(entry.candidate.text);
    parts.pseudo_gradient += "\n\nPrompt: " + entry.candidate.text;
    parts.pseudo_gradient +=
        "\nScore: " + format3(record_combined(entry, config.alpha));
    if (config.introspection_enabled && entry.introspection &&
        !entry.introspection->text.empty()) {
      parts.pseudo_gradient += "\nAnalysis: " + entry.introspection->text;
    }
  }

  std::vector<const ExampleItem*> shown;
  for (const auto& ex : few_examples) shown.push_back(&ex);
  std::sort(shown.begin(), shown.end(),
            [](const ExampleItem* a, const ExampleItem* b) {
              return a->example_id < b->example_id;
            });
  if (static_cast<int>(shown.size()) > config.meta_prompt_examples) {
    shown.resize(config.meta_prompt_examples);
  }
  if (!shown.empty()) {
    parts.examples_block = "Task examples:";
    for (const auto* ex : shown) {
      parts.examples_block += "\n\nQ: " + ex->question;
      parts.examples_block += "\nA: " + ex->ground_truth;
    }
  }

  parts.instruction =
      "Write " + std::to_string(config.candidates_per_iter) +
      " new prompts that improve on the prompts above. " +
      prompts::edit_clause(counter) +
      " compared with one of the prompts shown. Wrap each new prompt in " +
      prompts::kPromptOpenTag + prompts::kPromptCloseTag +
      " tags and output nothing else.";
  return parts;
}

std::vector<std::string> parse_tagged_prompts(const std::string& text) {
  std::vector<std::string> out;
  const std::string open = prompts::kPromptOpenTag;
  const std::string close = prompts::kPromptCloseTag;
  size_t pos = 0;
  while (true) {
    const size_t b = text.find(open, pos);
    if (b == std::string::npos) break;
    const size_t start = b + open.size();
    const size_t e = text.find(close, start);
    if (e == std::string::npos) break;
    out.push_back(trim(text.substr(start, e - start)));
    pos = e + close.size();
  }
  return out;
}

ProposalResult propose_candidates(const TaskSpec& task, const RunHistory& history,
                                  const MetaPromptParts& meta_prompt, int round,
                                  int counter, BackendRegistry& registry,
                                  const RunConfig& config) {
  ProposalResult result;
  const std::string base_text = meta_prompt.flatten();
  const std::string digest = short_digest({base_text});

  std::vector<std::string> known_texts;
  for (const auto* r : history.all_candidates()) {
    known_texts.push_back(normalize_whitespace(r->candidate.text));
  }

  const int wanted = config.candidates_per_iter;
  std::string request_text = base_text;
  bool any_tag_parsed = false;
  int attempts = 0;

  while (attempts < 1 + config.proposal_retries &&
         static_cast<int>(result.accepted.size()) < wanted) {
    ++attempts;
    ChatRequest req;
    req.messages = {{Role::User, request_text, {}}};
    req.temperature = config.optimizer_temperature;
    req.max_tokens = config.max_tokens_optimizer;
    req.model_id = config.optimizer_backend;
    req.purpose = CallPurpose::Optimize;
    const ChatResponse resp = registry.chat(config.optimizer_backend, req);

    const auto texts = parse_tagged_prompts(resp.text);
    any_tag_parsed = any_tag_parsed || !texts.empty();

    std::vector<RejectionRecord> attempt_rejections;
    for (const auto& text : texts) {
      if (static_cast<int>(result.accepted.size()) >= wanted) break;
      const std::string normalized = normalize_whitespace(text);
      if (normalized.empty()) {
        attempt_rejections.push_back({text, "empty prompt"});
        continue;
      }
      if (std::find(known_texts.begin(), known_texts.end(), normalized) !=
          known_texts.end()) {
        attempt_rejections.push_back({text, "duplicate of an existing candidate"});
        continue;
      }
      int nearest = -1;
      for (const auto& ref : meta_prompt.reference_texts) {
        const int d = word_edit_distance(text, ref);
        if (nearest < 0 || d < nearest) nearest = d;
      }
      if (nearest > counter) {
        attempt_rejections.push_back(
            {text, "edit distance " + std::to_string(nearest) +
                       " exceeds budget " + std::to_string(counter)});
        continue;
      }
      PromptCandidate c;
      c.candidate_id = make_candidate_id(task.task_id, round, text);
      c.text = text;
      c.iteration = round;
      c.source = CandidateSource::Optimizer;
      c.meta_prompt_digest = digest;
      result.accepted.push_back(std::move(c));
      known_texts.push_back(normalized);
    }
    result.rejections.insert(result.rejections.end(), attempt_rejections.begin(),
                             attempt_rejections.end());

    if (static_cast<int>(result.accepted.size()) >= wanted) break;
    if (texts.empty() || !attempt_rejections.empty()) {
      std::string notice = "\n\nNotice: these proposals were rejected:";
      if (texts.empty()) {
        notice = "\n\nNotice: your reply contained no " +
                 std::string(prompts::kPromptOpenTag) +
                 std::string(prompts::kPromptCloseTag) + " tags.";
      } else {
        for (const auto& r : attempt_rejections) {
          notice += "\n- \"" + r.text + "\": " + r.reason;
        }
      }
      notice += "\nWrite " +
                std::to_string(wanted - static_cast<int>(result.accepted.size())) +
                " new prompts obeying all constraints above, each wrapped in " +
                prompts::kPromptOpenTag + prompts::kPromptCloseTag + " tags.";
      request_text = base_text + notice;
      continue;
    }
    break;  // parsed cleanly, nothing rejected: take what was given
  }

  if (!any_tag_parsed) {
    throw MalformedOptimizerOutput(
        "optimizer produced no parseable " +
        std::string(prompts::kPromptOpenTag) + " tags after " +
        std::to_string(attempts) + " attempt(s)");
  }
  return result;
}

}  // namespace tpeval::optimizer
