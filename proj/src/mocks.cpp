#include "tpeval/mocks.hpp"

#include <algorithm>
#include <random>
#include <regex>
#include <set>

#include "tpeval/digest.hpp"
#include "tpeval/errors.hpp"

namespace tpeval {

namespace {

std::optional<int> parse_round(const std::string& text) {
  static const std::regex re(R"(Round: (\d+) of \d+)");
  std::smatch m;
  if (std::regex_search(text, m, re)) return std::stoi(m[1].str());
  return std::nullopt;
}

ChatResponse make_response(std::string text) {
  ChatResponse r;
  r.text = std::move(text);
  r.finish_reason = FinishReason::Normal;
  return r;
}

}  // namespace

ChatResponse ScriptedChatBackend::chat(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  seen_.push_back(request);

  const std::string digest = request_digest(request);
  if (auto it = by_digest.find(digest); it != by_digest.end()) {
    return make_response(it->second);
  }
  if (auto round = parse_round(request.last_user_text())) {
    if (auto it = by_round.find(*round); it != by_round.end()) {
      const auto& entries = it->second;
      if (!entries.empty()) {
        const size_t call = round_calls_[*round]++;
        return make_response(entries[std::min(call, entries.size() - 1)]);
      }
    }
  }
  if (sequence_pos_ < sequence.size()) {
    return make_response(sequence[sequence_pos_++]);
  }
  if (default_reply) return make_response(*default_reply);
  throw MalformedResponse("scripted backend has no reply for request " +
                          digest.substr(0, 12));
}

std::vector<ChatRequest> ScriptedChatBackend::requests_seen() const {
  std::lock_guard lock(mutex_);
  return seen_;
}

long ScriptedChatBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return static_cast<long>(seen_.size());
}

ChatResponse CallbackChatBackend::chat(const ChatRequest& request) {
  {
    std::lock_guard lock(mutex_);
    seen_.push_back(request);
  }
  return make_response(fn_(request));
}

long CallbackChatBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return static_cast<long>(seen_.size());
}

std::vector<ChatRequest> CallbackChatBackend::requests_seen() const {
  std::lock_guard lock(mutex_);
  return seen_;
}

std::map<std::string, double> ladder_difficulties(
    const std::vector<ExampleItem>& examples) {
  std::map<std::string, double> out;
  const double n = static_cast<double>(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    out[examples[i].example_id] = (static_cast<double>(i) + 0.5) / n;
  }
  return out;
}

std::map<std::string, double> seeded_difficulties(
    const std::vector<ExampleItem>& examples, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::map<std::string, double> out;
  for (const auto& ex : examples) {
    // top 53 bits -> [0,1); avoids implementation-defined distributions
    out[ex.example_id] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }
  return out;
}

SyntheticModelBackend::SyntheticModelBackend(SyntheticModelSpec spec)
    : spec_(std::move(spec)) {}

SyntheticModelBackend::SyntheticModelBackend(SyntheticModelSpec spec,
                                             TaskSpec task,
                                             std::vector<ExampleItem> examples)
    : spec_(std::move(spec)) {
  tasks_.push_back({std::move(task), std::move(examples)});
}

void SyntheticModelBackend::add_task(TaskSpec task,
                                     std::vector<ExampleItem> examples,
                                     std::map<std::string, double> difficulties) {
  spec_.difficulties.merge(difficulties);
  tasks_.push_back({std::move(task), std::move(examples)});
}

double SyntheticModelBackend::prompt_threshold(
    const std::string& prompt_text) const {
  const auto tokens = tokenize_words(prompt_text);
  const std::set<std::string> present(tokens.begin(), tokens.end());
  double t = spec_.base;
  for (const auto& [word, bonus] : spec_.keyword_bonuses) {
    if (present.count(word)) t += bonus;
  }
  return std::clamp(t, 0.0, 1.0);
}

bool SyntheticModelBackend::answers_correctly(
    const std::string& prompt_text, const std::string& example_id) const {
  const auto it = spec_.difficulties.find(example_id);
  if (it == spec_.difficulties.end()) {
    throw Error("synthetic model has no difficulty for example '" +
                example_id + "'");
  }
  return it->second < prompt_threshold(prompt_text);
}

SyntheticModelBackend::Resolved SyntheticModelBackend::resolve_example(
    const ChatRequest& request) const {
  // Images are the reliable per-example signal; question text is a fallback
  // for image-free fixtures.
  for (const auto& msg : request.messages) {
    for (const auto& ref : msg.image_refs) {
      for (const auto& entry : tasks_) {
        for (const auto& ex : entry.examples) {
          for (const auto& r : ex.image_refs) {
            if (r == ref) return {&entry.task, &ex};
          }
        }
      }
    }
  }
  const std::string& text = request.last_user_text();
  Resolved found;
  for (const auto& entry : tasks_) {
    for (const auto& ex : entry.examples) {
      if (!ex.question.empty() && text.find(ex.question) != std::string::npos) {
        if (found.example) return {};  // ambiguous
        found = {&entry.task, &ex};
      }
    }
  }
  return found;
}

ChatResponse SyntheticModelBackend::chat(const ChatRequest& request) {
  const auto [task, ex] = resolve_example(request);
  if (!ex) {
    throw MalformedResponse(
        "synthetic model cannot resolve an example from the request");
  }
  const bool correct = answers_correctly(request.last_user_text(),
                                         ex->example_id);
  std::string label;
  if (task->option_labels.empty()) {
    label = correct ? ex->ground_truth : ex->ground_truth + "_wrong";
    return make_response(label);
  }
  if (correct) {
    label = ex->ground_truth;
  } else {
    const auto& labels = task->option_labels;
    auto it = std::find(labels.begin(), labels.end(), ex->ground_truth);
    const size_t idx = it == labels.end() ? 0 : (it - labels.begin());
    label = labels[(idx + 1) % labels.size()];
  }
  return make_response("The answer is " + label + ".");
}

EmbeddingVector HashingEmbedder::embed(const std::string& text) {
  const std::string hex = sha256_hex(text);
  uint64_t seed = 0;
  for (int i = 0; i < 16; ++i) {
    seed = seed * 16 + (hex[i] <= '9' ? hex[i] - '0' : hex[i] - 'a' + 10);
  }
  std::mt19937_64 rng(seed);
  EmbeddingVector v;
  v.provider_id = "hashing";
  v.values.resize(dim_);
  for (size_t i = 0; i < dim_; ++i) {
    v.values[i] = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
  }
  return v;
}

size_t TokenOverlapEmbedder::bucket(const std::string& token) const {
  // FNV-1a 64
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<size_t>(h % dim_);
}

EmbeddingVector TokenOverlapEmbedder::embed(const std::string& text) {
  EmbeddingVector v;
  v.provider_id = "token_overlap";
  v.values.assign(dim_, 0.0);
  for (const auto& token : tokenize_words(text)) {
    v.values[bucket(token)] += 1.0;
  }
  return v;
}

EmbeddingVector StaticEmbedder::embed(const std::string& text) {
  auto it = table_.find(text);
  if (it == table_.end()) {
    throw Error("static embedder has no vector for: " + text);
  }
  EmbeddingVector v;
  v.provider_id = "static";
  v.values = it->second;
  return v;
}

ChatResponse FlakyChatBackend::chat(const ChatRequest& request) {
  {
    std::lock_guard lock(mutex_);
    ++attempts_;
    if (remaining_failures_ > 0) {
      --remaining_failures_;
      throw TransportError("injected transport failure",
                           request_digest(request));
    }
  }
  return inner_->chat(request);
}

long FlakyChatBackend::attempts() const {
  std::lock_guard lock(mutex_);
  return attempts_;
}

ChatResponse TripwireChatBackend::chat(const ChatRequest& request) {
  if (trip_(request)) {
    throw TransportError("tripwire fired", request_digest(request));
  }
  return inner_->chat(request);
}

}  // namespace tpeval
