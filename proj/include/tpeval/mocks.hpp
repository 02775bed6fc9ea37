#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tpeval/backends.hpp"
#include "tpeval/domain.hpp"

namespace tpeval {

// Deterministic chat mock. Resolution order per request:
//   1. by_digest[request_digest]
//   2. by_round[n] where n is parsed from a "Round: n of N" line in the
//      request (repeat calls for the same round walk the entry list; the
//      last entry sticks)
//   3. next unread entry of `sequence`
//   4. `default_reply`
// Anything else throws. Every request is recorded for assertions.
class ScriptedChatBackend : public ChatBackend {
 public:
  std::map<std::string, std::string> by_digest;
  std::map<int, std::vector<std::string>> by_round;
  std::vector<std::string> sequence;
  std::optional<std::string> default_reply;

  ChatResponse chat(const ChatRequest& request) override;

  std::vector<ChatRequest> requests_seen() const;
  long call_count() const;

 private:
  mutable std::mutex mutex_;
  std::vector<ChatRequest> seen_;
  std::map<int, size_t> round_calls_;
  size_t sequence_pos_ = 0;
};

// Computes the reply from the request; handy for analyzer mocks.
class CallbackChatBackend : public ChatBackend {
 public:
  explicit CallbackChatBackend(
      std::function<std::string(const ChatRequest&)> fn)
      : fn_(std::move(fn)) {}

  ChatResponse chat(const ChatRequest& request) override;
  long call_count() const;
  std::vector<ChatRequest> requests_seen() const;

 private:
  std::function<std::string(const ChatRequest&)> fn_;
  mutable std::mutex mutex_;
  std::vector<ChatRequest> seen_;
};

// Model-under-test stand-in with a planted accuracy rule: it answers the
// ground truth iff the example's difficulty is below base plus the bonuses of
// the spec keywords present in the rendered prompt (clamped to [0,1]);
// otherwise it answers the label circularly next after the ground truth.
struct SyntheticModelSpec {
  double base = 0.4;
  std::map<std::string, double> keyword_bonuses;  // lowercase word -> bonus
  std::map<std::string, double> difficulties;     // example_id -> d in [0,1]
};

// d_e = (index + 0.5) / n in file order.
std::map<std::string, double> ladder_difficulties(
    const std::vector<ExampleItem>& examples);

// d_e drawn uniformly from a seeded mt19937_64, in file order.
std::map<std::string, double> seeded_difficulties(
    const std::vector<ExampleItem>& examples, uint64_t seed);

class SyntheticModelBackend : public ChatBackend {
 public:
  explicit SyntheticModelBackend(SyntheticModelSpec spec);
  SyntheticModelBackend(SyntheticModelSpec spec, TaskSpec task,
                        std::vector<ExampleItem> examples);

  // Registers another task this model can answer. Per-example difficulties
  // merge into the spec; omit them if the spec already has these examples.
  void add_task(TaskSpec task, std::vector<ExampleItem> examples,
                std::map<std::string, double> difficulties = {});

  ChatResponse chat(const ChatRequest& request) override;

  // The planted rule, exposed so callers can reason about it directly.
  double prompt_threshold(const std::string& prompt_text) const;
  bool answers_correctly(const std::string& prompt_text,
                         const std::string& example_id) const;
  const SyntheticModelSpec& spec() const { return spec_; }

 private:
  struct Resolved {
    const TaskSpec* task = nullptr;
    const ExampleItem* example = nullptr;
  };
  Resolved resolve_example(const ChatRequest& request) const;

  struct TaskEntry {
    TaskSpec task;
    std::vector<ExampleItem> examples;
  };
  SyntheticModelSpec spec_;
  std::vector<TaskEntry> tasks_;
};

// Pseudo-random unit-scale vector derived from the text's content hash.
// Identical text always embeds identically.
class HashingEmbedder : public EmbeddingBackend {
 public:
  explicit HashingEmbedder(size_t dim = 64) : dim_(dim) {}
  EmbeddingVector embed(const std::string& text) override;

 private:
  size_t dim_;
};

// Bag-of-words counts hashed into a fixed number of buckets. Texts with
// identical token multisets embed identically (cosine 1); token-disjoint
// texts are orthogonal unless buckets collide.
class TokenOverlapEmbedder : public EmbeddingBackend {
 public:
  explicit TokenOverlapEmbedder(size_t dim = 4096) : dim_(dim) {}
  EmbeddingVector embed(const std::string& text) override;
  size_t bucket(const std::string& token) const;

 private:
  size_t dim_;
};

// Fixed text -> vector table for handcrafted geometry (e.g. negative cosine).
class StaticEmbedder : public EmbeddingBackend {
 public:
  explicit StaticEmbedder(std::map<std::string, std::vector<double>> table)
      : table_(std::move(table)) {}
  EmbeddingVector embed(const std::string& text) override;

 private:
  std::map<std::string, std::vector<double>> table_;
};

// Fails the first `fail_count` transport attempts, then delegates.
class FlakyChatBackend : public ChatBackend {
 public:
  FlakyChatBackend(std::shared_ptr<ChatBackend> inner, int fail_count)
      : inner_(std::move(inner)), remaining_failures_(fail_count) {}
  ChatResponse chat(const ChatRequest& request) override;
  long attempts() const;

 private:
  std::shared_ptr<ChatBackend> inner_;
  mutable std::mutex mutex_;
  int remaining_failures_;
  long attempts_ = 0;
};

// Throws TransportError whenever the predicate matches; used to simulate an
// interrupt at a precise point in a run.
class TripwireChatBackend : public ChatBackend {
 public:
  TripwireChatBackend(std::shared_ptr<ChatBackend> inner,
                      std::function<bool(const ChatRequest&)> trip)
      : inner_(std::move(inner)), trip_(std::move(trip)) {}
  ChatResponse chat(const ChatRequest& request) override;

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::function<bool(const ChatRequest&)> trip_;
};

}  // namespace tpeval
