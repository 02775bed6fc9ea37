#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tpeval/json_codec.hpp"

namespace tpeval {

enum class Role { System, User, Assistant };
enum class FinishReason { Normal, Length, Error };

// Why the engine is making a call. Not part of the wire payload or the cache
// key; used only for per-purpose accounting.
enum class CallPurpose { Score, Extract, Introspect, Optimize, ZeroShot, Other };

const char* to_string(Role r);
const char* to_string(FinishReason r);
const char* to_string(CallPurpose p);

struct ChatMessage {
  Role role = Role::User;
  std::string text;
  std::vector<std::string> image_refs;  // opaque URIs, forwarded untouched
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 512;
  std::string model_id;
  CallPurpose purpose = CallPurpose::Other;

  const std::string& last_user_text() const;
};

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::Normal;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_id;
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Cache key: model id, full message payload, temperature, max_tokens.
// Policy fields and purpose are deliberately excluded.
std::string request_digest(const ChatRequest& request);
std::string embedding_digest(const std::string& backend_id,
                             const std::string& text);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual EmbeddingVector embed(const std::string& text) = 0;
};

struct BackendPolicy {
  int max_retries = 3;
  std::vector<int> backoff_ms = {100, 400, 1600};  // attempt i sleeps [i]
  int concurrency_limit = 4;
  int timeout_ms = 60000;
  bool cache_enabled = true;
};

// Content-addressed response store: cache/<backend_id>/<digest>.json.
// Concurrent writers of the same digest race harmlessly (values are
// content-equal); writes go through a temp file + rename.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

  std::optional<std::string> get(const std::string& backend_id,
                                 const std::string& digest) const;
  void put(const std::string& backend_id, const std::string& digest,
           const std::string& payload);
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

struct BackendStats {
  long transport_calls = 0;
  long cache_hits = 0;
  long retries = 0;
  long failures = 0;
  int max_in_flight = 0;
  std::map<std::string, long> calls_by_purpose;
};

// Uniform front door for every model role. Applies, per backend id:
// response cache, retry with backoff, and a bounded in-flight window.
class BackendRegistry {
 public:
  BackendRegistry();
  explicit BackendRegistry(std::shared_ptr<ResponseCache> cache);
  ~BackendRegistry();

  void register_chat(const std::string& backend_id,
                     std::shared_ptr<ChatBackend> backend,
                     BackendPolicy policy = {});
  void register_embedder(const std::string& backend_id,
                         std::shared_ptr<EmbeddingBackend> backend,
                         BackendPolicy policy = {});

  bool has_chat(const std::string& backend_id) const;
  bool has_embedder(const std::string& backend_id) const;

  ChatResponse chat(const std::string& backend_id, const ChatRequest& request);
  EmbeddingVector embed(const std::string& backend_id, const std::string& text);

  BackendStats stats(const std::string& backend_id) const;
  Json stats_json() const;

 private:
  // All state lives behind Impl so Entry (with its atomics and in-flight
  // window) stays out of this header.
  struct Entry;
  struct Impl;
  Entry& find(const std::string& backend_id) const;

  std::unique_ptr<Impl> impl_;
};

}  // namespace tpeval
