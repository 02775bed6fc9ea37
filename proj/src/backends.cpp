#include "tpeval/backends.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <thread>

#include "tpeval/digest.hpp"
#include "tpeval/errors.hpp"

namespace tpeval {

const char* to_string(Role r) {
  switch (r) {
    case Role::System:
      return "system";
    case Role::User:
      return "user";
    default:
      return "assistant";
  }
}

const char* to_string(FinishReason r) {
  switch (r) {
    case FinishReason::Normal:
      return "normal";
    case FinishReason::Length:
      return "length";
    default:
      return "error";
  }
}

const char* to_string(CallPurpose p) {
  switch (p) {
    case CallPurpose::Score:
      return "score";
    case CallPurpose::Extract:
      return "extract";
    case CallPurpose::Introspect:
      return "introspect";
    case CallPurpose::Optimize:
      return "optimize";
    case CallPurpose::ZeroShot:
      return "zero_shot";
    default:
      return "other";
  }
}

const std::string& ChatRequest::last_user_text() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) return it->text;
  }
  static const std::string empty;
  return empty;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw DimensionMismatch("embedding dimensions differ: " +
                            std::to_string(a.values.size()) + " vs " +
                            std::to_string(b.values.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  bool identical = true;
  for (size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
    identical = identical && a.values[i] == b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  if (identical) return 1.0;  // avoid 0.999... from rounding in the norms
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string request_digest(const ChatRequest& request) {
  Json j;
  j["model_id"] = request.model_id;
  Json msgs = Json::array();
  for (const auto& m : request.messages) {
    Json jm;
    jm["role"] = to_string(m.role);
    jm["text"] = m.text;
    jm["image_refs"] = m.image_refs;
    msgs.push_back(jm);
  }
  j["messages"] = msgs;
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_tokens;
  return sha256_hex(j.dump());
}

std::string embedding_digest(const std::string& backend_id,
                             const std::string& text) {
  Json j;
  j["embed"] = backend_id;
  j["text"] = text;
  return sha256_hex(j.dump());
}

std::optional<std::string> ResponseCache::get(const std::string& backend_id,
                                              const std::string& digest) const {
  const auto path = root_ / backend_id / (digest + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return payload;
}

void ResponseCache::put(const std::string& backend_id,
                        const std::string& digest,
                        const std::string& payload) {
  const auto dir = root_ / backend_id;
  std::filesystem::create_directories(dir);
  const auto path = dir / (digest + ".json");
  const auto tmp = dir / (digest + ".tmp" + std::to_string(
                              std::hash<std::thread::id>{}(
                                  std::this_thread::get_id())));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << payload;
  }
  std::filesystem::rename(tmp, path);
}

namespace {

Json response_to_payload(const ChatResponse& r) {
  Json j;
  j["text"] = r.text;
  j["finish_reason"] = to_string(r.finish_reason);
  j["prompt_tokens"] = r.prompt_tokens;
  j["completion_tokens"] = r.completion_tokens;
  return j;
}

ChatResponse response_from_payload(const std::string& payload) {
  Json j = Json::parse(payload);
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  const auto fr = j.at("finish_reason").get<std::string>();
  r.finish_reason = fr == "normal"   ? FinishReason::Normal
                    : fr == "length" ? FinishReason::Length
                                     : FinishReason::Error;
  r.prompt_tokens = j.value("prompt_tokens", 0);
  r.completion_tokens = j.value("completion_tokens", 0);
  return r;
}

// Bounded in-flight window with a high-water mark for observability.
class InFlightWindow {
 public:
  explicit InFlightWindow(int limit) : limit_(limit) {}

  void enter(std::atomic<int>& max_seen) {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
    int prev = max_seen.load();
    while (active_ > prev && !max_seen.compare_exchange_weak(prev, active_)) {
    }
  }
  void leave() {
    {
      std::lock_guard lock(m_);
      --active_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
};

}  // namespace

struct BackendRegistry::Entry {
  std::string id;
  std::shared_ptr<ChatBackend> chat;
  std::shared_ptr<EmbeddingBackend> embedder;
  BackendPolicy policy;
  std::unique_ptr<InFlightWindow> window;
  std::optional<size_t> embedding_dim;

  std::atomic<long> transport_calls{0};
  std::atomic<long> cache_hits{0};
  std::atomic<long> retries{0};
  std::atomic<long> failures{0};
  std::atomic<int> max_in_flight{0};
  std::mutex purpose_mutex;
  std::map<std::string, long> calls_by_purpose;

  void count_purpose(CallPurpose p) {
    std::lock_guard lock(purpose_mutex);
    ++calls_by_purpose[to_string(p)];
  }
};

struct BackendRegistry::Impl {
  std::shared_ptr<ResponseCache> cache;
  mutable std::mutex mutex;
  std::map<std::string, std::unique_ptr<Entry>> entries;
};

BackendRegistry::BackendRegistry() : impl_(std::make_unique<Impl>()) {}

BackendRegistry::BackendRegistry(std::shared_ptr<ResponseCache> cache)
    : impl_(std::make_unique<Impl>()) {
  impl_->cache = std::move(cache);
}

BackendRegistry::~BackendRegistry() = default;

void BackendRegistry::register_chat(const std::string& backend_id,
                                    std::shared_ptr<ChatBackend> backend,
                                    BackendPolicy policy) {
  std::lock_guard lock(impl_->mutex);
  auto& entry = impl_->entries[backend_id];
  if (!entry) {
    entry = std::make_unique<Entry>();
    entry->id = backend_id;
  }
  entry->chat = std::move(backend);
  entry->policy = policy;
  entry->window = std::make_unique<InFlightWindow>(policy.concurrency_limit);
}

void BackendRegistry::register_embedder(const std::string& backend_id,
                                        std::shared_ptr<EmbeddingBackend> backend,
                                        BackendPolicy policy) {
  std::lock_guard lock(impl_->mutex);
  auto& entry = impl_->entries[backend_id];
  if (!entry) {
    entry = std::make_unique<Entry>();
    entry->id = backend_id;
  }
  entry->embedder = std::move(backend);
  entry->policy = policy;
  entry->window = std::make_unique<InFlightWindow>(policy.concurrency_limit);
}

bool BackendRegistry::has_chat(const std::string& backend_id) const {
  std::lock_guard lock(impl_->mutex);
  auto it = impl_->entries.find(backend_id);
  return it != impl_->entries.end() && it->second->chat != nullptr;
}

bool BackendRegistry::has_embedder(const std::string& backend_id) const {
  std::lock_guard lock(impl_->mutex);
  auto it = impl_->entries.find(backend_id);
  return it != impl_->entries.end() && it->second->embedder != nullptr;
}

BackendRegistry::Entry& BackendRegistry::find(
    const std::string& backend_id) const {
  std::lock_guard lock(impl_->mutex);
  auto it = impl_->entries.find(backend_id);
  if (it == impl_->entries.end()) {
    throw Error("backend '" + backend_id + "' is not registered");
  }
  return *it->second;
}

namespace {

template <typename Fn>
auto with_retries(const BackendPolicy& policy, std::atomic<long>& retries,
                  std::atomic<long>& failures, const std::string& digest,
                  Fn&& fn) {
  int attempt = 0;
  for (;;) {
    try {
      return fn();
    } catch (const TransportError&) {
      ++failures;
      if (attempt >= policy.max_retries) throw;
      if (!policy.backoff_ms.empty()) {
        const size_t idx = std::min<size_t>(attempt, policy.backoff_ms.size() - 1);
        const int ms = policy.backoff_ms[idx];
        if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
      }
      ++retries;
      ++attempt;
    } catch (const Error&) {
      ++failures;
      throw;
    } catch (const std::exception& e) {
      ++failures;
      throw TransportError(e.what(), digest);
    }
  }
}

}  // namespace

ChatResponse BackendRegistry::chat(const std::string& backend_id,
                                   const ChatRequest& request) {
  Entry& entry = find(backend_id);
  if (!entry.chat) {
    throw Error("backend '" + backend_id + "' has no chat endpoint");
  }
  entry.count_purpose(request.purpose);
  const std::string digest = request_digest(request);

  if (impl_->cache && entry.policy.cache_enabled) {
    if (auto hit = impl_->cache->get(backend_id, digest)) {
      ++entry.cache_hits;
      return response_from_payload(*hit);
    }
  }

  auto response = with_retries(
      entry.policy, entry.retries, entry.failures, digest, [&] {
        entry.window->enter(entry.max_in_flight);
        ++entry.transport_calls;
        struct Leave {
          InFlightWindow* w;
          ~Leave() { w->leave(); }
        } leave{entry.window.get()};
        return entry.chat->chat(request);
      });

  if (impl_->cache && entry.policy.cache_enabled) {
    impl_->cache->put(backend_id, digest, response_to_payload(response).dump());
  }
  return response;
}

EmbeddingVector BackendRegistry::embed(const std::string& backend_id,
                                       const std::string& text) {
  if (text.empty()) throw Error("embed requires non-empty text");
  Entry& entry = find(backend_id);
  if (!entry.embedder) {
    throw Error("backend '" + backend_id + "' has no embedding endpoint");
  }
  const std::string digest = embedding_digest(backend_id, text);

  EmbeddingVector vec;
  bool from_cache = false;
  if (impl_->cache && entry.policy.cache_enabled) {
    if (auto hit = impl_->cache->get(backend_id, digest)) {
      ++entry.cache_hits;
      Json j = Json::parse(*hit);
      vec.values = j.at("values").get<std::vector<double>>();
      vec.provider_id = j.at("provider_id").get<std::string>();
      from_cache = true;
    }
  }
  if (!from_cache) {
    vec = with_retries(entry.policy, entry.retries, entry.failures,
                       digest, [&] {
                         entry.window->enter(entry.max_in_flight);
                         ++entry.transport_calls;
                         struct Leave {
                           InFlightWindow* w;
                           ~Leave() { w->leave(); }
                         } leave{entry.window.get()};
                         return entry.embedder->embed(text);
                       });
    for (double v : vec.values) {
      if (!std::isfinite(v)) {
        throw MalformedResponse("embedding from '" + backend_id +
                                "' contains non-finite entries");
      }
    }
    if (impl_->cache && entry.policy.cache_enabled) {
      Json j;
      j["values"] = vec.values;
      j["provider_id"] = vec.provider_id;
      impl_->cache->put(backend_id, digest, j.dump());
    }
  }

  if (entry.embedding_dim && *entry.embedding_dim != vec.values.size()) {
    throw DimensionMismatch("provider '" + backend_id +
                            "' changed embedding dimension mid-run");
  }
  entry.embedding_dim = vec.values.size();
  return vec;
}

BackendStats BackendRegistry::stats(const std::string& backend_id) const {
  Entry& entry = find(backend_id);
  BackendStats s;
  s.transport_calls = entry.transport_calls;
  s.cache_hits = entry.cache_hits;
  s.retries = entry.retries;
  s.failures = entry.failures;
  s.max_in_flight = entry.max_in_flight;
  {
    std::lock_guard lock(entry.purpose_mutex);
    s.calls_by_purpose = entry.calls_by_purpose;
  }
  return s;
}

Json BackendRegistry::stats_json() const {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(impl_->mutex);
    for (const auto& [id, _] : impl_->entries) ids.push_back(id);
  }
  Json j = Json::object();
  for (const auto& id : ids) {
    const auto s = stats(id);
    Json e;
    e["transport_calls"] = s.transport_calls;
    e["cache_hits"] = s.cache_hits;
    e["retries"] = s.retries;
    e["failures"] = s.failures;
    e["max_in_flight"] = s.max_in_flight;
    e["calls_by_purpose"] = s.calls_by_purpose;
    j[id] = e;
  }
  return j;
}

}  // namespace tpeval
