#pragma once

#include <string>

#include "tpeval/backends.hpp"

namespace tpeval {

// OpenAI-style HTTP endpoint. Credentials come from the named environment
// variable only; nothing secret is ever written to config or cache files.
struct HttpEndpoint {
  std::string base_url;     // e.g. "http://127.0.0.1:8089/v1"
  std::string model;        // wire model name sent in the payload
  std::string api_key_env;  // env var holding the bearer token; empty = none
  int timeout_ms = 60000;
};

// POST {base_url}/chat/completions. Transport and HTTP-status failures throw
// TransportError (timeouts TimeoutError) and are retried by the registry;
// unusable 200 bodies throw MalformedResponse and are not.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpEndpoint endpoint);
  ChatResponse chat(const ChatRequest& request) override;

 private:
  HttpEndpoint endpoint_;
};

// POST {base_url}/embeddings with a single input text.
class HttpEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(HttpEndpoint endpoint);
  EmbeddingVector embed(const std::string& text) override;

 private:
  EmbeddingVector parse(const std::string& body, const std::string& text) const;
  HttpEndpoint endpoint_;
};

}  // namespace tpeval
