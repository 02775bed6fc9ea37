#include "tpeval/http_backend.hpp"

#include <cstdlib>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "tpeval/errors.hpp"

namespace tpeval {

namespace {

// "http://host:1234/v1" -> ("http://host:1234", "/v1")
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("base_url needs a scheme: " + url);
  }
  const size_t path = url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path), prefix};
}

httplib::Headers auth_headers(const HttpEndpoint& endpoint) {
  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (!key || !*key) {
      throw ConfigError("environment variable " + endpoint.api_key_env +
                        " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  return headers;
}

std::string post_json(const HttpEndpoint& endpoint, const std::string& path,
                      const std::string& body,
                      const std::string& request_digest) {
  const auto [host, prefix] = split_base_url(endpoint.base_url);
  httplib::Client client(host);
  client.set_connection_timeout(endpoint.timeout_ms / 1000,
                                (endpoint.timeout_ms % 1000) * 1000);
  client.set_read_timeout(endpoint.timeout_ms / 1000,
                          (endpoint.timeout_ms % 1000) * 1000);
  client.set_write_timeout(endpoint.timeout_ms / 1000,
                           (endpoint.timeout_ms % 1000) * 1000);

  const auto result = client.Post(prefix + path, auth_headers(endpoint), body,
                                  "application/json");
  if (!result) {
    const auto err = result.error();
    const std::string what =
        "POST " + endpoint.base_url + path + ": " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout ||
        err == httplib::Error::Read || err == httplib::Error::Write) {
      throw TimeoutError(what, request_digest);
    }
    throw TransportError(what, request_digest);
  }
  if (result->status < 200 || result->status >= 300) {
    throw TransportError("POST " + endpoint.base_url + path + ": HTTP " +
                             std::to_string(result->status) + " " +
                             result->body.substr(0, 200),
                         request_digest);
  }
  return result->body;
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {}

ChatResponse HttpChatBackend::chat(const ChatRequest& request) {
  Json payload;
  payload["model"] = endpoint_.model;
  payload["messages"] = Json::array();
  for (const auto& msg : request.messages) {
    Json m;
    m["role"] = to_string(msg.role);
    if (msg.image_refs.empty()) {
      m["content"] = msg.text;
    } else {
      Json content = Json::array();
      content.push_back({{"type", "text"}, {"text", msg.text}});
      for (const auto& ref : msg.image_refs) {
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", ref}}}});
      }
      m["content"] = content;
    }
    payload["messages"].push_back(m);
  }
  payload["temperature"] = request.temperature;
  payload["max_tokens"] = request.max_tokens;

  const std::string digest = request_digest(request);
  const std::string body =
      post_json(endpoint_, "/chat/completions", payload.dump(), digest);

  try {
    const Json j = Json::parse(body);
    const Json& choice = j.at("choices").at(0);
    ChatResponse response;
    response.text = choice.at("message").at("content").get<std::string>();
    response.finish_reason = choice.value("finish_reason", "") == "length"
                                 ? FinishReason::Length
                                 : FinishReason::Normal;
    if (j.contains("usage")) {
      response.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      response.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return response;
  } catch (const Json::exception& e) {
    throw MalformedResponse(std::string("chat completion body unusable: ") +
                            e.what());
  }
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {}

EmbeddingVector HttpEmbeddingBackend::parse(const std::string& body,
                                            const std::string& text) const {
  try {
    const Json j = Json::parse(body);
    EmbeddingVector v;
    v.provider_id = endpoint_.model;
    v.values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    return v;
  } catch (const Json::exception& e) {
    throw MalformedResponse(std::string("embedding body unusable for \"") +
                            text.substr(0, 40) + "...\": " + e.what());
  }
}

EmbeddingVector HttpEmbeddingBackend::embed(const std::string& text) {
  Json payload;
  payload["model"] = endpoint_.model;
  payload["input"] = Json::array({text});
  const std::string digest = embedding_digest(endpoint_.model, text);
  return parse(post_json(endpoint_, "/embeddings", payload.dump(), digest),
               text);
}

}  // namespace tpeval
