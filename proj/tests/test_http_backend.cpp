#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tpeval/errors.hpp"
#include "tpeval/http_backend.hpp"
#include "tpeval/json_codec.hpp"

namespace {

using namespace tpeval;

// One throwaway HTTP server on a kernel-assigned loopback port. Handlers are
// registered on `server` before start().
struct LoopbackServer {
  httplib::Server server;
  int port = 0;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LoopbackServer() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }
  std::string base_url(const std::string& prefix = "/v1") const {
    return "http://127.0.0.1:" + std::to_string(port) + prefix;
  }

 private:
  std::thread thread_;
};

// What the handler saw, for request-shape assertions.
struct Captured {
  std::mutex mutex;
  std::string path;
  std::string auth;
  Json body;

  void record(const httplib::Request& req) {
    std::lock_guard lock(mutex);
    path = req.path;
    auth = req.get_header_value("Authorization");
    body = Json::parse(req.body);
  }
};

ChatRequest sample_request() {
  ChatRequest request;
  request.messages = {{Role::System, "Be terse.", {}},
                      {Role::User, "What is shown?", {}}};
  request.temperature = 0.25;
  request.max_tokens = 77;
  request.model_id = "registry-id";  // wire name must come from the endpoint
  return request;
}

std::string chat_reply(const std::string& content,
                       const std::string& finish = "stop") {
  Json j;
  j["choices"] = Json::array({Json{
      {"message", Json{{"role", "assistant"}, {"content", content}}},
      {"finish_reason", finish}}});
  j["usage"] = Json{{"prompt_tokens", 5}, {"completion_tokens", 7}};
  return j.dump();
}

}  // namespace

TEST_CASE("chat sends an OpenAI-style payload and parses the reply") {
  LoopbackServer loopback;
  Captured captured;
  loopback.server.Post("/v1/chat/completions",
                       [&](const httplib::Request& req, httplib::Response& res) {
                         captured.record(req);
                         res.set_content(chat_reply("The answer is B."),
                                         "application/json");
                       });
  loopback.start();

  setenv("TPEVAL_TEST_KEY", "sk-test-123", 1);
  HttpEndpoint endpoint;
  endpoint.base_url = loopback.base_url();
  endpoint.model = "wire-model";
  endpoint.api_key_env = "TPEVAL_TEST_KEY";
  HttpChatBackend backend(endpoint);

  const ChatResponse response = backend.chat(sample_request());
  CHECK(response.text == "The answer is B.");
  CHECK(response.finish_reason == FinishReason::Normal);
  CHECK(response.prompt_tokens == 5);
  CHECK(response.completion_tokens == 7);

  std::lock_guard lock(captured.mutex);
  CHECK(captured.path == "/v1/chat/completions");
  CHECK(captured.auth == "Bearer sk-test-123");
  CHECK(captured.body.at("model") == "wire-model");
  CHECK(captured.body.at("temperature").get<double>() == 0.25);
  CHECK(captured.body.at("max_tokens").get<int>() == 77);
  REQUIRE(captured.body.at("messages").size() == 2);
  CHECK(captured.body["messages"][0]["role"] == "system");
  CHECK(captured.body["messages"][0]["content"] == "Be terse.");
  CHECK(captured.body["messages"][1]["role"] == "user");
  CHECK(captured.body["messages"][1]["content"] == "What is shown?");
}

TEST_CASE("image refs become a structured content array") {
  LoopbackServer loopback;
  Captured captured;
  loopback.server.Post("/v1/chat/completions",
                       [&](const httplib::Request& req, httplib::Response& res) {
                         captured.record(req);
                         res.set_content(chat_reply("ok"), "application/json");
                       });
  loopback.start();

  HttpEndpoint endpoint;
  endpoint.base_url = loopback.base_url();
  endpoint.model = "wire-model";  // no api_key_env: no Authorization header
  HttpChatBackend backend(endpoint);

  ChatRequest request;
  request.messages = {
      {Role::User, "Look at these.", {"file://a.png", "file://b.png"}}};
  backend.chat(request);

  std::lock_guard lock(captured.mutex);
  CHECK(captured.auth.empty());
  const Json& content = captured.body["messages"][0]["content"];
  REQUIRE(content.is_array());
  REQUIRE(content.size() == 3);
  CHECK(content[0]["type"] == "text");
  CHECK(content[0]["text"] == "Look at these.");
  CHECK(content[1]["type"] == "image_url");
  CHECK(content[1]["image_url"]["url"] == "file://a.png");
  CHECK(content[2]["image_url"]["url"] == "file://b.png");
}

TEST_CASE("a length finish reason survives parsing") {
  LoopbackServer loopback;
  loopback.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                         res.set_content(chat_reply("truncat", "length"),
                                         "application/json");
                       });
  loopback.start();

  HttpEndpoint endpoint;
  endpoint.base_url = loopback.base_url();
  endpoint.model = "wire-model";
  HttpChatBackend backend(endpoint);
  CHECK(backend.chat(sample_request()).finish_reason == FinishReason::Length);
}

TEST_CASE("non-2xx statuses throw TransportError with the status text") {
  LoopbackServer loopback;
  loopback.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                         res.status = 500;
                         res.set_content("overloaded", "text/plain");
                       });
  loopback.start();

  HttpEndpoint endpoint;
  endpoint.base_url = loopback.base_url();
  endpoint.model = "wire-model";
  HttpChatBackend backend(endpoint);
  try {
    backend.chat(sample_request());
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    const std::string what = e.what();
    CHECK(what.find("HTTP 500") != std::string::npos);
    CHECK(what.find("overloaded") != std::string::npos);
    CHECK(!e.request_digest().empty());
  }
}

TEST_CASE("an unusable 200 body throws MalformedResponse, not TransportError") {
  LoopbackServer loopback;
  loopback.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                         res.set_content("{\"choices\": []}", "application/json");
                       });
  loopback.server.Post("/v1/embeddings",
                       [&](const httplib::Request&, httplib::Response& res) {
                         res.set_content("not json at all", "text/plain");
                       });
  loopback.start();

  HttpEndpoint endpoint;
  endpoint.base_url = loopback.base_url();
  endpoint.model = "wire-model";
  HttpChatBackend chat(endpoint);
  CHECK_THROWS_AS(chat.chat(sample_request()), MalformedResponse);
  HttpEmbeddingBackend embedder(endpoint);
  CHECK_THROWS_AS(embedder.embed("text"), MalformedResponse);
}

TEST_CASE("a connection that never opens is a TransportError") {
  HttpEndpoint endpoint;
  endpoint.base_url = "http://127.0.0.1:1/v1";  // nothing listens on port 1
  endpoint.model = "wire-model";
  endpoint.timeout_ms = 2000;
  HttpChatBackend backend(endpoint);
  CHECK_THROWS_AS(backend.chat(sample_request()), TransportError);
}

TEST_CASE("endpoint misconfiguration is ConfigError before any request") {
  HttpEndpoint no_scheme;
  no_scheme.base_url = "127.0.0.1:8089/v1";
  no_scheme.model = "wire-model";
  CHECK_THROWS_WITH_AS(HttpChatBackend(no_scheme).chat(sample_request()),
                       doctest::Contains("needs a scheme"), ConfigError);

  unsetenv("TPEVAL_UNSET_KEY");
  HttpEndpoint unset_key;
  unset_key.base_url = "http://127.0.0.1:1/v1";
  unset_key.model = "wire-model";
  unset_key.api_key_env = "TPEVAL_UNSET_KEY";
  CHECK_THROWS_WITH_AS(HttpChatBackend(unset_key).chat(sample_request()),
                       doctest::Contains("TPEVAL_UNSET_KEY is not set"),
                       ConfigError);
}

TEST_CASE("embeddings post one input and parse the vector") {
  LoopbackServer loopback;
  Captured captured;
  loopback.server.Post("/v1/embeddings",
                       [&](const httplib::Request& req, httplib::Response& res) {
                         captured.record(req);
                         Json j;
                         j["data"] = Json::array(
                             {Json{{"embedding", {0.1, -0.2, 0.3}}}});
                         res.set_content(j.dump(), "application/json");
                       });
  loopback.start();

  setenv("TPEVAL_TEST_KEY", "sk-embed", 1);
  HttpEndpoint endpoint;
  endpoint.base_url = loopback.base_url();
  endpoint.model = "embed-model";
  endpoint.api_key_env = "TPEVAL_TEST_KEY";
  HttpEmbeddingBackend backend(endpoint);

  const EmbeddingVector v = backend.embed("hello");
  CHECK(v.values == std::vector<double>{0.1, -0.2, 0.3});
  CHECK(v.provider_id == "embed-model");

  std::lock_guard lock(captured.mutex);
  CHECK(captured.path == "/v1/embeddings");
  CHECK(captured.auth == "Bearer sk-embed");
  CHECK(captured.body.at("model") == "embed-model");
  REQUIRE(captured.body.at("input").is_array());
  CHECK(captured.body.at("input")[0] == "hello");
}

TEST_CASE("a base_url without a path prefix posts to the bare path") {
  LoopbackServer loopback;
  Captured captured;
  loopback.server.Post("/chat/completions",
                       [&](const httplib::Request& req, httplib::Response& res) {
                         captured.record(req);
                         res.set_content(chat_reply("ok"), "application/json");
                       });
  loopback.start();

  HttpEndpoint endpoint;
  endpoint.base_url = loopback.base_url("");  // no /v1
  endpoint.model = "wire-model";
  HttpChatBackend backend(endpoint);
  CHECK(backend.chat(sample_request()).text == "ok");
  std::lock_guard lock(captured.mutex);
  CHECK(captured.path == "/chat/completions");
}
