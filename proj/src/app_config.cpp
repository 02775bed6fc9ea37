#include "tpeval/app_config.hpp"

#include <algorithm>
#include <fstream>

#include "tpeval/errors.hpp"
#include "tpeval/http_backend.hpp"
#include "tpeval/mocks.hpp"

namespace tpeval::app {

namespace {

BackendPolicy parse_policy(const Json& j) {
  BackendPolicy p;
  p.max_retries = j.value("max_retries", p.max_retries);
  if (j.contains("backoff_ms")) {
    p.backoff_ms = j.at("backoff_ms").get<std::vector<int>>();
  }
  p.concurrency_limit = j.value("concurrency_limit", p.concurrency_limit);
  p.timeout_ms = j.value("timeout_ms", p.timeout_ms);
  p.cache_enabled = j.value("cache_enabled", p.cache_enabled);
  return p;
}

std::map<std::string, std::string> parse_string_map(const Json& j) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) out[k] = v.get<std::string>();
  return out;
}

std::shared_ptr<ChatBackend> build_chat_backend(
    const std::string& id, const Json& spec, const std::string& kind,
    const AppConfig& config,
    const std::vector<std::pair<TaskSpec, std::vector<ExampleItem>>>& benchmark,
    const BackendPolicy& policy) {
  if (kind == "synthetic_model") {
    SyntheticModelSpec model_spec;
    model_spec.base = spec.value("base", model_spec.base);
    if (spec.contains("keyword_bonuses")) {
      for (const auto& [word, bonus] : spec.at("keyword_bonuses").items()) {
        model_spec.keyword_bonuses[word] = bonus.get<double>();
      }
    }
    const Json difficulties = spec.value("difficulties", Json("ladder"));
    if (difficulties.is_object()) {
      for (const auto& [ex_id, d] : difficulties.items()) {
        model_spec.difficulties[ex_id] = d.get<double>();
      }
    }
    auto backend = std::make_shared<SyntheticModelBackend>(model_spec);
    for (const auto& [task, examples] : benchmark) {
      std::map<std::string, double> task_difficulties;
      if (difficulties.is_string() && difficulties == "seeded") {
        task_difficulties = seeded_difficulties(
            examples, data::derive_split_seed(config.run.seed, task.task_id));
      } else if (difficulties.is_string() && difficulties == "ladder") {
        task_difficulties = ladder_difficulties(examples);
      } else if (!difficulties.is_object()) {
        throw ConfigError("backend '" + id +
                          "': difficulties must be \"ladder\", \"seeded\" or "
                          "an example_id map");
      }
      backend->add_task(task, examples, std::move(task_difficulties));
    }
    return backend;
  }
  if (kind == "scripted") {
    auto backend = std::make_shared<ScriptedChatBackend>();
    backend->by_digest = parse_string_map(spec.value("by_digest", Json::object()));
    for (const auto& [round, entries] :
         spec.value("by_round", Json::object()).items()) {
      backend->by_round[std::stoi(round)] =
          entries.get<std::vector<std::string>>();
    }
    if (spec.contains("sequence")) {
      backend->sequence = spec.at("sequence").get<std::vector<std::string>>();
    }
    if (spec.contains("default_reply")) {
      backend->default_reply = spec.at("default_reply").get<std::string>();
    }
    return backend;
  }
  if (kind == "http_chat") {
    HttpEndpoint endpoint;
    endpoint.base_url = spec.at("base_url").get<std::string>();
    endpoint.model = spec.value("model", id);
    endpoint.api_key_env = spec.value("api_key_env", "");
    endpoint.timeout_ms = policy.timeout_ms;
    return std::make_shared<HttpChatBackend>(endpoint);
  }
  throw ConfigError("backend '" + id + "': unknown chat kind '" + kind + "'");
}

std::shared_ptr<EmbeddingBackend> build_embedder(const std::string& id,
                                                 const Json& spec,
                                                 const std::string& kind,
                                                 const BackendPolicy& policy) {
  if (kind == "token_overlap") {
    return std::make_shared<TokenOverlapEmbedder>(spec.value("dim", 4096));
  }
  if (kind == "hashing") {
    return std::make_shared<HashingEmbedder>(spec.value("dim", 64));
  }
  if (kind == "static") {
    std::map<std::string, std::vector<double>> table;
    for (const auto& [text, values] : spec.value("table", Json::object()).items()) {
      table[text] = values.get<std::vector<double>>();
    }
    return std::make_shared<StaticEmbedder>(std::move(table));
  }
  if (kind == "http_embedder") {
    HttpEndpoint endpoint;
    endpoint.base_url = spec.at("base_url").get<std::string>();
    endpoint.model = spec.value("model", id);
    endpoint.api_key_env = spec.value("api_key_env", "");
    endpoint.timeout_ms = policy.timeout_ms;
    return std::make_shared<HttpEmbeddingBackend>(endpoint);
  }
  throw ConfigError("backend '" + id + "': unknown embedder kind '" + kind +
                    "'");
}

}  // namespace

AppConfig load_app_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>()};
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const int line = 1 + static_cast<int>(std::count(
                             text.begin(),
                             text.begin() + std::min(e.byte, text.size()), '\n'));
    throw ParseError(e.what(), path.string(), line);
  }

  AppConfig config;
  config.run = run_config_from_json(j.value("run", Json::object()));
  config.strict_images = j.value("strict_images", false);
  config.cache_dir = j.value("cache_dir", std::string("cache"));
  config.backends = j.value("backends", Json::object());

  if (j.contains("split")) {
    const Json& split = j.at("split");
    const std::string policy = split.value("policy", "fraction");
    if (policy == "fraction") {
      config.split_policy.kind = data::SplitPolicy::Kind::Fraction;
      config.split_policy.fraction = split.value("fraction", 0.5);
    } else if (policy == "fixed_count") {
      config.split_policy.kind = data::SplitPolicy::Kind::FixedCount;
      config.split_policy.count = split.value("count", 20);
    } else {
      throw ConfigError("unknown split policy '" + policy + "'");
    }
  }

  for (const auto& role : {config.run.model_backend, config.run.optimizer_backend,
                           config.run.analyzer_backend,
                           config.run.embedder_backend}) {
    if (!role.empty() && !config.backends.contains(role)) {
      throw ConfigError("run names backend '" + role +
                        "' but the backends table has no such entry");
    }
  }
  return config;
}

void register_backends(BackendRegistry& registry, const AppConfig& config,
                       const std::string& task_id,
                       const std::vector<std::pair<TaskSpec, std::vector<ExampleItem>>>& benchmark) {
  for (const auto& [id, raw_spec] : config.backends.items()) {
    Json spec = raw_spec;
    if (spec.contains("task_overrides")) {
      const Json overrides = spec.at("task_overrides");
      spec.erase("task_overrides");
      if (overrides.contains(task_id)) {
        spec.merge_patch(overrides.at(task_id));
      }
    }
    if (!spec.contains("kind")) {
      throw ConfigError("backend '" + id + "' has no kind");
    }
    const std::string kind = spec.at("kind").get<std::string>();
    const BackendPolicy policy = parse_policy(spec.value("policy", Json::object()));

    if (kind == "token_overlap" || kind == "hashing" || kind == "static" ||
        kind == "http_embedder") {
      registry.register_embedder(id, build_embedder(id, spec, kind, policy),
                                 policy);
    } else {
      registry.register_chat(
          id, build_chat_backend(id, spec, kind, config, benchmark, policy),
          policy);
    }
  }
}

}  // namespace tpeval::app
