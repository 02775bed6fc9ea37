#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tpeval/backends.hpp"
#include "tpeval/data.hpp"
#include "tpeval/domain.hpp"
#include "tpeval/json_codec.hpp"

namespace tpeval::app {

// Runtime configuration file:
//   {
//     "format_version": "1",
//     "cache_dir": "cache",                // relative to the out dir
//     "strict_images": false,
//     "split": {"policy": "fraction"|"fixed_count",
//               "fraction": 0.5, "count": 20},
//     "run": { ...RunConfig fields, incl. the four backend ids... },
//     "backends": {
//       "<id>": {"kind": "...", ...kind-specific fields...,
//                "policy": {...BackendPolicy fields...},
//                "task_overrides": {"<task_id>": { ...field overrides... }}}
//     }
//   }
// Chat kinds: "synthetic_model" (base, keyword_bonuses,
//   difficulties: "ladder" | "seeded" | {example_id: d}), "scripted"
//   (by_digest, by_round, sequence, default_reply), "http_chat"
//   (base_url, model, api_key_env).
// Embedder kinds: "token_overlap" (dim), "hashing" (dim), "static" (table),
//   "http_embedder" (base_url, model, api_key_env).
struct AppConfig {
  RunConfig run;
  data::SplitPolicy split_policy;
  bool strict_images = false;
  std::string cache_dir = "cache";
  Json backends = Json::object();
};

AppConfig load_app_config(const std::filesystem::path& path);

// Instantiates every configured backend into the registry, with `task_id`'s
// overrides applied. Synthetic models are given the whole benchmark so they
// can answer any task's examples (difficulties derived per task by the
// configured scheme; "seeded" mixes config.run.seed with the task id).
void register_backends(BackendRegistry& registry, const AppConfig& config,
                       const std::string& task_id,
                       const std::vector<std::pair<TaskSpec, std::vector<ExampleItem>>>& benchmark);

}  // namespace tpeval::app
