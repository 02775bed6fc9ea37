#pragma once

#include <json.hpp>  // vendored single-header nlohmann/json

#include "tpeval/domain.hpp"

namespace tpeval {

// All on-disk JSON uses ordered_json: object keys keep insertion order, so
// serialization is byte-stable and option order survives round trips.
using Json = nlohmann::ordered_json;

Json to_json(const TaskSpec& v);
Json to_json(const ExampleItem& v);
Json to_json(const PromptCandidate& v);
Json to_json(const ExampleOutcome& v);
Json to_json(const ScoreRecord& v);
Json to_json(const IntrospectionNote& v);
Json to_json(const RunConfig& v);
Json to_json(const RejectionRecord& v);
Json to_json(const CandidateRecord& v);
Json to_json(const IterationRecord& v);
Json to_json(const RunHistory& v);

TaskSpec task_spec_from_json(const Json& j);
ExampleItem example_item_from_json(const Json& j);
PromptCandidate prompt_candidate_from_json(const Json& j);
ExampleOutcome example_outcome_from_json(const Json& j);
ScoreRecord score_record_from_json(const Json& j);
IntrospectionNote introspection_note_from_json(const Json& j);
RunConfig run_config_from_json(const Json& j);
RejectionRecord rejection_record_from_json(const Json& j);
CandidateRecord candidate_record_from_json(const Json& j);
IterationRecord iteration_record_from_json(const Json& j);
RunHistory run_history_from_json(const Json& j);

// Digest of the canonical serialized config; resume refuses to continue
// under a different digest.
std::string config_digest(const RunConfig& config);

// Content hash of a task plus its examples; ties a run to its exact data.
std::string dataset_digest(const TaskSpec& task,
                           const std::vector<ExampleItem>& examples);

}  // namespace tpeval
