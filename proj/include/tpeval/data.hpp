#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tpeval/domain.hpp"

namespace tpeval::data {

// Benchmark directory layout:
//   manifest.json      task list (id, name, category, prompt_mode,
//                      original_prompt, question_slot, option_labels,
//                      examples_file) plus format_version and benchmark_id
//   <task>.jsonl       one example per line: example_id, question,
//                      image_refs, options (label -> text, order kept),
//                      ground_truth, optional split ("few"/"test")
// Unknown fields are ignored with a warning; image_refs are only checked
// for existence in strict mode.
struct LoadOptions {
  bool strict_images = false;
};

struct LoadedBenchmark {
  std::string benchmark_id;
  std::vector<std::pair<TaskSpec, std::vector<ExampleItem>>> tasks;
  std::vector<std::string> warnings;
};

// Parses and validates the whole benchmark. ParseError carries file and
// line; ValidationError aggregates every violation across all tasks.
LoadedBenchmark load_benchmark(const std::filesystem::path& dir,
                               const LoadOptions& opts = {});

struct SplitPolicy {
  enum class Kind { FixedCount, Fraction };
  Kind kind = Kind::Fraction;
  int count = 20;          // FixedCount: |Few|
  double fraction = 0.5;   // Fraction:   |Few| = floor(fraction * |D|)
};

// Deterministic per-task seed so different tasks do not share a shuffle.
uint64_t derive_split_seed(uint64_t base_seed, const std::string& task_id);

// Assigns Few/Test in place via a seeded shuffle. Files that tag every
// example keep their tags untouched regardless of policy; a mix of tagged
// and untagged examples is rejected rather than guessed at.
void assign_splits(std::vector<ExampleItem>& examples, const SplitPolicy& policy,
                   uint64_t seed);

}  // namespace tpeval::data
