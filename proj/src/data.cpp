#include "tpeval/data.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "tpeval/digest.hpp"
#include "tpeval/errors.hpp"
#include "tpeval/json_codec.hpp"

namespace tpeval::data {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatVersion = "1";

int line_of_offset(const std::string& text, size_t byte) {
  return 1 + static_cast<int>(
                 std::count(text.begin(),
                            text.begin() + std::min(byte, text.size()), '\n'));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void warn_unknown_fields(const Json& j, const std::set<std::string>& known,
                         const std::string& file, int line,
                         std::vector<std::string>& warnings) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      warnings.push_back(file + ":" + std::to_string(line) +
                         ": unknown field '" + key + "' ignored");
    }
  }
}

TaskSpec parse_task(const Json& j, const std::string& file,
                    std::vector<std::string>& warnings) {
  warn_unknown_fields(j,
                      {"task_id", "name", "category", "prompt_mode",
                       "original_prompt", "question_slot", "option_labels",
                       "examples_file"},
                      file, 1, warnings);
  TaskSpec task;
  task.task_id = j.value("task_id", "");
  task.name = j.value("name", "");
  task.category = j.value("category", "");
  if (j.contains("prompt_mode")) {
    task.prompt_mode = prompt_mode_from_string(j.at("prompt_mode"));
  }
  task.original_prompt = j.value("original_prompt", "");
  task.question_slot = j.value("question_slot", "question");
  if (j.contains("option_labels")) {
    task.option_labels = j.at("option_labels").get<std::vector<std::string>>();
  }
  return task;
}

ExampleItem parse_example(const Json& j, const std::string& file, int line,
                          std::vector<std::string>& warnings) {
  warn_unknown_fields(j,
                      {"example_id", "question", "image_refs", "options",
                       "ground_truth", "split"},
                      file, line, warnings);
  ExampleItem ex;
  ex.example_id = j.value("example_id", "");
  ex.question = j.value("question", "");
  if (j.contains("image_refs")) {
    ex.image_refs = j.at("image_refs").get<std::vector<std::string>>();
  }
  if (j.contains("options")) {
    for (const auto& [label, text] : j.at("options").items()) {
      ex.options.emplace_back(label, text.get<std::string>());
    }
  }
  ex.ground_truth = j.value("ground_truth", "");
  if (j.contains("split")) {
    ex.split = split_from_string(j.at("split"));
  }
  return ex;
}

}  // namespace

LoadedBenchmark load_benchmark(const fs::path& dir, const LoadOptions& opts) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw Error("no manifest.json under " + dir.string());
  }
  const std::string manifest_text = read_file(manifest_path);
  Json manifest;
  try {
    manifest = Json::parse(manifest_text);
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what(), manifest_path.string(),
                     line_of_offset(manifest_text, e.byte));
  }

  LoadedBenchmark result;
  warn_unknown_fields(manifest, {"format_version", "benchmark_id", "tasks"},
                      manifest_path.string(), 1, result.warnings);
  if (manifest.value("format_version", "") != kFormatVersion) {
    result.warnings.push_back(manifest_path.string() +
                              ": format_version is not '" +
                              std::string(kFormatVersion) + "'");
  }
  result.benchmark_id = manifest.value("benchmark_id", dir.filename().string());

  std::vector<std::string> violations;
  std::set<std::string> task_ids;
  for (const auto& task_json : manifest.at("tasks")) {
    TaskSpec task = parse_task(task_json, manifest_path.string(), result.warnings);
    if (!task_ids.insert(task.task_id).second) {
      violations.push_back("duplicate task_id '" + task.task_id + "'");
    }

    const std::string examples_file = task_json.value("examples_file", "");
    if (examples_file.empty()) {
      violations.push_back("task '" + task.task_id + "' names no examples_file");
      continue;
    }
    const fs::path examples_path = dir / examples_file;
    if (!fs::exists(examples_path)) {
      violations.push_back("task '" + task.task_id + "': missing " +
                           examples_path.string());
      continue;
    }

    std::vector<ExampleItem> examples;
    std::ifstream in(examples_path, std::ios::binary);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw ParseError(e.what(), examples_path.string(), line_no);
      }
      ExampleItem ex =
          parse_example(j, examples_path.string(), line_no, result.warnings);
      if (opts.strict_images) {
        for (const auto& ref : ex.image_refs) {
          if (!fs::exists(dir / ref)) {
            violations.push_back("task '" + task.task_id + "' example '" +
                                 ex.example_id + "': missing image " + ref);
          }
        }
      }
      examples.push_back(std::move(ex));
    }

    const ValidationReport report = validate_task(task, examples);
    for (const auto& v : report.violations) {
      violations.push_back("task '" + task.task_id + "': " + v);
    }
    result.tasks.emplace_back(std::move(task), std::move(examples));
  }

  if (!violations.empty()) throw ValidationError(violations);
  return result;
}

uint64_t derive_split_seed(uint64_t base_seed, const std::string& task_id) {
  const std::string hex = sha256_hex(task_id);
  uint64_t h = 0;
  for (int i = 0; i < 16; ++i) {
    h = h * 16 + (hex[i] <= '9' ? hex[i] - '0' : hex[i] - 'a' + 10);
  }
  return base_seed ^ h;
}

void assign_splits(std::vector<ExampleItem>& examples, const SplitPolicy& policy,
                   uint64_t seed) {
  const auto tagged = static_cast<size_t>(
      std::count_if(examples.begin(), examples.end(), [](const ExampleItem& e) {
        return e.split != Split::Unassigned;
      }));
  if (tagged == examples.size() && !examples.empty()) return;  // honored as-is
  if (tagged > 0) {
    throw ValidationError(
        {"examples mix explicit split tags with untagged records; tag all or "
         "none"});
  }
  if (examples.size() < 2) {
    throw ValidationError({"need at least 2 examples to split"});
  }

  size_t few = 0;
  if (policy.kind == SplitPolicy::Kind::FixedCount) {
    if (policy.count <= 0 ||
        static_cast<size_t>(policy.count) >= examples.size()) {
      throw ValidationError({"split count " + std::to_string(policy.count) +
                             " must be in [1, " +
                             std::to_string(examples.size() - 1) + "]"});
    }
    few = static_cast<size_t>(policy.count);
  } else {
    few = static_cast<size_t>(policy.fraction *
                              static_cast<double>(examples.size()));
    if (few == 0 || few >= examples.size()) {
      throw ValidationError({"fraction " + std::to_string(policy.fraction) +
                             " leaves an empty split"});
    }
  }

  // Explicit Fisher-Yates: std::shuffle's draw sequence is
  // implementation-defined, and split assignment must be stable everywhere.
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng() % (i + 1)]);
  }
  for (size_t rank = 0; rank < order.size(); ++rank) {
    examples[order[rank]].split = rank < few ? Split::Few : Split::Test;
  }
}

}  // namespace tpeval::data
