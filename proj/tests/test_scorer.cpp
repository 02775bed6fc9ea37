#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tpeval/backends.hpp"
#include "tpeval/errors.hpp"
#include "tpeval/mocks.hpp"
#include "tpeval/scorer.hpp"

namespace {

using namespace tpeval;

using Options = std::vector<std::pair<std::string, std::string>>;

const Options kAbcd = {{"A", "yes, fastened"},
                       {"B", "yes, unfastened"},
                       {"C", "no helmet"},
                       {"D", "head not visible"}};

TaskSpec whole_task() {
  TaskSpec task;
  task.task_id = "helmet";
  task.prompt_mode = PromptMode::WholePrompt;
  task.original_prompt = "Answer the question about the scene. {question}";
  task.option_labels = {"A", "B", "C", "D"};
  return task;
}

TaskSpec prefix_task() {
  TaskSpec task;
  task.task_id = "artwork";
  task.prompt_mode = PromptMode::Prefix;
  task.original_prompt = "Answer the questions about artwork.";
  task.option_labels = {"A", "B"};
  return task;
}

ExampleItem make_example(const std::string& id, const std::string& truth) {
  ExampleItem ex;
  ex.example_id = id;
  ex.question = "Is the worker at station " + id + " wearing a helmet?";
  ex.image_refs = {"img/" + id + ".png"};
  ex.options = kAbcd;
  ex.ground_truth = truth;
  ex.split = Split::Few;
  return ex;
}

std::string extract_with_analyzer(const std::string& response,
                                  const Options& options,
                                  const std::string& analyzer_reply) {
  BackendRegistry registry;
  auto scripted = std::make_shared<ScriptedChatBackend>();
  scripted->default_reply = analyzer_reply;
  registry.register_chat("analyzer", scripted);
  return scorer::extract_answer(response, options, registry, "analyzer");
}

// Extraction that must never consult the analyzer.
std::string extract_by_rules(const std::string& response, const Options& options) {
  BackendRegistry registry;
  auto tripwire = std::make_shared<TripwireChatBackend>(
      nullptr, [](const ChatRequest&) { return true; });
  BackendPolicy fail_fast;
  fail_fast.max_retries = 0;
  registry.register_chat("analyzer", tripwire, fail_fast);
  return scorer::extract_answer(response, options, registry, "analyzer");
}

}  // namespace

TEST_CASE("options block keeps order and omits empty texts") {
  CHECK(scorer::format_options_block({}) == "");
  CHECK(scorer::format_options_block({{"A", "yes"}, {"B", ""}}) ==
        "Options:\nA. yes\nB");
  CHECK(scorer::format_options_block(kAbcd) ==
        "Options:\nA. yes, fastened\nB. yes, unfastened\nC. no helmet\n"
        "D. head not visible");
}

TEST_CASE("whole-prompt rendering substitutes the question slot") {
  const TaskSpec task = whole_task();
  const ExampleItem ex = make_example("e7", "A");
  const std::string rendered =
      scorer::render_prompt(task, task.original_prompt, ex);
  CHECK(rendered == "Answer the question about the scene. " + ex.question +
                        "\n" + scorer::format_options_block(kAbcd));
}

TEST_CASE("whole-prompt rendering honors a custom slot name and {options}") {
  TaskSpec task = whole_task();
  task.question_slot = "query";
  const ExampleItem ex = make_example("e1", "A");
  const std::string rendered = scorer::render_prompt(
      task, "{options}\nQ: {query}\nAnswer now.", ex);
  CHECK(rendered == scorer::format_options_block(kAbcd) + "\nQ: " + ex.question +
                        "\nAnswer now.");
  // the generic {question} token keeps working alongside the custom name
  CHECK(scorer::render_prompt(task, "{question}", ex) ==
        ex.question + "\n" + scorer::format_options_block(kAbcd));
}

TEST_CASE("whole-prompt rendering rejects unknown and unterminated slots") {
  const TaskSpec task = whole_task();
  const ExampleItem ex = make_example("e1", "A");
  CHECK_THROWS_AS(scorer::render_prompt(task, "Hello {nonsense}", ex),
                  MissingSlot);
  CHECK_THROWS_AS(scorer::render_prompt(task, "Hello {question", ex),
                  MissingSlot);
}

TEST_CASE("prefix rendering never touches the question text") {
  const TaskSpec task = prefix_task();
  ExampleItem ex = make_example("e1", "A");
  ex.question = "Which material, {braces} and all?";
  const std::string rendered = scorer::render_prompt(task, "Look closely.", ex);
  CHECK(rendered == "Look closely.\n" + ex.question + "\n" +
                        scorer::format_options_block(kAbcd));
}

TEST_CASE("extraction rule 1 reads standalone labels") {
  CHECK(extract_by_rules("A", kAbcd) == "A");
  CHECK(extract_by_rules("B.", kAbcd) == "B");
  CHECK(extract_by_rules("(C)", kAbcd) == "C");
  CHECK(extract_by_rules("[D]", kAbcd) == "D");
  CHECK(extract_by_rules("**A** is right", kAbcd) == "A");
  CHECK(extract_by_rules("A and B both look plausible", kAbcd) == "A");
  CHECK(extract_by_rules("The answer is C.", kAbcd) == "C");
  CHECK(extract_by_rules("the ANSWER IS d", kAbcd) == "D");
  // the last anchor wins
  CHECK(extract_by_rules("The answer is A. No wait, the answer is B.", kAbcd) ==
        "B");
}

TEST_CASE("extraction start-of-text label match is case-sensitive") {
  // a leading article must not read as label A; text rule then matches
  CHECK(extract_by_rules("a clearly fastened helmet means yes, fastened", kAbcd) ==
        "A");
}

TEST_CASE("extraction rule 2 requires a unique option text") {
  CHECK(extract_by_rules("It looks like no helmet to me", kAbcd) == "C");
  CHECK(extract_by_rules("It is yes, FASTENED as far as I see", kAbcd) == "A");
  // two option texts present -> ambiguous, falls to the analyzer
  CHECK(extract_with_analyzer(
            "Could be yes, fastened or maybe no helmet honestly", kAbcd,
            "B") == "B");
}

TEST_CASE("analyzer fallback parses labels, declares UNPARSEABLE, or gives up") {
  CHECK(extract_with_analyzer("mumble mumble", kAbcd, "C") == "C");
  CHECK(extract_with_analyzer("mumble mumble", kAbcd, "c.") == "C");
  CHECK(extract_with_analyzer("mumble", kAbcd, "UNPARSEABLE") == kUnparseable);
  CHECK(extract_with_analyzer("mumble", kAbcd, "I really cannot tell") ==
        kUnparseable);
}

TEST_CASE("extraction needs at least one option") {
  BackendRegistry registry;
  CHECK_THROWS_AS(scorer::extract_answer("text", {}, registry, "analyzer"),
                  Error);
}

TEST_CASE("score_candidate counts correctness per example") {
  const TaskSpec task = whole_task();
  const std::vector<ExampleItem> examples = {
      make_example("e1", "A"), make_example("e2", "B"), make_example("e3", "C"),
      make_example("e4", "D")};

  SyntheticModelSpec spec;
  spec.base = 0.6;  // ladder (i+0.5)/4: e1, e2 correct; e3, e4 wrong
  BackendRegistry registry;
  registry.register_chat(
      "model", std::make_shared<SyntheticModelBackend>(spec, task, examples));
  auto analyzer = std::make_shared<ScriptedChatBackend>();
  registry.register_chat("analyzer", analyzer);

  const PromptCandidate candidate = make_initial_candidate(task);
  const ScoreRecord record = scorer::score_candidate(
      task, candidate, examples, registry, "model", "analyzer");

  CHECK(record.candidate_id == candidate.candidate_id);
  CHECK(record.n_evaluated == 4);
  CHECK(record.correct_count == 2);
  REQUIRE(record.outcomes.size() == 4);
  CHECK(record.outcomes.at("e1").correct);
  CHECK(record.outcomes.at("e1").extracted_label == "A");
  CHECK(record.outcomes.at("e3").extracted_label == "D");  // circular next
  CHECK(!record.outcomes.at("e3").correct);
  CHECK(!record.outcomes.at("e1").response_digest.empty());
  // all replies parse by rule, so the analyzer is never consulted
  CHECK(analyzer->call_count() == 0);
}

TEST_CASE("score_candidate falls back to task labels when options are absent") {
  TaskSpec task = whole_task();
  std::vector<ExampleItem> examples = {make_example("e1", "A")};
  examples[0].options.clear();  // labels still come from the task

  SyntheticModelSpec spec;
  spec.base = 1.0;
  BackendRegistry registry;
  registry.register_chat(
      "model", std::make_shared<SyntheticModelBackend>(spec, task, examples));
  registry.register_chat("analyzer", std::make_shared<ScriptedChatBackend>());

  const ScoreRecord record = scorer::score_candidate(
      task, make_initial_candidate(task), examples, registry, "model",
      "analyzer");
  CHECK(record.correct_count == 1);
  CHECK(record.outcomes.at("e1").extracted_label == "A");
}

TEST_CASE("score_candidate grades free-form tasks by normalized match") {
  TaskSpec task = whole_task();
  task.option_labels.clear();
  std::vector<ExampleItem> examples = {make_example("e1", "a yellow helmet")};
  examples[0].options.clear();

  SyntheticModelSpec spec;
  spec.base = 1.0;
  BackendRegistry registry;
  registry.register_chat(
      "model", std::make_shared<SyntheticModelBackend>(spec, task, examples));
  registry.register_chat("analyzer", std::make_shared<ScriptedChatBackend>());

  const ScoreRecord record = scorer::score_candidate(
      task, make_initial_candidate(task), examples, registry, "model",
      "analyzer");
  CHECK(record.correct_count == 1);
  CHECK(record.outcomes.at("e1").extracted_label == "a yellow helmet");
}

TEST_CASE("score_candidate refuses an empty example set") {
  BackendRegistry registry;
  const TaskSpec task = whole_task();
  CHECK_THROWS_AS(scorer::score_candidate(task, make_initial_candidate(task), {},
                                          registry, "model", "analyzer"),
                  Error);
}

TEST_CASE("semantic similarity is cosine clamped to [0,1]") {
  BackendRegistry registry;
  std::map<std::string, std::vector<double>> table{
      {"p", {1.0, 0.0}}, {"q", {-1.0, 0.0}}, {"r", {1.0, 1.0}}};
  registry.register_embedder("embed", std::make_shared<StaticEmbedder>(table));
  registry.register_embedder("overlap", std::make_shared<TokenOverlapEmbedder>());

  CHECK(scorer::semantic_similarity("p", "q", registry, "embed") == 0.0);
  CHECK(scorer::semantic_similarity("p", "r", registry, "embed") ==
        doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(scorer::semantic_similarity("same words", "same words", registry,
                                    "overlap") == 1.0);
  CHECK_THROWS_AS(scorer::semantic_similarity("", "q", registry, "embed"), Error);
}

TEST_CASE("introspection covers the wrong answers in ascending example order") {
  const TaskSpec task = whole_task();
  const std::vector<ExampleItem> examples = {
      make_example("e1", "A"), make_example("e2", "B"), make_example("e3", "C"),
      make_example("e4", "D")};
  PromptCandidate candidate = make_initial_candidate(task);
  ScoreRecord score;
  score.candidate_id = candidate.candidate_id;
  score.n_evaluated = 4;
  score.correct_count = 1;
  score.outcomes["e1"] = {"A", true, "d1"};
  score.outcomes["e2"] = {"C", false, "d2"};
  score.outcomes["e3"] = {kUnparseable, false, "d3"};
  score.outcomes["e4"] = {"A", false, "d4"};

  BackendRegistry registry;
  auto analyzer = std::make_shared<CallbackChatBackend>(
      [](const ChatRequest&) { return "The prompt lacks format guidance."; });
  registry.register_chat("analyzer", analyzer);

  SUBCASE("all wrong outcomes fit") {
    const IntrospectionNote note = scorer::generate_introspection(
        task, candidate, score, examples, registry, "analyzer", 5);
    CHECK(note.text == "The prompt lacks format guidance.");
    CHECK(note.wrong_example_ids ==
          std::vector<std::string>{"e2", "e3", "e4"});
    REQUIRE(analyzer->call_count() == 1);
    const std::string sent = analyzer->requests_seen()[0].last_user_text();
    CHECK(sent.find("Mistake 1:") != std::string::npos);
    CHECK(sent.find("Mistake 3:") != std::string::npos);
    CHECK(sent.find("Prompt: " + candidate.text) != std::string::npos);
    CHECK(sent.find("(unparseable response)") != std::string::npos);
    CHECK(analyzer->requests_seen()[0].purpose == CallPurpose::Introspect);
  }

  SUBCASE("max_wrong caps the examples shown") {
    const IntrospectionNote note = scorer::generate_introspection(
        task, candidate, score, examples, registry, "analyzer", 2);
    CHECK(note.wrong_example_ids == std::vector<std::string>{"e2", "e3"});
  }
}

TEST_CASE("introspection with no mistakes makes no analyzer call") {
  const TaskSpec task = whole_task();
  const std::vector<ExampleItem> examples = {make_example("e1", "A")};
  PromptCandidate candidate = make_initial_candidate(task);
  ScoreRecord score;
  score.outcomes["e1"] = {"A", true, "d1"};

  BackendRegistry registry;
  auto analyzer = std::make_shared<ScriptedChatBackend>();  // would throw
  registry.register_chat("analyzer", analyzer);
  const IntrospectionNote note = scorer::generate_introspection(
      task, candidate, score, examples, registry, "analyzer", 5);
  CHECK(note.empty());
  CHECK(analyzer->call_count() == 0);
}

TEST_CASE("a failing analyzer degrades introspection to an empty note") {
  const TaskSpec task = whole_task();
  const std::vector<ExampleItem> examples = {make_example("e1", "A")};
  PromptCandidate candidate = make_initial_candidate(task);
  ScoreRecord score;
  score.outcomes["e1"] = {"B", false, "d1"};

  BackendRegistry registry;
  registry.register_chat("analyzer", std::make_shared<ScriptedChatBackend>());
  const IntrospectionNote note = scorer::generate_introspection(
      task, candidate, score, examples, registry, "analyzer", 5);
  CHECK(note.empty());
}
