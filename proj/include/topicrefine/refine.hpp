#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicrefine/corpus.hpp"
#include "topicrefine/embeddings.hpp"
#include "topicrefine/error.hpp"
#include "topicrefine/llm_client.hpp"
#include "topicrefine/prompt.hpp"

namespace topicrefine {

enum class Coherent { yes, no };

// Mapped model output: identified topic label, Yes/No judgment, and the
// candidate replacements (only when the judgment is No).
struct LlmVerdict {
  std::string topic_label;
  Coherent coherent = Coherent::yes;
  std::vector<std::string> alternatives;
};

enum class ReplacementSource { retained, candidate_in_vocab, fallback_nearest };

inline const char* replacement_source_name(ReplacementSource s) {
  switch (s) {
    case ReplacementSource::retained: return "retained";
    case ReplacementSource::candidate_in_vocab: return "candidate_in_vocab";
    case ReplacementSource::fallback_nearest: return "fallback_nearest";
  }
  return "unknown";
}

// Audit entry for one (topic, position) decision.
struct RefinementRecord {
  int topic_index = 0;
  int position = 0;  // 1-based
  std::string original_word;
  LlmVerdict verdict;
  std::optional<std::string> replacement;
  ReplacementSource source = ReplacementSource::retained;
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

namespace detail {

// First balanced {...} block outside string literals; npos pair when absent.
inline std::pair<size_t, size_t> find_json_block(std::string_view text) {
  size_t start = text.find('{');
  if (start == std::string_view::npos) return {std::string_view::npos, 0};
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}') {
      if (--depth == 0) return {start, i - start + 1};
    }
  }
  return {std::string_view::npos, 0};
}

}  // namespace detail

// Extracts the first balanced JSON object from the (possibly prose-wrapped)
// model output and maps it onto (r1, r2, r3).
inline LlmVerdict parse_response(const std::string& text) {
  auto [start, len] = detail::find_json_block(text);
  if (start == std::string::npos)
    throw Error::format("response contains no JSON object");
  nlohmann::json j = nlohmann::json::parse(text.substr(start, len), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error::format("response JSON does not parse");

  LlmVerdict v;
  if (j.contains("topic") && j["topic"].is_string()) v.topic_label = j["topic"];

  if (!j.contains("coherent") || !j["coherent"].is_string())
    throw Error::format("response schema: missing 'coherent'");
  std::string coherent = to_lower_ascii(trim(j["coherent"].get<std::string>()));
  if (coherent == "yes") v.coherent = Coherent::yes;
  else if (coherent == "no") v.coherent = Coherent::no;
  else throw Error::format("response schema: 'coherent' must be Yes or No, got '" +
                           j["coherent"].get<std::string>() + "'");

  if (v.coherent == Coherent::no) {
    if (j.contains("alternatives") && j["alternatives"].is_array()) {
      for (const auto& item : j["alternatives"]) {
        if (!item.is_string()) continue;
        std::string w = to_lower_ascii(trim(item.get<std::string>()));
        if (w.empty()) continue;
        v.alternatives.push_back(std::move(w));
        if (v.alternatives.size() == 10) break;
      }
    }
    if (v.alternatives.empty())
      throw Error::format("response schema: 'coherent' is No but alternatives are empty");
  }
  return v;
}

// First candidate that is in the vocabulary and not already in the topic;
// otherwise the average-similarity fallback over the vocabulary.
inline std::pair<std::string, ReplacementSource> select_alternative(
    const std::vector<std::string>& candidates, const Vocabulary& vocab,
    const std::unordered_set<std::string>& current_topic_words,
    const EmbeddingStore& store) {
  if (candidates.empty()) throw Error::data("no candidate words to select from");
  for (const auto& c : candidates) {
    if (vocab.contains(c) && !current_topic_words.count(c))
      return {c, ReplacementSource::candidate_in_vocab};
  }
  return {nearest_in_vocab_by_avg_similarity(candidates, vocab, current_topic_words, store),
          ReplacementSource::fallback_nearest};
}

enum class ContextMode { original, refined };

struct RefineOptions {
  ContextMode context = ContextMode::original;
  int jobs = 1;  // topic-level parallelism in refine_topic_set
};

struct TopicRefineResult {
  std::vector<std::string> refined;
  std::vector<RefinementRecord> records;  // ordered by position ascending
};

// One pass over the topic in reverse position order. The prompt context
// comes from the original word list (the evolving copy under
// ContextMode::refined); the word under judgment is never stale because a
// position is visited exactly once, before any replacement lands on it.
inline TopicRefineResult refine_topic(const std::vector<std::string>& topic,
                                      const Vocabulary& vocab, const EmbeddingStore& store,
                                      LlmClient& client, const RefineOptions& options,
                                      int topic_index = 0) {
  const int n = static_cast<int>(topic.size());
  if (n < 2) throw Error::data("topic needs at least two words");
  {
    std::unordered_set<std::string> seen(topic.begin(), topic.end());
    if (static_cast<int>(seen.size()) != n)
      throw Error::data("topic words must be distinct");
  }

  std::vector<std::string> working = topic;
  std::vector<RefinementRecord> records(static_cast<size_t>(n));

  for (int j = n; j >= 1; --j) {
    const std::string& held = topic[static_cast<size_t>(j - 1)];
    const auto& source_words = options.context == ContextMode::original ? topic : working;
    std::vector<std::string> context;
    context.reserve(static_cast<size_t>(n - 1));
    for (int k = 0; k < n; ++k)
      if (k != j - 1) context.push_back(source_words[static_cast<size_t>(k)]);

    PromptInstance prompt = build_prompt(context, held, topic_index, j);
    CompletionResult completion = client.complete(prompt.text);
    LlmVerdict verdict = parse_response(completion.text);

    RefinementRecord rec;
    rec.topic_index = topic_index;
    rec.position = j;
    rec.original_word = held;
    rec.prompt_tokens = completion.prompt_tokens;
    rec.completion_tokens = completion.completion_tokens;
    if (verdict.coherent == Coherent::no) {
      std::unordered_set<std::string> current(working.begin(), working.end());
      auto [word, source] = select_alternative(verdict.alternatives, vocab, current, store);
      working[static_cast<size_t>(j - 1)] = word;
      rec.replacement = word;
      rec.source = source;
    }
    rec.verdict = std::move(verdict);
    records[static_cast<size_t>(j - 1)] = std::move(rec);
  }

  return {std::move(working), std::move(records)};
}

struct RefineSummary {
  int topic_count = 0;
  int words_per_topic = 0;
  std::vector<int> per_topic_changes;
  std::vector<long> per_topic_prompt_tokens;
  std::vector<long> per_topic_completion_tokens;
  long total_prompt_tokens = 0;
  long total_completion_tokens = 0;
  double avg_prompt_tokens_per_topic = 0.0;
  double avg_completion_tokens_per_topic = 0.0;
  long completion_calls = 0;
  long cache_hits = 0;
  long retries = 0;
  std::vector<std::pair<int, std::string>> failures;  // (topic index, error)
};

struct SetRefineResult {
  TopicSet refined;
  std::vector<RefinementRecord> records;  // (topic_index, position) ascending
  RefineSummary summary;
};

// Applies refine_topic to every topic. Topics refine independently and may
// run on a small worker pool; a failed topic keeps its original words and is
// reported in the summary. The run fails only if every topic fails.
inline SetRefineResult refine_topic_set(const TopicSet& topics, const Vocabulary& vocab,
                                        const EmbeddingStore& store, LlmClient& client,
                                        const RefineOptions& options) {
  const int k = topics.topic_count();
  if (k == 0) throw Error::data("empty topic set");

  const long calls_before = client.backend_calls();
  const long hits_before = client.cache_hits();
  const long retries_before = client.retries();

  std::vector<TopicRefineResult> results(static_cast<size_t>(k));
  std::vector<std::optional<std::string>> errors(static_cast<size_t>(k));

  auto run_one = [&](int i) {
    try {
      results[static_cast<size_t>(i)] =
          refine_topic(topics.topics[static_cast<size_t>(i)], vocab, store, client, options, i);
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();  // partial results discarded
    }
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1 || k == 1) {
    for (int i = 0; i < k; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    const int pool = std::min(jobs, k);
    workers.reserve(static_cast<size_t>(pool));
    for (int t = 0; t < pool; ++t) {
      workers.emplace_back([&] {
        for (int i = next.fetch_add(1); i < k; i = next.fetch_add(1)) run_one(i);
      });
    }
    for (auto& w : workers) w.join();
  }

  SetRefineResult out;
  out.refined.words_per_topic = topics.words_per_topic;
  out.refined.provenance = "refined";
  out.summary.topic_count = k;
  out.summary.words_per_topic = topics.words_per_topic;

  int failed = 0;
  for (int i = 0; i < k; ++i) {
    auto& slot = results[static_cast<size_t>(i)];
    if (errors[static_cast<size_t>(i)]) {
      ++failed;
      out.summary.failures.emplace_back(i, *errors[static_cast<size_t>(i)]);
      out.refined.topics.push_back(topics.topics[static_cast<size_t>(i)]);
      out.summary.per_topic_changes.push_back(0);
      out.summary.per_topic_prompt_tokens.push_back(0);
      out.summary.per_topic_completion_tokens.push_back(0);
      continue;
    }
    int changes = 0;
    long ptoks = 0, ctoks = 0;
    for (const auto& rec : slot.records) {
      if (rec.replacement) ++changes;
      ptoks += rec.prompt_tokens;
      ctoks += rec.completion_tokens;
    }
    out.summary.per_topic_changes.push_back(changes);
    out.summary.per_topic_prompt_tokens.push_back(ptoks);
    out.summary.per_topic_completion_tokens.push_back(ctoks);
    out.summary.total_prompt_tokens += ptoks;
    out.summary.total_completion_tokens += ctoks;
    out.refined.topics.push_back(std::move(slot.refined));
    for (auto& rec : slot.records) out.records.push_back(std::move(rec));
  }
  if (failed == k) {
    throw Error::backend("refinement failed for every topic; first error: " +
                         out.summary.failures.front().second);
  }

  out.summary.avg_prompt_tokens_per_topic =
      static_cast<double>(out.summary.total_prompt_tokens) / static_cast<double>(k);
  out.summary.avg_completion_tokens_per_topic =
      static_cast<double>(out.summary.total_completion_tokens) / static_cast<double>(k);
  out.summary.completion_calls = client.backend_calls() - calls_before;
  out.summary.cache_hits = client.cache_hits() - hits_before;
  out.summary.retries = client.retries() - retries_before;
  return out;
}

// -------- serialization --------

inline nlohmann::json record_to_json(const RefinementRecord& rec) {
  nlohmann::json j{
      {"topic_index", rec.topic_index},
      {"position", rec.position},
      {"original_word", rec.original_word},
      {"verdict",
       {{"topic", rec.verdict.topic_label},
        {"coherent", rec.verdict.coherent == Coherent::yes ? "Yes" : "No"},
        {"alternatives", rec.verdict.alternatives}}},
      {"replacement_source", replacement_source_name(rec.source)},
      {"prompt_tokens", rec.prompt_tokens},
      {"completion_tokens", rec.completion_tokens},
  };
  j["replacement"] = rec.replacement ? nlohmann::json(*rec.replacement) : nlohmann::json();
  return j;
}

inline std::string records_to_jsonl(const std::vector<RefinementRecord>& records) {
  std::string out;
  for (const auto& rec : records) {
    out += record_to_json(rec).dump();
    out += '\n';
  }
  return out;
}

inline nlohmann::json summary_to_json(const RefineSummary& s) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& [idx, msg] : s.failures)
    failures.push_back({{"topic_index", idx}, {"error", msg}});
  return nlohmann::json{
      {"topic_count", s.topic_count},
      {"words_per_topic", s.words_per_topic},
      {"per_topic_changes", s.per_topic_changes},
      {"per_topic_prompt_tokens", s.per_topic_prompt_tokens},
      {"per_topic_completion_tokens", s.per_topic_completion_tokens},
      {"total_prompt_tokens", s.total_prompt_tokens},
      {"total_completion_tokens", s.total_completion_tokens},
      {"avg_prompt_tokens_per_topic", s.avg_prompt_tokens_per_topic},
      {"avg_completion_tokens_per_topic", s.avg_completion_tokens_per_topic},
      {"completion_calls", s.completion_calls},
      {"cache_hits", s.cache_hits},
      {"retries", s.retries},
      {"failures", failures},
  };
}

}  // namespace topicrefine
