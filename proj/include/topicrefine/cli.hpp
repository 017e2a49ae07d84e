#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "topicrefine/classify.hpp"
#include "topicrefine/corpus.hpp"
#include "topicrefine/embeddings.hpp"
#include "topicrefine/error.hpp"
#include "topicrefine/eval_metrics.hpp"
#include "topicrefine/lda.hpp"
#include "topicrefine/llm_client.hpp"
#include "topicrefine/refine.hpp"
#include "topicrefine/util.hpp"
#include "topicrefine/version.hpp"

namespace topicrefine {

// Resolved options for one run. Precedence: flags > config file > defaults.
struct RunConfig {
  std::string subcommand;

  std::string corpus_path;
  std::string labels_path;
  std::string topics_path;
  std::string baseline_path;
  std::string vocab_path;
  std::string embeddings_path;
  std::string doc_embeddings_path;
  std::string reference_path;
  std::string stopwords_path;
  std::string out_dir;
  std::string cache_dir;

  bool lowercase = true;
  int min_token_len = 2;
  int min_doc_freq = 5;
  double max_doc_freq_ratio = 0.5;

  int topic_count = 20;
  double alpha = 0.0;  // 0 means the 50/K default
  double beta = kDefaultBeta;
  int iterations = 200;
  int top_n = 10;

  std::string backend = "mock";
  std::string model_id = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_retries = 3;
  long timeout_ms = 30000;
  double mock_threshold = 0.5;
  std::string context_mode = "original";

  int window = 10;
  double train_fraction = 0.8;

  uint64_t seed = 42;
  int jobs = 0;  // 0 = logical cores
  bool deterministic = false;
};

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  return nlohmann::json{
      {"subcommand", c.subcommand},
      {"corpus", c.corpus_path},
      {"labels", c.labels_path},
      {"topics", c.topics_path},
      {"baseline", c.baseline_path},
      {"vocab", c.vocab_path},
      {"embeddings", c.embeddings_path},
      {"doc_embeddings", c.doc_embeddings_path},
      {"reference", c.reference_path},
      {"stopwords", c.stopwords_path},
      {"out", c.out_dir},
      {"cache_dir", c.cache_dir},
      {"lowercase", c.lowercase},
      {"min_token_len", c.min_token_len},
      {"min_doc_freq", c.min_doc_freq},
      {"max_doc_freq_ratio", c.max_doc_freq_ratio},
      {"topic_count", c.topic_count},
      {"alpha", c.alpha},
      {"beta", c.beta},
      {"iterations", c.iterations},
      {"top_n", c.top_n},
      {"backend", c.backend},
      {"model", c.model_id},
      {"temperature", c.temperature},
      {"max_retries", c.max_retries},
      {"timeout_ms", c.timeout_ms},
      {"mock_threshold", c.mock_threshold},
      {"context", c.context_mode},
      {"window", c.window},
      {"train_fraction", c.train_fraction},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"deterministic", c.deterministic},
  };
}

inline void run_config_from_json(const nlohmann::json& j, RunConfig& c) {
  c.corpus_path = j.value("corpus", c.corpus_path);
  c.labels_path = j.value("labels", c.labels_path);
  c.topics_path = j.value("topics", c.topics_path);
  c.baseline_path = j.value("baseline", c.baseline_path);
  c.vocab_path = j.value("vocab", c.vocab_path);
  c.embeddings_path = j.value("embeddings", c.embeddings_path);
  c.doc_embeddings_path = j.value("doc_embeddings", c.doc_embeddings_path);
  c.reference_path = j.value("reference", c.reference_path);
  c.stopwords_path = j.value("stopwords", c.stopwords_path);
  c.cache_dir = j.value("cache_dir", c.cache_dir);
  c.lowercase = j.value("lowercase", c.lowercase);
  c.min_token_len = j.value("min_token_len", c.min_token_len);
  c.min_doc_freq = j.value("min_doc_freq", c.min_doc_freq);
  c.max_doc_freq_ratio = j.value("max_doc_freq_ratio", c.max_doc_freq_ratio);
  c.topic_count = j.value("topic_count", c.topic_count);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.iterations = j.value("iterations", c.iterations);
  c.top_n = j.value("top_n", c.top_n);
  c.backend = j.value("backend", c.backend);
  c.model_id = j.value("model", c.model_id);
  c.temperature = j.value("temperature", c.temperature);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.mock_threshold = j.value("mock_threshold", c.mock_threshold);
  c.context_mode = j.value("context", c.context_mode);
  c.window = j.value("window", c.window);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  c.deterministic = j.value("deterministic", c.deterministic);
}

namespace cli_detail {

inline std::string now_or_fixed(bool deterministic) {
  if (deterministic) return "1970-01-01T00:00:00Z";
  return utc_timestamp(std::chrono::system_clock::now());
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  atomic_write_file(path.string(), j.dump(2) + "\n");
}

inline PreprocessConfig preprocess_from(const RunConfig& c) {
  PreprocessConfig p;
  p.lowercase = c.lowercase;
  p.min_token_len = c.min_token_len;
  p.min_doc_freq = c.min_doc_freq;
  p.max_doc_freq_ratio = c.max_doc_freq_ratio;
  if (!c.stopwords_path.empty()) p.stopwords_path = c.stopwords_path;
  return p;
}

inline LlmConfig llm_from(const RunConfig& c) {
  LlmConfig l;
  l.backend = c.backend == "remote" ? LlmBackendKind::remote : LlmBackendKind::mock;
  l.model_id = c.model_id;
  l.temperature = c.temperature;
  l.max_retries = c.max_retries;
  l.timeout = std::chrono::milliseconds(c.timeout_ms);
  if (!c.cache_dir.empty()) {
    l.cache_dir = c.cache_dir;
  } else if (const char* env = std::getenv(kEnvCacheDir); env && *env) {
    l.cache_dir = env;
  }
  return l;
}

inline int resolve_jobs(const RunConfig& c) {
  if (c.deterministic) return 1;
  if (c.jobs > 0) return c.jobs;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline RefineOptions refine_options_from(const RunConfig& c) {
  RefineOptions o;
  o.context = c.context_mode == "refined" ? ContextMode::refined : ContextMode::original;
  o.jobs = resolve_jobs(c);
  return o;
}

inline double resolve_alpha(const RunConfig& c) {
  return c.alpha > 0.0 ? c.alpha : default_alpha(c.topic_count);
}

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error::usage(std::string("missing required option ") + flag);
}

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
  long completion_calls = 0;
  long cache_hits = 0;
  long retries = 0;
  double avg_prompt_tokens_per_topic = 0.0;
  double avg_completion_tokens_per_topic = 0.0;

  void add(const RefineSummary& s) {
    prompt_tokens += s.total_prompt_tokens;
    completion_tokens += s.total_completion_tokens;
    completion_calls += s.completion_calls;
    cache_hits += s.cache_hits;
    retries += s.retries;
    avg_prompt_tokens_per_topic = s.avg_prompt_tokens_per_topic;
    avg_completion_tokens_per_topic = s.avg_completion_tokens_per_topic;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"prompt_tokens", prompt_tokens},
                          {"completion_tokens", completion_tokens},
                          {"completion_calls", completion_calls},
                          {"cache_hits", cache_hits},
                          {"retries", retries},
                          {"avg_prompt_tokens_per_topic", avg_prompt_tokens_per_topic},
                          {"avg_completion_tokens_per_topic", avg_completion_tokens_per_topic}};
  }
};

struct ManifestBuilder {
  RunConfig config;
  std::string started_at;
  std::vector<nlohmann::json> stages;
  TokenUsage tokens;

  explicit ManifestBuilder(const RunConfig& c) : config(c) {
    started_at = now_or_fixed(c.deterministic);
  }

  void stage(std::string name, nlohmann::json details) {
    details["name"] = std::move(name);
    stages.push_back(std::move(details));
  }

  void write(const std::filesystem::path& out_dir) const {
    RunConfig snapshot = config;
    snapshot.out_dir = ".";  // paths in the tree are relative to the manifest
    nlohmann::json j{
        {"version", std::string(kVersion)},
        {"subcommand", config.subcommand},
        {"started_at", started_at},
        {"finished_at", now_or_fixed(config.deterministic)},
        {"deterministic", config.deterministic},
        {"request_framing", "single-user-message"},
        {"config", run_config_to_json(snapshot)},
        {"stages", stages},
        {"token_usage", tokens.to_json()},
    };
    write_json_file(out_dir / "manifest.json", j);
  }
};

// -------- stage helpers shared by subcommands and the pipeline --------

struct LdaStage {
  Corpus corpus;
  TopicSet topics;
};

inline LdaStage run_lda_stage(const RunConfig& cfg, const std::filesystem::path& out,
                              ManifestBuilder& manifest) {
  std::optional<std::string> labels;
  if (!cfg.labels_path.empty()) labels = cfg.labels_path;
  auto raw = load_corpus_file(cfg.corpus_path, labels);
  Corpus corpus = preprocess_corpus(raw, preprocess_from(cfg));

  LdaState state = fit_gibbs_lda(corpus, cfg.topic_count, resolve_alpha(cfg), cfg.beta,
                                 cfg.iterations, cfg.seed);
  TopicSet topics = top_words(state, corpus.vocabulary, cfg.top_n);

  save_topic_set(topics, (out / "topics.txt").string());
  save_vocabulary(corpus.vocabulary, (out / "vocab.txt").string());

  nlohmann::json ll = nlohmann::json::array();
  for (const auto& [sweep, value] : state.ll_trace)
    ll.push_back({{"sweep", sweep}, {"log_likelihood", value}});
  write_json_file(out / "lda_meta.json",
                  {{"topic_count", cfg.topic_count},
                   {"alpha", resolve_alpha(cfg)},
                   {"beta", cfg.beta},
                   {"iterations", cfg.iterations},
                   {"seed", cfg.seed},
                   {"top_n", cfg.top_n},
                   {"log_likelihood_trace", ll},
                   {"corpus", {{"documents", corpus.stats.doc_count},
                               {"labels", corpus.stats.label_count},
                               {"vocabulary", corpus.vocabulary.size()},
                               {"avg_tokens", corpus.stats.avg_tokens}}}});

  manifest.stage("lda", {{"documents", corpus.stats.doc_count},
                         {"vocabulary", corpus.vocabulary.size()},
                         {"topics", topics.topic_count()},
                         {"outputs", {"topics.txt", "vocab.txt", "lda_meta.json"}}});
  return {std::move(corpus), std::move(topics)};
}

inline SetRefineResult run_refine_stage(const RunConfig& cfg, const TopicSet& topics,
                                        const Vocabulary& vocab, const EmbeddingStore& store,
                                        const std::filesystem::path& out,
                                        ManifestBuilder& manifest) {
  LlmConfig llm = llm_from(cfg);
  MockOracleConfig oracle{&store, cfg.mock_threshold, &vocab};
  LlmClient client = LlmClient::make(llm, &oracle);

  SetRefineResult result =
      refine_topic_set(topics, vocab, store, client, refine_options_from(cfg));

  save_topic_set(result.refined, (out / "refined_topics.txt").string());
  atomic_write_file((out / "records.jsonl").string(), records_to_jsonl(result.records));
  write_json_file(out / "summary.json", summary_to_json(result.summary));

  manifest.tokens.add(result.summary);
  int total_changes = 0;
  for (int c : result.summary.per_topic_changes) total_changes += c;
  manifest.stage("refine",
                 {{"topics", result.refined.topic_count()},
                  {"word_changes", total_changes},
                  {"failed_topics", result.summary.failures.size()},
                  {"backend", cfg.backend},
                  {"outputs", {"refined_topics.txt", "records.jsonl", "summary.json"}}});
  return result;
}

inline std::unordered_set<std::string> collect_words(const TopicSet& topics) {
  std::unordered_set<std::string> words;
  for (const auto& t : topics.topics) words.insert(t.begin(), t.end());
  return words;
}

inline void run_eval_stage(const RunConfig& cfg, const TopicSet& topics,
                           const TopicSet* baseline, const Corpus& reference,
                           const EmbeddingStore& store, const std::filesystem::path& out,
                           ManifestBuilder& manifest) {
  auto targets = collect_words(topics);
  if (baseline) {
    auto base_words = collect_words(*baseline);
    targets.insert(base_words.begin(), base_words.end());
  }
  CooccurrenceStats stats = build_cooccurrence(reference, cfg.window, targets);

  QualityReport after = compute_quality_report(topics, stats, store);
  write_json_file(out / "quality.json", quality_report_to_json(after));
  atomic_write_file((out / "per_word_npmi.csv").string(),
                    per_word_npmi_csv(after.per_word_npmi));

  nlohmann::json stage{{"window", cfg.window},
                       {"reference_documents", reference.stats.doc_count},
                       {"outputs", {"quality.json", "per_word_npmi.csv"}}};
  if (baseline) {
    QualityReport before = compute_quality_report(*baseline, stats, store);
    write_json_file(out / "baseline_quality.json", quality_report_to_json(before));
    DeltaReport delta = delta_report(before, after);
    atomic_write_file((out / "delta.md").string(), delta_markdown(before, after, delta));
    stage["outputs"].push_back("baseline_quality.json");
    stage["outputs"].push_back("delta.md");
    stage["delta"] = {{"npmi", delta.npmi}, {"uci", delta.uci}, {"s", delta.s}, {"d", delta.d}};
  }
  manifest.stage("eval", stage);
}

inline ClassificationOutcome run_classify_stage(
    const RunConfig& cfg, const Corpus& corpus, const TopicSet& topics,
    const EmbeddingStore& store,
    const std::unordered_map<std::string, std::vector<double>>* doc_embeddings) {
  return run_classification(corpus, topics, store, cfg.seed, cfg.train_fraction,
                            doc_embeddings);
}

// -------- subcommands --------

inline void cmd_lda(const RunConfig& cfg) {
  require(cfg.corpus_path, "--corpus");
  std::filesystem::path out(cfg.out_dir);
  ManifestBuilder manifest(cfg);
  run_lda_stage(cfg, out, manifest);
  manifest.write(out);
}

inline void cmd_refine(const RunConfig& cfg) {
  require(cfg.topics_path, "--topics");
  require(cfg.vocab_path, "--vocab");
  require(cfg.embeddings_path, "--embeddings");
  std::filesystem::path out(cfg.out_dir);
  ManifestBuilder manifest(cfg);

  TopicSet topics = load_topic_set(cfg.topics_path);
  Vocabulary vocab = load_vocabulary(cfg.vocab_path);
  // unrestricted load: fallback selection needs vectors for words the model
  // proposes outside the vocabulary
  EmbeddingStore store = load_embeddings(cfg.embeddings_path);

  run_refine_stage(cfg, topics, vocab, store, out, manifest);
  manifest.write(out);
}

inline void cmd_eval(const RunConfig& cfg) {
  require(cfg.topics_path, "--topics");
  require(cfg.reference_path, "--reference");
  require(cfg.embeddings_path, "--embeddings");
  std::filesystem::path out(cfg.out_dir);
  ManifestBuilder manifest(cfg);

  TopicSet topics = load_topic_set(cfg.topics_path);
  std::optional<TopicSet> baseline;
  if (!cfg.baseline_path.empty()) baseline = load_topic_set(cfg.baseline_path);

  Corpus reference = preprocess_corpus(load_corpus_file(cfg.reference_path),
                                       preprocess_from(cfg));

  Vocabulary target_vocab;
  for (const auto& w : collect_words(topics)) target_vocab.add(w);
  if (baseline)
    for (const auto& w : collect_words(*baseline)) target_vocab.add(w);
  EmbeddingStore store = load_embeddings(cfg.embeddings_path, &target_vocab);

  run_eval_stage(cfg, topics, baseline ? &*baseline : nullptr, reference, store, out,
                 manifest);
  manifest.write(out);
}

inline void cmd_classify(const RunConfig& cfg) {
  require(cfg.corpus_path, "--corpus");
  require(cfg.labels_path, "--labels");
  require(cfg.topics_path, "--topics");
  require(cfg.embeddings_path, "--embeddings");
  std::filesystem::path out(cfg.out_dir);
  ManifestBuilder manifest(cfg);

  auto raw = load_corpus_file(cfg.corpus_path, cfg.labels_path);
  Corpus corpus = preprocess_corpus(raw, preprocess_from(cfg));
  TopicSet topics = load_topic_set(cfg.topics_path);

  Vocabulary restrict_vocab = corpus.vocabulary;
  for (const auto& w : collect_words(topics)) restrict_vocab.add(w);
  EmbeddingStore store = load_embeddings(cfg.embeddings_path, &restrict_vocab);

  std::optional<std::unordered_map<std::string, std::vector<double>>> doc_embeddings;
  if (!cfg.doc_embeddings_path.empty())
    doc_embeddings = load_doc_embeddings(cfg.doc_embeddings_path);

  ClassificationOutcome outcome = run_classify_stage(
      cfg, corpus, topics, store, doc_embeddings ? &*doc_embeddings : nullptr);
  write_json_file(out / "classification.json", classification_to_json(outcome));

  manifest.stage("classify", {{"accuracy", outcome.accuracy},
                              {"f1_macro", outcome.f1},
                              {"outputs", {"classification.json"}}});
  manifest.write(out);
}

inline void cmd_pipeline(const RunConfig& cfg) {
  require(cfg.corpus_path, "--corpus");
  require(cfg.embeddings_path, "--embeddings");
  std::filesystem::path out(cfg.out_dir);
  ManifestBuilder manifest(cfg);

  LdaStage lda = run_lda_stage(cfg, out / "lda", manifest);

  EmbeddingStore store = load_embeddings(cfg.embeddings_path);
  SetRefineResult refined = run_refine_stage(cfg, lda.topics, lda.corpus.vocabulary, store,
                                             out / "refine", manifest);

  Corpus reference = lda.corpus;
  if (!cfg.reference_path.empty()) {
    PreprocessConfig permissive;
    permissive.min_token_len = 1;
    permissive.min_doc_freq = 1;
    permissive.max_doc_freq_ratio = 1.0;
    reference = preprocess_corpus(load_corpus_file(cfg.reference_path), permissive);
  }
  run_eval_stage(cfg, refined.refined, &lda.topics, reference, store, out / "eval",
                 manifest);

  if (!cfg.labels_path.empty()) {
    ClassificationOutcome base =
        run_classify_stage(cfg, lda.corpus, lda.topics, store, nullptr);
    ClassificationOutcome after =
        run_classify_stage(cfg, lda.corpus, refined.refined, store, nullptr);
    write_json_file(out / "classify" / "classification.json",
                    {{"base", classification_to_json(base)},
                     {"refined", classification_to_json(after)}});
    manifest.stage("classify", {{"base_accuracy", base.accuracy},
                                {"refined_accuracy", after.accuracy},
                                {"base_f1_macro", base.f1},
                                {"refined_f1_macro", after.f1},
                                {"outputs", {"classify/classification.json"}}});
  }
  manifest.write(out);
}

}  // namespace cli_detail

// Entry point used by both the binary and the integration tests. Never
// exits the process; maps every failure onto the documented exit codes.
inline int run_cli(const std::vector<std::string>& args) {
  RunConfig cfg;

  // the eval reference corpus defaults to permissive preprocessing; the
  // config file and flags still override
  if (!args.empty() && args[0] == "eval") {
    cfg.min_doc_freq = 1;
    cfg.min_token_len = 1;
    cfg.max_doc_freq_ratio = 1.0;
  }

  // the config file seeds defaults before flags are applied
  for (size_t i = 0; i < args.size(); ++i) {
    std::string value;
    if (args[i] == "--config" && i + 1 < args.size()) value = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) value = args[i].substr(9);
    if (!value.empty()) {
      try {
        nlohmann::json j = nlohmann::json::parse(read_file(value), nullptr, false);
        if (j.is_discarded()) throw Error::format("config file is not valid JSON: " + value);
        run_config_from_json(j, cfg);
      } catch (const Error& e) {
        std::cerr << "error_code: " << error_code_name(e.code()) << "\n"
                  << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::format || e.code() == ErrorCode::io ? 2 : 1;
      }
      break;
    }
  }

  CLI::App app{"Topic refinement toolkit: LLM-guided post-processing of topic models"};
  app.require_subcommand(1);
  std::string config_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out_dir, "output directory")->required();
    sub->add_option("--seed", cfg.seed, "random seed (default 42)");
    sub->add_option("--jobs", cfg.jobs, "worker threads (0 = logical cores)");
    sub->add_flag("--deterministic", cfg.deterministic,
                  "single-threaded, fixed manifest timestamps");
    sub->add_option("--config", config_path, "JSON config file");
  };
  auto add_preprocess = [&](CLI::App* sub) {
    sub->add_option("--min-token-len", cfg.min_token_len, "minimum token length");
    sub->add_option("--min-doc-freq", cfg.min_doc_freq, "minimum document frequency");
    sub->add_option("--max-doc-freq-ratio", cfg.max_doc_freq_ratio,
                    "maximum document-frequency ratio");
    sub->add_option("--stopwords", cfg.stopwords_path, "stopword file, one word per line");
    sub->add_flag("--no-lowercase",
                  [&cfg](int64_t) { cfg.lowercase = false; },
                  "keep original casing");
  };
  auto add_llm = [&](CLI::App* sub) {
    sub->add_option("--backend", cfg.backend, "completion backend")
        ->check(CLI::IsMember({"mock", "remote"}));
    sub->add_option("--model", cfg.model_id, "model identifier");
    sub->add_option("--temperature", cfg.temperature, "sampling temperature (default 0)");
    sub->add_option("--max-retries", cfg.max_retries, "transport retry budget");
    sub->add_option("--timeout-ms", cfg.timeout_ms, "request timeout");
    sub->add_option("--mock-threshold", cfg.mock_threshold,
                    "mock oracle coherence threshold");
    sub->add_option("--cache-dir", cfg.cache_dir, "response cache directory");
  };

  CLI::App* lda = app.add_subcommand("lda", "fit a Gibbs-sampled LDA baseline");
  lda->add_option("--corpus", cfg.corpus_path, "corpus file, one document per line");
  lda->add_option("--labels", cfg.labels_path, "labels file aligned by line");
  lda->add_option("-K,--topics-count", cfg.topic_count, "number of topics");
  lda->add_option("--alpha", cfg.alpha, "document-topic prior (default 50/K)");
  lda->add_option("--beta", cfg.beta, "topic-word prior");
  lda->add_option("--iterations", cfg.iterations, "Gibbs sweeps");
  lda->add_option("--top-n", cfg.top_n, "words per topic");
  add_preprocess(lda);
  add_common(lda);

  CLI::App* refine = app.add_subcommand("refine", "refine a topic set with an LLM");
  refine->add_option("--topics", cfg.topics_path, "topic-set file");
  refine->add_option("--vocab", cfg.vocab_path, "vocabulary file");
  refine->add_option("--embeddings", cfg.embeddings_path, "word-vector file");
  refine->add_option("--context", cfg.context_mode, "prompt context source")
      ->check(CLI::IsMember({"original", "refined"}));
  add_llm(refine);
  add_common(refine);

  CLI::App* eval = app.add_subcommand("eval", "score a topic set");
  eval->add_option("--topics", cfg.topics_path, "topic-set file");
  eval->add_option("--baseline", cfg.baseline_path, "pre-refinement topic set");
  eval->add_option("--reference", cfg.reference_path, "reference corpus file");
  eval->add_option("--embeddings", cfg.embeddings_path, "word-vector file");
  eval->add_option("--window", cfg.window, "co-occurrence window (0 = whole document)");
  add_preprocess(eval);
  add_common(eval);

  CLI::App* classify = app.add_subcommand("classify", "topic-distribution classification");
  classify->add_option("--corpus", cfg.corpus_path, "corpus file");
  classify->add_option("--labels", cfg.labels_path, "labels file");
  classify->add_option("--topics", cfg.topics_path, "topic-set file");
  classify->add_option("--embeddings", cfg.embeddings_path, "word-vector file");
  classify->add_option("--doc-embeddings", cfg.doc_embeddings_path,
                       "precomputed document vectors");
  classify->add_option("--train-fraction", cfg.train_fraction, "training split fraction");
  add_preprocess(classify);
  add_common(classify);

  CLI::App* pipeline = app.add_subcommand("pipeline", "lda -> refine -> eval -> classify");
  pipeline->add_option("--corpus", cfg.corpus_path, "corpus file");
  pipeline->add_option("--labels", cfg.labels_path, "labels file");
  pipeline->add_option("--embeddings", cfg.embeddings_path, "word-vector file");
  pipeline->add_option("--reference", cfg.reference_path,
                       "reference corpus (defaults to --corpus)");
  pipeline->add_option("-K,--topics-count", cfg.topic_count, "number of topics");
  pipeline->add_option("--alpha", cfg.alpha, "document-topic prior (default 50/K)");
  pipeline->add_option("--beta", cfg.beta, "topic-word prior");
  pipeline->add_option("--iterations", cfg.iterations, "Gibbs sweeps");
  pipeline->add_option("--top-n", cfg.top_n, "words per topic");
  pipeline->add_option("--window", cfg.window, "co-occurrence window");
  pipeline->add_option("--context", cfg.context_mode, "prompt context source")
      ->check(CLI::IsMember({"original", "refined"}));
  pipeline->add_option("--train-fraction", cfg.train_fraction, "training split fraction");
  add_preprocess(pipeline);
  add_llm(pipeline);
  add_common(pipeline);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "error_code: usage\n";
    return 1;
  }

  for (CLI::App* sub : {lda, refine, eval, classify, pipeline})
    if (sub->parsed()) cfg.subcommand = sub->get_name();

  try {
    std::cout << run_config_to_json(cfg).dump(2) << "\n";
    if (cfg.subcommand == "lda") cli_detail::cmd_lda(cfg);
    else if (cfg.subcommand == "refine") cli_detail::cmd_refine(cfg);
    else if (cfg.subcommand == "eval") cli_detail::cmd_eval(cfg);
    else if (cfg.subcommand == "classify") cli_detail::cmd_classify(cfg);
    else if (cfg.subcommand == "pipeline") cli_detail::cmd_pipeline(cfg);
    else throw Error::usage("unknown subcommand");
  } catch (const Error& e) {
    std::cerr << "error_code: " << error_code_name(e.code()) << "\n"
              << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::usage:
      case ErrorCode::config:
        return 1;
      case ErrorCode::backend:
        return 3;
      default:
        return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error_code: internal\nerror: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace topicrefine
