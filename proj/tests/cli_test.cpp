#include "topicrefine/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "test_support.hpp"

using namespace topicrefine;
using nlohmann::json;
using testsupport::TempDir;

namespace {

// Collects relative path -> bytes for a whole output tree.
std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    out[std::filesystem::relative(entry.path(), root).string()] =
        testsupport::slurp(entry.path().string());
  }
  return out;
}

struct CerrCapture {
  CerrCapture() : old(std::cerr.rdbuf(buffer.rdbuf())) {}
  ~CerrCapture() { std::cerr.rdbuf(old); }
  std::ostringstream buffer;
  std::streambuf* old;
};

struct CoutSilencer {
  CoutSilencer() : old(std::cout.rdbuf(buffer.rdbuf())) {}
  ~CoutSilencer() { std::cout.rdbuf(old); }
  std::ostringstream buffer;
  std::streambuf* old;
};

// Shared fixture files: two planted word clusters with labels.
struct CliFixture {
  TempDir tmp;
  std::string docs, labels, vectors, topics, vocab;

  CliFixture() {
    Rng rng(17);
    std::vector<std::string> food, tech;
    for (int i = 0; i < 6; ++i) {
      food.push_back("food" + std::to_string(i));
      tech.push_back("tech" + std::to_string(i));
    }
    std::string doc_text, label_text;
    for (int d = 0; d < 40; ++d) {
      const auto& half = d % 2 == 0 ? food : tech;
      std::vector<std::string> doc;
      for (int t = 0; t < 6; ++t) doc.push_back(half[rng.below(half.size())]);
      doc_text += join(doc, " ") + "\n";
      label_text += (d % 2 == 0 ? "food\n" : "tech\n");
    }
    docs = tmp.file("docs.txt");
    labels = tmp.file("labels.txt");
    vectors = tmp.file("vectors.txt");
    topics = tmp.file("topics.txt");
    vocab = tmp.file("vocab.txt");
    testsupport::write_file(docs, doc_text);
    testsupport::write_file(labels, label_text);

    std::string vec_text;
    for (int i = 0; i < 6; ++i)
      vec_text += food[static_cast<size_t>(i)] + " 1 0 0." + std::to_string(i + 1) + "\n";
    for (int i = 0; i < 6; ++i)
      vec_text += tech[static_cast<size_t>(i)] + " 0 1 0." + std::to_string(i + 1) + "\n";
    testsupport::write_file(vectors, vec_text);

    // one planted intruder per topic
    testsupport::write_file(topics,
                            "food0 food1 food2 tech5\n"
                            "tech0 tech1 tech2 food5\n");
    std::string vocab_text;
    for (const auto& w : food) vocab_text += w + "\n";
    for (const auto& w : tech) vocab_text += w + "\n";
    testsupport::write_file(vocab, vocab_text);
  }

  std::vector<std::string> refine_args(const std::string& out) const {
    return {"refine",      "--topics", topics, "--vocab",        vocab,
            "--embeddings", vectors,   "--out", out,             "--backend",
            "mock",        "--deterministic"};
  }
};

TEST(Cli, UnknownFlagIsUsageError) {
  CoutSilencer out;
  CerrCapture err;
  int code = run_cli({"refine", "--nonsense"});
  EXPECT_EQ(code, 1);
  EXPECT_NE(err.buffer.str().find("error_code: usage"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsUsageError) {
  CoutSilencer out;
  CerrCapture err;
  EXPECT_EQ(run_cli({}), 1);
}

TEST(Cli, HelpExitsZero) {
  CoutSilencer out;
  EXPECT_EQ(run_cli({"--help"}), 0);
  EXPECT_NE(out.buffer.str().find("pipeline"), std::string::npos);
}

TEST(Cli, MissingInputFileIsDataError) {
  CliFixture fx;
  CoutSilencer out;
  CerrCapture err;
  int code = run_cli({"lda", "--corpus", "/nonexistent/corpus.txt", "--out",
                      fx.tmp.file("out")});
  EXPECT_EQ(code, 2);
  EXPECT_NE(err.buffer.str().find("error_code: io"), std::string::npos);
}

TEST(Cli, RefineRunsAreByteIdentical) {
  CliFixture fx;
  CoutSilencer out;
  ASSERT_EQ(run_cli(fx.refine_args(fx.tmp.file("r1"))), 0) << out.buffer.str();
  ASSERT_EQ(run_cli(fx.refine_args(fx.tmp.file("r2"))), 0);
  auto t1 = snapshot_tree(fx.tmp.file("r1"));
  auto t2 = snapshot_tree(fx.tmp.file("r2"));
  ASSERT_EQ(t1.size(), t2.size());
  EXPECT_EQ(t1, t2);
  // intruders swapped out
  std::string refined = testsupport::slurp(fx.tmp.file("r1") + "/refined_topics.txt");
  EXPECT_EQ(refined.find("tech5"), std::string::npos);
  EXPECT_EQ(refined.find("food5"), std::string::npos);
}

TEST(Cli, RefineWritesRecordsSummaryManifest) {
  CliFixture fx;
  CoutSilencer out;
  std::string dir = fx.tmp.file("refined");
  ASSERT_EQ(run_cli(fx.refine_args(dir)), 0);

  // records.jsonl: one record per (topic, position)
  std::ifstream records(dir + "/records.jsonl");
  std::string line;
  int lines = 0;
  long prompt_sum = 0, completion_sum = 0;
  while (std::getline(records, line)) {
    ++lines;
    json rec = json::parse(line);
    prompt_sum += rec["prompt_tokens"].get<long>();
    completion_sum += rec["completion_tokens"].get<long>();
  }
  EXPECT_EQ(lines, 8);  // 2 topics x 4 words

  json summary = json::parse(testsupport::slurp(dir + "/summary.json"));
  EXPECT_EQ(summary["completion_calls"], 8);
  EXPECT_EQ(summary["total_prompt_tokens"], prompt_sum);
  EXPECT_EQ(summary["total_completion_tokens"], completion_sum);

  json manifest = json::parse(testsupport::slurp(dir + "/manifest.json"));
  EXPECT_EQ(manifest["subcommand"], "refine");
  EXPECT_EQ(manifest["token_usage"]["prompt_tokens"], prompt_sum);
  EXPECT_EQ(manifest["config"]["out"], ".");
  EXPECT_EQ(manifest["started_at"], "1970-01-01T00:00:00Z");  // deterministic mode
}

TEST(Cli, EvalEmitsQualityAndDelta) {
  CliFixture fx;
  CoutSilencer out;
  std::string refined_dir = fx.tmp.file("step1");
  ASSERT_EQ(run_cli(fx.refine_args(refined_dir)), 0);

  std::string eval_dir = fx.tmp.file("step2");
  int code = run_cli({"eval", "--topics", refined_dir + "/refined_topics.txt", "--baseline",
                      fx.topics, "--reference", fx.docs, "--embeddings", fx.vectors,
                      "--window", "0", "--out", eval_dir});
  ASSERT_EQ(code, 0);

  json quality = json::parse(testsupport::slurp(eval_dir + "/quality.json"));
  EXPECT_EQ(quality["topic_count"], 2);
  EXPECT_EQ(quality["words_per_topic"], 4);
  EXPECT_TRUE(quality["aggregate"]["c_a"].is_null());

  json base = json::parse(testsupport::slurp(eval_dir + "/baseline_quality.json"));
  // refinement must help on this planted fixture
  EXPECT_GT(quality["aggregate"]["s"].get<double>(), base["aggregate"]["s"].get<double>());

  std::string delta = testsupport::slurp(eval_dir + "/delta.md");
  EXPECT_NE(delta.find("| NPMI |"), std::string::npos);
  EXPECT_NE(delta.find("+"), std::string::npos);

  // csv shape: 2 rows x 4 columns
  std::string csv = testsupport::slurp(eval_dir + "/per_word_npmi.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), ','), 6);
}

TEST(Cli, ClassifyWritesOutcome) {
  CliFixture fx;
  CoutSilencer out;
  std::string dir = fx.tmp.file("cls");
  int code = run_cli({"classify", "--corpus", fx.docs, "--labels", fx.labels, "--topics",
                      fx.topics, "--embeddings", fx.vectors, "--min-doc-freq", "1",
                      "--min-token-len", "1", "--max-doc-freq-ratio", "1.0", "--seed", "3",
                      "--out", dir});
  ASSERT_EQ(code, 0);
  json outcome = json::parse(testsupport::slurp(dir + "/classification.json"));
  EXPECT_EQ(outcome["split_seed"], 3);
  EXPECT_EQ(outcome["train_fraction"], 0.8);
  // clusters are separable even with the planted intruders
  EXPECT_GT(outcome["accuracy"].get<double>(), 0.9);
}

TEST(Cli, PipelineManifestTokensMatchRecordSums) {
  CliFixture fx;
  CoutSilencer out;
  std::string dir = fx.tmp.file("pipe");
  int code = run_cli({"pipeline", "--corpus", fx.docs, "--labels", fx.labels,
                      "--embeddings", fx.vectors, "-K", "2", "--iterations", "40",
                      "--min-doc-freq", "1", "--min-token-len", "1",
                      "--max-doc-freq-ratio", "1.0", "--top-n", "4", "--window", "0",
                      "--deterministic", "--out", dir});
  ASSERT_EQ(code, 0);

  long prompt_sum = 0, completion_sum = 0;
  std::ifstream records(dir + "/refine/records.jsonl");
  std::string line;
  while (std::getline(records, line)) {
    json rec = json::parse(line);
    prompt_sum += rec["prompt_tokens"].get<long>();
    completion_sum += rec["completion_tokens"].get<long>();
  }
  json manifest = json::parse(testsupport::slurp(dir + "/manifest.json"));
  EXPECT_EQ(manifest["token_usage"]["prompt_tokens"], prompt_sum);
  EXPECT_EQ(manifest["token_usage"]["completion_tokens"], completion_sum);
  EXPECT_EQ(manifest["token_usage"]["completion_calls"], 8);  // K=2 x N=4
  ASSERT_GE(manifest["stages"].size(), 4u);

  json cls = json::parse(testsupport::slurp(dir + "/classify/classification.json"));
  EXPECT_TRUE(cls.contains("base"));
  EXPECT_TRUE(cls.contains("refined"));
}

TEST(Cli, ConfigFileSeedsDefaultsFlagsWin) {
  CliFixture fx;
  CoutSilencer out;
  std::string config_path = fx.tmp.file("config.json");
  testsupport::write_file(config_path, json{{"min_doc_freq", 1},
                                            {"min_token_len", 1},
                                            {"max_doc_freq_ratio", 1.0},
                                            {"topic_count", 2},
                                            {"iterations", 30},
                                            {"top_n", 4},
                                            {"seed", 9}}
                                           .dump());
  std::string dir = fx.tmp.file("fromconfig");
  int code = run_cli({"lda", "--corpus", fx.docs, "--config", config_path, "--seed", "11",
                      "--out", dir});
  ASSERT_EQ(code, 0);
  json meta = json::parse(testsupport::slurp(dir + "/lda_meta.json"));
  EXPECT_EQ(meta["topic_count"], 2);   // from config file
  EXPECT_EQ(meta["iterations"], 30);   // from config file
  EXPECT_EQ(meta["seed"], 11);         // flag beats config
  json manifest = json::parse(testsupport::slurp(dir + "/manifest.json"));
  EXPECT_EQ(manifest["config"]["seed"], 11);
}

TEST(Cli, ManifestConfigSnapshotReproducesTheRun) {
  CliFixture fx;
  CoutSilencer out;
  std::string first = fx.tmp.file("orig");
  ASSERT_EQ(run_cli(fx.refine_args(first)), 0);

  json manifest = json::parse(testsupport::slurp(first + "/manifest.json"));
  std::string config_path = fx.tmp.file("replay.json");
  testsupport::write_file(config_path, manifest["config"].dump());

  std::string second = fx.tmp.file("replay");
  ASSERT_EQ(run_cli({"refine", "--config", config_path, "--out", second}), 0);
  EXPECT_EQ(snapshot_tree(first), snapshot_tree(second));
}

TEST(Cli, NoLeftoverTempFiles) {
  CliFixture fx;
  CoutSilencer out;
  std::string dir = fx.tmp.file("clean");
  ASSERT_EQ(run_cli(fx.refine_args(dir)), 0);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
    EXPECT_EQ(entry.path().string().find(".tmp"), std::string::npos) << entry.path();
}

TEST(Cli, RemoteBackendWithoutEndpointFails) {
  CliFixture fx;
  CoutSilencer out;
  CerrCapture err;
  unsetenv(kEnvApiUrl);
  unsetenv(kEnvApiKey);
  std::vector<std::string> args = fx.refine_args(fx.tmp.file("remote"));
  args[10] = "remote";  // swap backend value
  int code = run_cli(args);
  EXPECT_EQ(code, 3);  // every topic fails on the missing endpoint
  EXPECT_NE(err.buffer.str().find("error_code: backend"), std::string::npos);
}

}  // namespace
