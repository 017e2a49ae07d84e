#include "topicrefine/embeddings.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace topicrefine;
using testsupport::TempDir;
using testsupport::make_store;
using testsupport::make_vocab;
using testsupport::unit;

namespace {

TEST(LoadEmbeddings, ParsesSimpleFile) {
  TempDir tmp;
  testsupport::write_file(tmp.file("e.txt"), "a 1 0\nb 0 1\n");
  EmbeddingStore store = load_embeddings(tmp.file("e.txt"));
  EXPECT_EQ(store.dim(), 2);
  EXPECT_EQ(store.size(), 2u);
  ASSERT_TRUE(store.has("a"));
  EXPECT_EQ((*store.find("a"))[0], 1.0);
}

TEST(LoadEmbeddings, DimensionMismatchNamesLine) {
  TempDir tmp;
  testsupport::write_file(tmp.file("e.txt"), "a 1 0\nc 1 0 0\nb 0 1\n");
  try {
    load_embeddings(tmp.file("e.txt"));
    FAIL() << "expected format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::format);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadEmbeddings, EmptyFileRejected) {
  TempDir tmp;
  testsupport::write_file(tmp.file("e.txt"), "");
  EXPECT_THROW(load_embeddings(tmp.file("e.txt")), Error);
}

TEST(LoadEmbeddings, RestrictToVocabulary) {
  TempDir tmp;
  testsupport::write_file(tmp.file("e.txt"), "a 1 0\nb 0 1\nc 1 1\n");
  Vocabulary vocab = make_vocab({"a", "c"});
  EmbeddingStore store = load_embeddings(tmp.file("e.txt"), &vocab);
  EXPECT_EQ(store.size(), 2u);
  EXPECT_FALSE(store.has("b"));
  EXPECT_EQ(store.dim(), 2);
}

TEST(Cosine, KnownValues) {
  EXPECT_DOUBLE_EQ(cosine_similarity({1, 0, 0}, {1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity({1, 0, 0}, {0, 1, 0}), 0.0);
  EXPECT_NEAR(cosine_similarity({1, 1, 0}, {1, 0, 0}), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Cosine, ZeroVectorRejected) {
  try {
    cosine_similarity({0, 0}, {1, 0});
    FAIL() << "expected zero-vector error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::data);
    EXPECT_NE(std::string(e.what()).find("zero vector"), std::string::npos);
  }
}

TEST(Cosine, DimensionMismatchRejected) {
  EXPECT_THROW(cosine_similarity({1, 0}, {1, 0, 0}), Error);
}

TEST(Cosine, SymmetricAndScaleInvariant) {
  std::mt19937_64 rng(11);
  auto draw = [&] {
    std::vector<double> v(5);
    for (double& x : v) x = static_cast<double>(rng() % 2000) / 1000.0 - 1.0;
    if (l2_norm(v) == 0.0) v[0] = 1.0;
    return v;
  };
  for (int i = 0; i < 50; ++i) {
    auto a = draw(), b = draw();
    double ab = cosine_similarity(a, b);
    EXPECT_DOUBLE_EQ(ab, cosine_similarity(b, a));
    auto a7 = a;
    for (double& x : a7) x *= 7.0;
    EXPECT_NEAR(cosine_similarity(a7, b), ab, 1e-12);
    EXPECT_GE(ab, -1.0 - 1e-12);
    EXPECT_LE(ab, 1.0 + 1e-12);
  }
}

TEST(TopicCentroidOp, MeanOfFoundVectors) {
  auto store = make_store({{"a", {1, 0}}, {"b", {0, 1}}});
  auto c = topic_centroid({"a", "b", "missing"}, store, 3);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->covered, 2);
  EXPECT_EQ(c->topic_index, 3);
  EXPECT_DOUBLE_EQ(c->vector[0], 0.5);
  EXPECT_DOUBLE_EQ(c->vector[1], 0.5);
}

TEST(TopicCentroidOp, NoneFound) {
  auto store = make_store({{"a", {1, 0}}});
  EXPECT_FALSE(topic_centroid({"x", "y"}, store).has_value());
}

// vocab {x,y}; e_c=[1,0]; e_x=[1,0]; e_y=[0,1]: brute force gives x.
TEST(NearestByAvgSimilarity, TwoWordVocab) {
  auto store = make_store({{"x", {1, 0}}, {"y", {0, 1}}, {"c", {1, 0}}});
  Vocabulary vocab = make_vocab({"x", "y"});
  EXPECT_EQ(nearest_in_vocab_by_avg_similarity({"c"}, vocab, {}, store), "x");
  EXPECT_EQ(nearest_in_vocab_by_avg_similarity({"c"}, vocab, {"x"}, store), "y");
}

// Exhaustive evaluation over a 3-word vocabulary with two candidates.
TEST(NearestByAvgSimilarity, ThreeWordVocabBruteForce) {
  auto store = make_store({{"x", {1, 0}},
                           {"y", {0, 1}},
                           {"z", unit({0.9, 0.1})},
                           {"c1", {1, 0}},
                           {"c2", unit({0.8, 0.2})}});
  Vocabulary vocab = make_vocab({"x", "y", "z"});

  std::string best;
  double best_score = -2.0;
  for (const auto& w : vocab.words) {
    double mean = (testsupport::cos_oracle(*store.find(w), *store.find("c1")) +
                   testsupport::cos_oracle(*store.find(w), *store.find("c2"))) /
                  2.0;
    if (mean > best_score) {
      best_score = mean;
      best = w;
    }
  }
  EXPECT_EQ(best, "z");  // sanity on the oracle itself
  EXPECT_EQ(nearest_in_vocab_by_avg_similarity({"c1", "c2"}, vocab, {}, store), best);
}

TEST(NearestByAvgSimilarity, ScaleInvariantArgmax) {
  auto store = make_store({{"x", {1, 0}},
                           {"y", {0, 1}},
                           {"z", unit({0.9, 0.1})},
                           {"c1", {7, 0}},  // x7 scaling must not change the argmax
                           {"c2", {0.8 * 7, 0.2 * 7}}});
  Vocabulary vocab = make_vocab({"x", "y", "z"});
  EXPECT_EQ(nearest_in_vocab_by_avg_similarity({"c1", "c2"}, vocab, {}, store), "z");
}

TEST(NearestByAvgSimilarity, ExactTiesBreakByVocabularyIndex) {
  // y and z carry identical vectors; the earlier vocabulary entry wins
  auto store = make_store({{"z", {1, 0}}, {"y", {1, 0}}, {"x", {0, 1}}, {"c", {1, 0}}});
  Vocabulary vocab = make_vocab({"x", "z", "y"});
  EXPECT_EQ(nearest_in_vocab_by_avg_similarity({"c"}, vocab, {}, store), "z");
  Vocabulary flipped = make_vocab({"x", "y", "z"});
  EXPECT_EQ(nearest_in_vocab_by_avg_similarity({"c"}, flipped, {}, store), "y");
}

TEST(NearestByAvgSimilarity, NoCandidateVectorIsError) {
  auto store = make_store({{"x", {1, 0}}});
  Vocabulary vocab = make_vocab({"x"});
  try {
    nearest_in_vocab_by_avg_similarity({"ghost"}, vocab, {}, store);
    FAIL() << "expected fallback-impossible error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("fallback impossible"), std::string::npos);
  }
}

TEST(NearestByAvgSimilarity, EmptySearchSetIsError) {
  auto store = make_store({{"x", {1, 0}}, {"c", {1, 0}}});
  Vocabulary vocab = make_vocab({"x"});
  EXPECT_THROW(nearest_in_vocab_by_avg_similarity({"c"}, vocab, {"x"}, store), Error);
}

TEST(NearestByAvgSimilarity, CandidatesWithoutVectorsIgnored) {
  auto store = make_store({{"x", {1, 0}}, {"y", {0, 1}}, {"c", {1, 0}}});
  Vocabulary vocab = make_vocab({"x", "y"});
  // "ghost" has no vector; the average is over c alone
  EXPECT_EQ(nearest_in_vocab_by_avg_similarity({"ghost", "c"}, vocab, {}, store), "x");
}

// Exhaustive-scan oracle equivalence on random instances with <= 50 words.
TEST(NearestByAvgSimilarity, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 30; ++trial) {
    const int vocab_size = 3 + static_cast<int>(rng() % 48);
    const int dim = 3;
    EmbeddingStore store;
    Vocabulary vocab;
    for (int i = 0; i < vocab_size; ++i) {
      std::string w = "w" + std::to_string(i);
      vocab.add(w);
      std::vector<double> v(dim);
      for (double& x : v) x = static_cast<double>(rng() % 1000) / 500.0 - 1.0;
      if (l2_norm(v) == 0.0) v[0] = 0.5;
      store.insert(w, v);
    }
    std::vector<std::string> candidates;
    const int n_cand = 1 + static_cast<int>(rng() % 3);
    for (int c = 0; c < n_cand; ++c) {
      std::string w = "c" + std::to_string(c);
      std::vector<double> v(dim);
      for (double& x : v) x = static_cast<double>(rng() % 1000) / 500.0 - 1.0;
      if (l2_norm(v) == 0.0) v[1] = 0.5;
      store.insert(w, v);
      candidates.push_back(w);
    }
    std::unordered_set<std::string> exclude;
    exclude.insert("w0");

    // independent exhaustive scan
    std::string expected;
    double best = -2.0;
    for (const auto& w : vocab.words) {
      if (exclude.count(w)) continue;
      double sum = 0.0;
      for (const auto& c : candidates)
        sum += testsupport::cos_oracle(*store.find(w), *store.find(c));
      double mean = sum / candidates.size();
      if (mean > best) {
        best = mean;
        expected = w;
      }
    }

    std::string got = nearest_in_vocab_by_avg_similarity(candidates, vocab, exclude, store);
    EXPECT_EQ(got, expected) << "trial " << trial;
    EXPECT_FALSE(exclude.count(got));
    EXPECT_TRUE(store.has(got));
  }
}

}  // namespace
