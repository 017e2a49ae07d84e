#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicrefine/corpus.hpp"
#include "topicrefine/embeddings.hpp"
#include "topicrefine/error.hpp"
#include "topicrefine/util.hpp"

namespace topicrefine {

// Nonnegative unit-sum weights over the K topics.
struct TopicDistribution {
  std::string doc_id;
  std::vector<double> weights;
};

// Cosine similarities clamped at zero and L1-normalized; a document with no
// positive similarity gets the uniform distribution.
inline TopicDistribution topic_distribution(const std::vector<double>& doc_embedding,
                                            const std::vector<std::vector<double>>& topic_embeddings,
                                            const std::string& doc_id = "") {
  if (topic_embeddings.empty()) throw Error::data("no topic embeddings");
  if (l2_norm(doc_embedding) == 0.0) throw Error::data("zero document embedding");

  TopicDistribution dist;
  dist.doc_id = doc_id;
  dist.weights.reserve(topic_embeddings.size());
  double sum = 0.0;
  for (const auto& t : topic_embeddings) {
    double w = std::max(0.0, cosine_similarity(doc_embedding, t));
    dist.weights.push_back(w);
    sum += w;
  }
  if (sum == 0.0) {
    const double uniform = 1.0 / static_cast<double>(dist.weights.size());
    std::fill(dist.weights.begin(), dist.weights.end(), uniform);
  } else {
    for (double& w : dist.weights) w /= sum;
  }
  return dist;
}

// Mean of the available word vectors.
inline std::vector<double> embed_words(const std::vector<std::string>& words,
                                       const EmbeddingStore& store) {
  auto c = topic_centroid(words, store);
  if (!c) throw Error::data("unembeddable: no word has a vector");
  return std::move(c->vector);
}

inline std::vector<double> embed_document(const Document& doc, const EmbeddingStore& store) {
  return embed_words(doc.tokens, store);
}

inline std::vector<double> embed_topic(const std::vector<std::string>& topic_words,
                                       const EmbeddingStore& store) {
  return embed_words(topic_words, store);
}

struct ClassificationOutcome {
  double accuracy = 0.0;
  double f1 = 0.0;  // macro-averaged
  uint64_t split_seed = 0;
  double train_fraction = 0.8;
  int train_size = 0;
  int test_size = 0;
  int skipped_documents = 0;  // unlabeled or unembeddable
  int class_count = 0;
  std::vector<int> test_truth;      // test-fold audit trail
  std::vector<int> test_predicted;
};

namespace detail {

// One-vs-rest linear SVM trained by Pegasos-style subgradient descent.
// Fixed epochs and schedule keep the outcome bit-deterministic per seed.
class LinearSvm {
 public:
  LinearSvm(int feature_dim, int class_count)
      : dim_(feature_dim),
        weights_(static_cast<size_t>(class_count),
                 std::vector<double>(static_cast<size_t>(feature_dim) + 1, 0.0)) {}

  void train(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
             uint64_t seed) {
    constexpr int kEpochs = 200;
    constexpr double kC = 1.0;
    const double lambda = 1.0 / (kC * static_cast<double>(x.size()));
    for (size_t c = 0; c < weights_.size(); ++c) {
      auto& w = weights_[c];
      Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (c + 1)));
      std::vector<size_t> order(x.size());
      std::iota(order.begin(), order.end(), 0);
      long t = 0;
      for (int epoch = 0; epoch < kEpochs; ++epoch) {
        rng.shuffle(order);
        for (size_t idx : order) {
          ++t;
          const double eta = 1.0 / (lambda * static_cast<double>(t));
          const double label = y[idx] == static_cast<int>(c) ? 1.0 : -1.0;
          const double margin = label * score(w, x[idx]);
          // regularize the weights, not the bias
          for (int d = 0; d < dim_; ++d) w[static_cast<size_t>(d)] *= (1.0 - eta * lambda);
          if (margin < 1.0) {
            for (int d = 0; d < dim_; ++d)
              w[static_cast<size_t>(d)] += eta * label * x[idx][static_cast<size_t>(d)];
            w[static_cast<size_t>(dim_)] += eta * label;
          }
        }
      }
    }
  }

  int predict(const std::vector<double>& features) const {
    int best = 0;
    double best_score = score(weights_[0], features);
    for (size_t c = 1; c < weights_.size(); ++c) {
      double s = score(weights_[c], features);
      if (s > best_score) {  // ties keep the lower class index
        best_score = s;
        best = static_cast<int>(c);
      }
    }
    return best;
  }

 private:
  double score(const std::vector<double>& w, const std::vector<double>& x) const {
    double s = w[static_cast<size_t>(dim_)];  // bias
    for (int d = 0; d < dim_; ++d) s += w[static_cast<size_t>(d)] * x[static_cast<size_t>(d)];
    return s;
  }

  int dim_;
  std::vector<std::vector<double>> weights_;
};

inline double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted,
                       int class_count) {
  std::vector<long> tp(static_cast<size_t>(class_count), 0);
  std::vector<long> fp(static_cast<size_t>(class_count), 0);
  std::vector<long> fn(static_cast<size_t>(class_count), 0);
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) {
      ++tp[static_cast<size_t>(truth[i])];
    } else {
      ++fp[static_cast<size_t>(predicted[i])];
      ++fn[static_cast<size_t>(truth[i])];
    }
  }
  double sum = 0.0;
  for (int c = 0; c < class_count; ++c) {
    const double denom = static_cast<double>(2 * tp[static_cast<size_t>(c)] +
                                             fp[static_cast<size_t>(c)] +
                                             fn[static_cast<size_t>(c)]);
    sum += denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp[static_cast<size_t>(c)]) / denom;
  }
  return sum / static_cast<double>(class_count);
}

}  // namespace detail

// Features are topic distributions; split is stratified per label by seed;
// the classifier is a deterministic one-vs-rest linear SVM.
inline ClassificationOutcome run_classification(
    const Corpus& corpus, const TopicSet& topics, const EmbeddingStore& store,
    uint64_t split_seed, double train_fraction = 0.8,
    const std::unordered_map<std::string, std::vector<double>>* doc_embeddings = nullptr) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw Error::config("train fraction must lie strictly between 0 and 1");

  std::vector<std::vector<double>> topic_vecs;
  topic_vecs.reserve(topics.topics.size());
  for (const auto& t : topics.topics) topic_vecs.push_back(embed_topic(t, store));

  // labels in sorted order for stable class ids
  std::map<std::string, int> label_ids;
  for (const auto& doc : corpus.documents)
    if (doc.label) label_ids.emplace(*doc.label, 0);
  if (label_ids.size() < 2) throw Error::data("need at least two labels");
  {
    int next = 0;
    for (auto& [label, id] : label_ids) id = next++;
  }

  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  int skipped = 0;
  for (const auto& doc : corpus.documents) {
    if (!doc.label) {
      ++skipped;
      continue;
    }
    std::vector<double> embedding;
    if (doc_embeddings) {
      auto it = doc_embeddings->find(doc.id);
      if (it == doc_embeddings->end()) {
        ++skipped;
        continue;
      }
      embedding = it->second;
    } else {
      try {
        embedding = embed_document(doc, store);
      } catch (const Error&) {
        ++skipped;  // excluded with a count, not a failure
        continue;
      }
    }
    features.push_back(topic_distribution(embedding, topic_vecs, doc.id).weights);
    labels.push_back(label_ids.at(*doc.label));
  }

  // stratified shuffle split
  std::map<int, std::vector<size_t>> by_label;
  for (size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  for (const auto& [label, members] : by_label) {
    if (members.size() < 2)
      throw Error::data("a label has fewer than 2 usable documents");
  }

  Rng rng(split_seed);
  std::vector<size_t> train_idx, test_idx;
  for (auto& [label, members] : by_label) {
    rng.shuffle(members);
    const long n = static_cast<long>(members.size());
    long n_train = std::lround(train_fraction * static_cast<double>(n));
    n_train = std::clamp(n_train, 1L, n - 1);  // both folds keep every label
    for (long i = 0; i < n; ++i) {
      if (i < n_train) train_idx.push_back(members[static_cast<size_t>(i)]);
      else test_idx.push_back(members[static_cast<size_t>(i)]);
    }
  }
  if (train_idx.empty() || test_idx.empty()) throw Error::data("degenerate split");

  std::vector<std::vector<double>> train_x;
  std::vector<int> train_y;
  for (size_t i : train_idx) {
    train_x.push_back(features[i]);
    train_y.push_back(labels[i]);
  }

  detail::LinearSvm svm(static_cast<int>(topic_vecs.size()),
                        static_cast<int>(label_ids.size()));
  svm.train(train_x, train_y, split_seed);

  std::vector<int> truth, predicted;
  long correct = 0;
  for (size_t i : test_idx) {
    int p = svm.predict(features[i]);
    truth.push_back(labels[i]);
    predicted.push_back(p);
    if (p == labels[i]) ++correct;
  }

  ClassificationOutcome outcome;
  outcome.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
  outcome.f1 = detail::macro_f1(truth, predicted, static_cast<int>(label_ids.size()));
  outcome.split_seed = split_seed;
  outcome.train_fraction = train_fraction;
  outcome.train_size = static_cast<int>(train_idx.size());
  outcome.test_size = static_cast<int>(test_idx.size());
  outcome.skipped_documents = skipped;
  outcome.class_count = static_cast<int>(label_ids.size());
  outcome.test_truth = std::move(truth);
  outcome.test_predicted = std::move(predicted);
  return outcome;
}

inline nlohmann::json classification_to_json(const ClassificationOutcome& o) {
  return nlohmann::json{{"accuracy", o.accuracy},
                        {"f1_macro", o.f1},
                        {"split_seed", o.split_seed},
                        {"train_fraction", o.train_fraction},
                        {"train_size", o.train_size},
                        {"test_size", o.test_size},
                        {"skipped_documents", o.skipped_documents}};
}

// File format: one line of space-separated floats per document, aligned by
// line number with the corpus file.
inline std::unordered_map<std::string, std::vector<double>> load_doc_embeddings(
    const std::string& path) {
  std::unordered_map<std::string, std::vector<double>> out;
  int line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    std::vector<double> vec;
    const char* p = line.c_str();
    char* end = nullptr;
    while (*p) {
      double v = std::strtod(p, &end);
      if (end == p) break;
      vec.push_back(v);
      p = end;
    }
    while (*p == ' ') ++p;
    if (*p != '\0' || vec.empty())
      throw Error::format(path + ": line " + std::to_string(line_no) +
                          " is not a vector of floats");
    out.emplace(std::to_string(line_no), std::move(vec));
  }
  if (out.empty()) throw Error::format(path + ": no document embeddings");
  return out;
}

}  // namespace topicrefine
