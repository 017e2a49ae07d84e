#pragma once

#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "topicrefine/corpus.hpp"
#include "topicrefine/error.hpp"

namespace topicrefine {

// Static word vectors (GloVe-style). Immutable after load.
class EmbeddingStore {
 public:
  int dim() const { return dim_; }
  size_t size() const { return vectors_.size(); }

  bool has(const std::string& word) const { return vectors_.count(word) > 0; }

  const std::vector<double>* find(const std::string& word) const {
    auto it = vectors_.find(word);
    return it == vectors_.end() ? nullptr : &it->second;
  }

  void insert(const std::string& word, std::vector<double> vec) {
    if (dim_ == 0) dim_ = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != dim_)
      throw Error::data("vector for '" + word + "' has dimension " +
                        std::to_string(vec.size()) + ", store is " + std::to_string(dim_));
    vectors_.emplace(word, std::move(vec));  // first occurrence wins
  }

 private:
  int dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Text format: "word v1 v2 ... vD" per line, D fixed by the first line.
inline EmbeddingStore load_embeddings(const std::string& path,
                                      const Vocabulary* restrict_to = nullptr) {
  EmbeddingStore store;
  int dim = 0;
  int line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0)
      throw Error::format(path + ": line " + std::to_string(line_no) + " is not 'word v1 ... vD'");
    std::string word = line.substr(0, sp);
    std::vector<double> vec;
    if (dim > 0) vec.reserve(static_cast<size_t>(dim));
    const char* p = line.c_str() + sp;
    char* end = nullptr;
    while (*p) {
      double v = std::strtod(p, &end);
      if (end == p) break;
      vec.push_back(v);
      p = end;
    }
    while (*p == ' ') ++p;
    if (*p != '\0' || vec.empty())
      throw Error::format(path + ": line " + std::to_string(line_no) + " has a non-numeric value");
    if (dim == 0) dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != dim)
      throw Error::format(path + ": line " + std::to_string(line_no) + " has dimension " +
                          std::to_string(vec.size()) + ", expected " + std::to_string(dim));
    if (restrict_to && !restrict_to->contains(word)) continue;
    store.insert(word, std::move(vec));
  }
  if (dim == 0 || store.size() == 0)
    throw Error::format(path + ": no usable embedding lines");
  return store;
}

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw Error::data("cosine: dimension mismatch " + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error::data("cosine: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct TopicCentroid {
  int topic_index = 0;
  std::vector<double> vector;  // mean of the found word vectors
  int covered = 0;             // topic words present in the store
};

inline std::optional<TopicCentroid> topic_centroid(const std::vector<std::string>& words,
                                                   const EmbeddingStore& store,
                                                   int topic_index = 0) {
  TopicCentroid c;
  c.topic_index = topic_index;
  c.vector.assign(static_cast<size_t>(store.dim()), 0.0);
  for (const auto& w : words) {
    if (const auto* v = store.find(w)) {
      for (size_t d = 0; d < v->size(); ++d) c.vector[d] += (*v)[d];
      ++c.covered;
    }
  }
  if (c.covered == 0) return std::nullopt;
  for (double& x : c.vector) x /= c.covered;
  return c;
}

// Vocabulary word most similar on average to the candidate words, skipping
// excluded words and the candidates themselves. Ties break toward the lower
// vocabulary index; candidates with no vector are ignored in the average.
inline std::string nearest_in_vocab_by_avg_similarity(
    const std::vector<std::string>& candidates, const Vocabulary& vocab,
    const std::unordered_set<std::string>& exclude, const EmbeddingStore& store) {
  std::vector<const std::vector<double>*> cand_vecs;
  std::unordered_set<std::string> cand_set;
  for (const auto& c : candidates) {
    cand_set.insert(c);
    if (const auto* v = store.find(c)) cand_vecs.push_back(v);
  }
  if (cand_vecs.empty())
    throw Error::data("fallback impossible: no candidate word has an embedding");

  // pre-normalize candidates once
  std::vector<std::vector<double>> cand_unit;
  cand_unit.reserve(cand_vecs.size());
  for (const auto* v : cand_vecs) {
    double n = l2_norm(*v);
    if (n == 0.0) continue;
    std::vector<double> u(*v);
    for (double& x : u) x /= n;
    cand_unit.push_back(std::move(u));
  }
  if (cand_unit.empty())
    throw Error::data("fallback impossible: candidate vectors are all zero");

  const std::string* best = nullptr;
  double best_score = 0.0;
  for (const auto& w : vocab.words) {
    if (exclude.count(w) || cand_set.count(w)) continue;
    const auto* v = store.find(w);
    if (!v) continue;
    double n = l2_norm(*v);
    if (n == 0.0) continue;
    double sum = 0.0;
    for (const auto& u : cand_unit) {
      double dot = 0.0;
      for (size_t d = 0; d < u.size(); ++d) dot += u[d] * (*v)[d];
      sum += dot / n;
    }
    double score = sum / static_cast<double>(cand_unit.size());
    if (!best || score > best_score) {
      best = &w;
      best_score = score;
    }
  }
  if (!best) throw Error::data("fallback impossible: no searchable vocabulary word");
  return *best;
}

}  // namespace topicrefine
