#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "topicrefine/corpus.hpp"
#include "topicrefine/error.hpp"
#include "topicrefine/util.hpp"

namespace topicrefine {

struct LdaState {
  int topic_count = 0;  // K
  double alpha = 0.0;
  double beta = 0.0;
  int vocab_size = 0;
  uint64_t rng_seed = 0;

  std::vector<std::vector<int>> doc_words;    // token ids per document
  std::vector<std::vector<int>> assignments;  // topic id per token
  std::vector<std::vector<int>> n_dk;         // doc x topic
  std::vector<std::vector<int>> n_kw;         // topic x word
  std::vector<long> n_k;                      // tokens per topic

  std::vector<std::pair<int, double>> ll_trace;  // (sweep, log likelihood)
};

// GibbsLDA++ convention: alpha defaults to 50/K when unset.
inline double default_alpha(int k) { return 50.0 / static_cast<double>(k); }
inline constexpr double kDefaultBeta = 0.01;

namespace detail {

inline double lda_weight(const LdaState& s, int d, int w, int k) {
  return (s.n_dk[static_cast<size_t>(d)][static_cast<size_t>(k)] + s.alpha) *
         (s.n_kw[static_cast<size_t>(k)][static_cast<size_t>(w)] + s.beta) /
         (static_cast<double>(s.n_k[static_cast<size_t>(k)]) +
          s.beta * static_cast<double>(s.vocab_size));
}

inline void check_count_invariants(const LdaState& s) {
  for (size_t d = 0; d < s.doc_words.size(); ++d) {
    long sum = std::accumulate(s.n_dk[d].begin(), s.n_dk[d].end(), 0L);
    assert(sum == static_cast<long>(s.doc_words[d].size()));
    (void)sum;
  }
  for (int k = 0; k < s.topic_count; ++k) {
    long sum = std::accumulate(s.n_kw[static_cast<size_t>(k)].begin(),
                               s.n_kw[static_cast<size_t>(k)].end(), 0L);
    assert(sum == s.n_k[static_cast<size_t>(k)]);
    (void)sum;
  }
}

}  // namespace detail

// Conditional topic distribution for the word at (doc, word id), given the
// current counts with that token already removed. Exposed so tests can check
// normalization against the sampler's arithmetic.
inline std::vector<double> lda_conditional(const LdaState& state, int doc, int word) {
  std::vector<double> p(static_cast<size_t>(state.topic_count));
  double total = 0.0;
  for (int k = 0; k < state.topic_count; ++k) {
    p[static_cast<size_t>(k)] = detail::lda_weight(state, doc, word, k);
    total += p[static_cast<size_t>(k)];
  }
  for (double& x : p) x /= total;
  return p;
}

inline double log_likelihood(const LdaState& s);

// Collapsed Gibbs sampling, sequential over tokens for reproducibility.
// Identical (corpus, parameters, seed) gives an identical state.
inline LdaState fit_gibbs_lda(const Corpus& corpus, int topic_count, double alpha, double beta,
                              int iterations, uint64_t seed) {
  if (topic_count < 1) throw Error::config("K must be at least 1");
  if (iterations < 1) throw Error::config("iterations must be at least 1");
  if (alpha <= 0.0 || beta <= 0.0) throw Error::config("alpha and beta must be positive");
  const int vocab_size = static_cast<int>(corpus.vocabulary.size());
  if (topic_count > vocab_size)
    throw Error::config("K=" + std::to_string(topic_count) + " exceeds vocabulary size " +
                        std::to_string(vocab_size));
  if (corpus.documents.empty()) throw Error::data("corpus degenerate: no documents");

  LdaState s;
  s.topic_count = topic_count;
  s.alpha = alpha;
  s.beta = beta;
  s.vocab_size = vocab_size;
  s.rng_seed = seed;

  s.doc_words.reserve(corpus.documents.size());
  for (const auto& doc : corpus.documents) {
    std::vector<int> ids;
    ids.reserve(doc.tokens.size());
    for (const auto& t : doc.tokens) {
      int id = corpus.vocabulary.index_of(t);
      if (id < 0) throw Error::data("token '" + t + "' is not in the vocabulary");
      ids.push_back(id);
    }
    s.doc_words.push_back(std::move(ids));
  }

  const size_t docs = s.doc_words.size();
  s.assignments.resize(docs);
  s.n_dk.assign(docs, std::vector<int>(static_cast<size_t>(topic_count), 0));
  s.n_kw.assign(static_cast<size_t>(topic_count),
                std::vector<int>(static_cast<size_t>(vocab_size), 0));
  s.n_k.assign(static_cast<size_t>(topic_count), 0);

  Rng rng(seed);
  for (size_t d = 0; d < docs; ++d) {
    s.assignments[d].resize(s.doc_words[d].size());
    for (size_t i = 0; i < s.doc_words[d].size(); ++i) {
      int k = static_cast<int>(rng.below(static_cast<uint64_t>(topic_count)));
      int w = s.doc_words[d][i];
      s.assignments[d][i] = k;
      ++s.n_dk[d][static_cast<size_t>(k)];
      ++s.n_kw[static_cast<size_t>(k)][static_cast<size_t>(w)];
      ++s.n_k[static_cast<size_t>(k)];
    }
  }

  for (int sweep = 1; sweep <= iterations; ++sweep) {
    for (size_t d = 0; d < docs; ++d) {
      for (size_t i = 0; i < s.doc_words[d].size(); ++i) {
        const int w = s.doc_words[d][i];
        const int old_k = s.assignments[d][i];
        --s.n_dk[d][static_cast<size_t>(old_k)];
        --s.n_kw[static_cast<size_t>(old_k)][static_cast<size_t>(w)];
        --s.n_k[static_cast<size_t>(old_k)];

        double total = 0.0;
        for (int k = 0; k < topic_count; ++k)
          total += detail::lda_weight(s, static_cast<int>(d), w, k);
        double u = rng.uniform01() * total;
        int new_k = topic_count - 1;
        double acc = 0.0;
        for (int k = 0; k < topic_count; ++k) {
          acc += detail::lda_weight(s, static_cast<int>(d), w, k);
          if (u < acc) {
            new_k = k;
            break;
          }
        }

        s.assignments[d][i] = new_k;
        ++s.n_dk[d][static_cast<size_t>(new_k)];
        ++s.n_kw[static_cast<size_t>(new_k)][static_cast<size_t>(w)];
        ++s.n_k[static_cast<size_t>(new_k)];
      }
    }
#ifndef NDEBUG
    detail::check_count_invariants(s);
#endif
    if (sweep % 10 == 0 || sweep == iterations)
      s.ll_trace.emplace_back(sweep, log_likelihood(s));
  }
  return s;
}

// Collapsed joint log likelihood log p(w, z | alpha, beta).
inline double log_likelihood(const LdaState& s) {
  const double v = static_cast<double>(s.vocab_size);
  const double k_count = static_cast<double>(s.topic_count);
  double ll = 0.0;
  for (int k = 0; k < s.topic_count; ++k) {
    ll += std::lgamma(s.beta * v) - v * std::lgamma(s.beta);
    for (int w = 0; w < s.vocab_size; ++w)
      ll += std::lgamma(s.n_kw[static_cast<size_t>(k)][static_cast<size_t>(w)] + s.beta);
    ll -= std::lgamma(static_cast<double>(s.n_k[static_cast<size_t>(k)]) + s.beta * v);
  }
  for (size_t d = 0; d < s.doc_words.size(); ++d) {
    ll += std::lgamma(s.alpha * k_count) - k_count * std::lgamma(s.alpha);
    for (int k = 0; k < s.topic_count; ++k)
      ll += std::lgamma(s.n_dk[d][static_cast<size_t>(k)] + s.alpha);
    ll -= std::lgamma(static_cast<double>(s.doc_words[d].size()) + s.alpha * k_count);
  }
  return ll;
}

// Top-N words per topic by smoothed probability (n_kw+beta)/(n_k+beta*V),
// ties toward the lower vocabulary index. Within a topic the smoothing terms
// are constant, so ranking by raw counts is the same ordering.
inline TopicSet top_words(const LdaState& state, const Vocabulary& vocab, int top_n) {
  if (top_n < 1) throw Error::config("N must be at least 1");
  if (top_n > state.vocab_size)
    throw Error::config("N=" + std::to_string(top_n) + " exceeds vocabulary size " +
                        std::to_string(state.vocab_size));

  TopicSet set;
  set.words_per_topic = top_n;
  set.provenance = "lda K=" + std::to_string(state.topic_count) +
                   " seed=" + std::to_string(state.rng_seed);
  for (int k = 0; k < state.topic_count; ++k) {
    std::vector<int> order(static_cast<size_t>(state.vocab_size));
    std::iota(order.begin(), order.end(), 0);
    const auto& row = state.n_kw[static_cast<size_t>(k)];
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return row[static_cast<size_t>(a)] > row[static_cast<size_t>(b)];
    });
    std::vector<std::string> words;
    words.reserve(static_cast<size_t>(top_n));
    for (int i = 0; i < top_n; ++i)
      words.push_back(vocab.words[static_cast<size_t>(order[static_cast<size_t>(i)])]);
    set.topics.push_back(std::move(words));
  }
  return set;
}

}  // namespace topicrefine
