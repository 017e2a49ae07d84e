#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicrefine/corpus.hpp"
#include "topicrefine/embeddings.hpp"
#include "topicrefine/error.hpp"

namespace topicrefine {

inline constexpr double kCoherenceEpsilon = 1e-12;

// Boolean sliding-window counts over a reference corpus. window = 0 means
// one window per document; otherwise stride-1 windows of `window` tokens
// (documents shorter than the window form a single window). A word or pair
// counts at most once per window.
struct CooccurrenceStats {
  int window = 10;
  long total_windows = 0;
  std::unordered_map<std::string, long> word_windows;
  // canonical key: pair_windows[min(a,b)][max(a,b)]
  std::unordered_map<std::string, std::unordered_map<std::string, long>> pair_windows;
  double epsilon = kCoherenceEpsilon;

  long word_count(const std::string& w) const {
    auto it = word_windows.find(w);
    return it == word_windows.end() ? 0 : it->second;
  }

  long pair_count(const std::string& a, const std::string& b) const {
    const std::string& lo = a < b ? a : b;
    const std::string& hi = a < b ? b : a;
    auto it = pair_windows.find(lo);
    if (it == pair_windows.end()) return 0;
    auto jt = it->second.find(hi);
    return jt == it->second.end() ? 0 : jt->second;
  }
};

inline CooccurrenceStats build_cooccurrence(const Corpus& reference, int window,
                                            const std::unordered_set<std::string>& target_words) {
  if (window < 0) throw Error::config("window must be nonnegative");
  if (target_words.empty()) throw Error::data("no target words to count");
  if (reference.documents.empty()) throw Error::data("empty reference corpus");

  CooccurrenceStats stats;
  stats.window = window;

  auto count_window_set = [&stats](const std::vector<const std::string*>& present) {
    ++stats.total_windows;
    for (size_t i = 0; i < present.size(); ++i) {
      ++stats.word_windows[*present[i]];
      for (size_t j = i + 1; j < present.size(); ++j) {
        const std::string& a = *present[i];
        const std::string& b = *present[j];
        if (a < b) ++stats.pair_windows[a][b];
        else ++stats.pair_windows[b][a];
      }
    }
  };

  for (const auto& doc : reference.documents) {
    const auto& toks = doc.tokens;
    const long len = static_cast<long>(toks.size());
    if (len == 0) continue;
    if (window == 0 || len <= window) {
      // whole document as a single window
      std::unordered_set<std::string> seen;
      std::vector<const std::string*> present;
      for (const auto& t : toks) {
        if (!target_words.count(t)) continue;
        if (seen.insert(t).second) present.push_back(&*seen.find(t));
      }
      count_window_set(present);
      continue;
    }
    // streaming pass: multiset of target words inside the sliding window
    std::unordered_map<std::string, int> multiplicity;
    auto enter = [&](long pos) {
      const auto& t = toks[static_cast<size_t>(pos)];
      if (target_words.count(t)) ++multiplicity[t];
    };
    auto leave = [&](long pos) {
      const auto& t = toks[static_cast<size_t>(pos)];
      if (!target_words.count(t)) return;
      auto it = multiplicity.find(t);
      if (--it->second == 0) multiplicity.erase(it);
    };
    for (long p = 0; p < window; ++p) enter(p);
    for (long start = 0;; ++start) {
      std::vector<const std::string*> present;
      present.reserve(multiplicity.size());
      for (const auto& [w, n] : multiplicity) present.push_back(&w);
      // deterministic pair keys do not need a sorted `present`
      count_window_set(present);
      if (start + window >= len) break;
      leave(start);
      enter(start + window);
    }
  }
  return stats;
}

namespace detail {

inline void require_seen(const CooccurrenceStats& stats, const std::string& w) {
  if (stats.word_count(w) == 0)
    throw Error::data("word '" + w + "' unseen in reference corpus");
}

}  // namespace detail

// PMI with epsilon smoothing inside the joint probability.
inline double pmi_pair(const std::string& a, const std::string& b,
                       const CooccurrenceStats& stats) {
  detail::require_seen(stats, a);
  detail::require_seen(stats, b);
  const double total = static_cast<double>(stats.total_windows);
  const double pa = static_cast<double>(stats.word_count(a)) / total;
  const double pb = static_cast<double>(stats.word_count(b)) / total;
  const double pab = static_cast<double>(stats.pair_count(a, b)) / total;
  return std::log((pab + stats.epsilon) / (pa * pb));
}

// NPMI in [-1, 1]; a zero pair count reports the epsilon limit of exactly -1.
inline double npmi_pair(const std::string& a, const std::string& b,
                        const CooccurrenceStats& stats) {
  detail::require_seen(stats, a);
  detail::require_seen(stats, b);
  if (stats.pair_count(a, b) == 0) return -1.0;
  const double total = static_cast<double>(stats.total_windows);
  const double pa = static_cast<double>(stats.word_count(a)) / total;
  const double pb = static_cast<double>(stats.word_count(b)) / total;
  const double pab = static_cast<double>(stats.pair_count(a, b)) / total;
  return std::log((pab + stats.epsilon) / (pa * pb)) / -std::log(pab + stats.epsilon);
}

namespace detail {

// Words of the topic present in the reference, preserving topic order.
inline std::vector<std::string> scoreable_words(const std::vector<std::string>& topic,
                                                const CooccurrenceStats& stats) {
  std::vector<std::string> out;
  for (const auto& w : topic)
    if (stats.word_count(w) > 0) out.push_back(w);
  return out;
}

template <typename PairMetric>
double mean_pairwise(const std::vector<std::string>& words, PairMetric&& metric) {
  double sum = 0.0;
  long pairs = 0;
  for (size_t j = 0; j < words.size(); ++j)
    for (size_t k = j + 1; k < words.size(); ++k) {
      sum += metric(words[j], words[k]);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

}  // namespace detail

// Mean pairwise NPMI over the scoreable words of the topic.
inline double topic_npmi(const std::vector<std::string>& topic, const CooccurrenceStats& stats) {
  auto words = detail::scoreable_words(topic, stats);
  if (words.size() < 2) throw Error::data("topic unscoreable: fewer than 2 reference words");
  return detail::mean_pairwise(words, [&](const std::string& a, const std::string& b) {
    return npmi_pair(a, b, stats);
  });
}

// Mean pairwise PMI (UCI coherence) over the scoreable words.
inline double topic_uci(const std::vector<std::string>& topic, const CooccurrenceStats& stats) {
  auto words = detail::scoreable_words(topic, stats);
  if (words.size() < 2) throw Error::data("topic unscoreable: fewer than 2 reference words");
  return detail::mean_pairwise(words, [&](const std::string& a, const std::string& b) {
    return pmi_pair(a, b, stats);
  });
}

// Mean pairwise cosine within one topic over embedded pairs; NaN when fewer
// than two words have vectors.
inline double topic_within_similarity(const std::vector<std::string>& topic,
                                      const EmbeddingStore& store) {
  double sum = 0.0;
  long pairs = 0;
  for (size_t j = 0; j < topic.size(); ++j) {
    const auto* vj = store.find(topic[j]);
    if (!vj) continue;
    for (size_t k = j + 1; k < topic.size(); ++k) {
      const auto* vk = store.find(topic[k]);
      if (!vk) continue;
      sum += cosine_similarity(*vj, *vk);
      ++pairs;
    }
  }
  if (pairs == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(pairs);
}

// Within-topic similarity S: mean cosine over every evaluated within-topic
// pair across all topics. Topics with fewer than two embedded words
// contribute nothing; their indices land in `skipped` when provided.
inline double within_topic_similarity(const TopicSet& topics, const EmbeddingStore& store,
                                      std::vector<int>* skipped = nullptr) {
  double sum = 0.0;
  long pairs = 0;
  for (int i = 0; i < topics.topic_count(); ++i) {
    const auto& topic = topics.topics[static_cast<size_t>(i)];
    long topic_pairs = 0;
    for (size_t j = 0; j < topic.size(); ++j) {
      const auto* vj = store.find(topic[j]);
      if (!vj) continue;
      for (size_t k = j + 1; k < topic.size(); ++k) {
        const auto* vk = store.find(topic[k]);
        if (!vk) continue;
        sum += cosine_similarity(*vj, *vk);
        ++topic_pairs;
      }
    }
    if (topic_pairs == 0 && skipped) skipped->push_back(i);
    pairs += topic_pairs;
  }
  if (pairs == 0) throw Error::data("no topic has two embedded words");
  return sum / static_cast<double>(pairs);
}

// Between-topic distance D: mean squared Euclidean distance between topic
// centroid pairs.
inline double between_topic_distance(const TopicSet& topics, const EmbeddingStore& store) {
  const int k = topics.topic_count();
  if (k < 2) throw Error::data("need at least two topics");
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto c = topic_centroid(topics.topics[static_cast<size_t>(i)], store, i);
    if (!c) throw Error::data("topic " + std::to_string(i) + " has no embedded words");
    centroids.push_back(std::move(c->vector));
  }
  double sum = 0.0;
  long pairs = 0;
  for (int i = 0; i < k; ++i)
    for (int m = i + 1; m < k; ++m) {
      double dist = 0.0;
      for (size_t d = 0; d < centroids[static_cast<size_t>(i)].size(); ++d) {
        double diff = centroids[static_cast<size_t>(i)][d] - centroids[static_cast<size_t>(m)][d];
        dist += diff * diff;
      }
      sum += dist;
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

// Cell (i, j): mean NPMI of word j against the other scoreable words of
// topic i; NaN marks unscoreable cells.
inline std::vector<std::vector<double>> per_word_npmi_matrix(const TopicSet& topics,
                                                             const CooccurrenceStats& stats) {
  std::vector<std::vector<double>> matrix;
  matrix.reserve(static_cast<size_t>(topics.topic_count()));
  for (const auto& topic : topics.topics) {
    std::vector<double> row(topic.size(), std::numeric_limits<double>::quiet_NaN());
    for (size_t j = 0; j < topic.size(); ++j) {
      if (stats.word_count(topic[j]) == 0) continue;
      double sum = 0.0;
      long n = 0;
      for (size_t k = 0; k < topic.size(); ++k) {
        if (k == j || stats.word_count(topic[k]) == 0) continue;
        sum += npmi_pair(topic[j], topic[k], stats);
        ++n;
      }
      if (n > 0) row[j] = sum / static_cast<double>(n);
    }
    matrix.push_back(std::move(row));
  }
  return matrix;
}

struct TopicQuality {
  double npmi = std::numeric_limits<double>::quiet_NaN();
  double uci = std::numeric_limits<double>::quiet_NaN();
  double s_within = std::numeric_limits<double>::quiet_NaN();
  double coverage = 0.0;  // fraction of words found in the reference
};

struct QualityAggregate {
  double npmi = std::numeric_limits<double>::quiet_NaN();
  double uci = std::numeric_limits<double>::quiet_NaN();
  double s = std::numeric_limits<double>::quiet_NaN();
  double d = std::numeric_limits<double>::quiet_NaN();
  // reserved for externally computed Palmetto metrics
  std::optional<double> c_a, c_p, c_v;
};

struct QualityReport {
  int topic_count = 0;
  int words_per_topic = 0;
  std::vector<TopicQuality> per_topic;
  QualityAggregate aggregate;  // means of per-topic values; D is pairwise
  std::vector<std::vector<double>> per_word_npmi;
};

namespace detail {

inline double mean_ignoring_nan(const std::vector<double>& values) {
  double sum = 0.0;
  long n = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

}  // namespace detail

inline QualityReport compute_quality_report(const TopicSet& topics,
                                            const CooccurrenceStats& stats,
                                            const EmbeddingStore& store) {
  QualityReport report;
  report.topic_count = topics.topic_count();
  report.words_per_topic = topics.words_per_topic;

  std::vector<double> npmis, ucis, sims;
  for (const auto& topic : topics.topics) {
    TopicQuality q;
    auto scoreable = detail::scoreable_words(topic, stats);
    q.coverage = topic.empty() ? 0.0
                               : static_cast<double>(scoreable.size()) /
                                     static_cast<double>(topic.size());
    if (scoreable.size() >= 2) {
      q.npmi = topic_npmi(topic, stats);
      q.uci = topic_uci(topic, stats);
    }
    q.s_within = topic_within_similarity(topic, store);
    npmis.push_back(q.npmi);
    ucis.push_back(q.uci);
    sims.push_back(q.s_within);
    report.per_topic.push_back(q);
  }
  report.aggregate.npmi = detail::mean_ignoring_nan(npmis);
  report.aggregate.uci = detail::mean_ignoring_nan(ucis);
  report.aggregate.s = detail::mean_ignoring_nan(sims);
  if (topics.topic_count() >= 2) {
    try {
      report.aggregate.d = between_topic_distance(topics, store);
    } catch (const Error&) {
      // left as NaN when some topic has no embedded words
    }
  }
  report.per_word_npmi = per_word_npmi_matrix(topics, stats);
  return report;
}

struct DeltaReport {
  double npmi = 0.0, uci = 0.0, s = 0.0, d = 0.0;
};

// after - before; shapes must match.
inline DeltaReport delta_report(const QualityReport& before, const QualityReport& after) {
  if (before.topic_count != after.topic_count ||
      before.words_per_topic != after.words_per_topic)
    throw Error::data("mismatched topic shape: before " + std::to_string(before.topic_count) +
                      "x" + std::to_string(before.words_per_topic) + ", after " +
                      std::to_string(after.topic_count) + "x" +
                      std::to_string(after.words_per_topic));
  DeltaReport d;
  d.npmi = after.aggregate.npmi - before.aggregate.npmi;
  d.uci = after.aggregate.uci - before.aggregate.uci;
  d.s = after.aggregate.s - before.aggregate.s;
  d.d = after.aggregate.d - before.aggregate.d;
  return d;
}

// -------- rendering --------

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "NA";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string format_delta(double v) {
  if (std::isnan(v)) return "NA";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%+.6f", v);  // explicit sign, Table-2 style
  return buf;
}

inline std::string delta_markdown(const QualityReport& before, const QualityReport& after,
                                  const DeltaReport& delta) {
  std::string out;
  out += "| Metric | Before | After | Delta |\n";
  out += "|--------|--------|-------|-------|\n";
  auto row = [&](const char* name, double b, double a, double d) {
    out += "| ";
    out += name;
    out += " | " + format_metric(b) + " | " + format_metric(a) + " | " + format_delta(d) +
           " |\n";
  };
  row("NPMI", before.aggregate.npmi, after.aggregate.npmi, delta.npmi);
  row("UCI", before.aggregate.uci, after.aggregate.uci, delta.uci);
  row("S", before.aggregate.s, after.aggregate.s, delta.s);
  row("D", before.aggregate.d, after.aggregate.d, delta.d);
  return out;
}

inline nlohmann::json quality_report_to_json(const QualityReport& r) {
  nlohmann::json per_topic = nlohmann::json::array();
  for (const auto& q : r.per_topic) {
    per_topic.push_back({{"npmi", q.npmi},
                         {"uci", q.uci},
                         {"s_within", q.s_within},
                         {"coverage", q.coverage}});
  }
  nlohmann::json aggregate{{"npmi", r.aggregate.npmi},
                           {"uci", r.aggregate.uci},
                           {"s", r.aggregate.s},
                           {"d", r.aggregate.d}};
  aggregate["c_a"] = r.aggregate.c_a ? nlohmann::json(*r.aggregate.c_a) : nlohmann::json();
  aggregate["c_p"] = r.aggregate.c_p ? nlohmann::json(*r.aggregate.c_p) : nlohmann::json();
  aggregate["c_v"] = r.aggregate.c_v ? nlohmann::json(*r.aggregate.c_v) : nlohmann::json();
  return nlohmann::json{{"topic_count", r.topic_count},
                        {"words_per_topic", r.words_per_topic},
                        {"per_topic", per_topic},
                        {"aggregate", aggregate},
                        {"per_word_npmi", r.per_word_npmi}};
}

// K rows x N columns; unscoreable cells carry the NA sentinel.
inline std::string per_word_npmi_csv(const std::vector<std::vector<double>>& matrix) {
  std::string out;
  for (const auto& row : matrix) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out += ',';
      if (std::isnan(row[j])) {
        out += "NA";
      } else {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.10g", row[j]);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace topicrefine
