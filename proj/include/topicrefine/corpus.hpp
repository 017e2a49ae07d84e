#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "topicrefine/error.hpp"
#include "topicrefine/util.hpp"

namespace topicrefine {

struct Document {
  std::string id;                    // source line number as a string
  std::vector<std::string> tokens;   // lowercase, whitespace-free
  std::optional<std::string> label;
};

struct Vocabulary {
  std::vector<std::string> words;               // index order
  std::unordered_map<std::string, int> index;   // word -> ordinal
  std::unordered_map<std::string, int> doc_freq;

  bool contains(const std::string& w) const { return index.count(w) > 0; }

  int index_of(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? -1 : it->second;
  }

  void add(const std::string& w, int df = 0) {
    if (contains(w)) return;
    index.emplace(w, static_cast<int>(words.size()));
    words.push_back(w);
    if (df > 0) doc_freq[w] = df;
  }

  size_t size() const { return words.size(); }
};

struct CorpusStats {
  int doc_count = 0;
  int label_count = 0;
  double avg_tokens = 0.0;
};

struct Corpus {
  std::vector<Document> documents;
  Vocabulary vocabulary;
  CorpusStats stats;
};

struct RawDocument {
  std::string text;
  std::optional<std::string> label;
};

struct PreprocessConfig {
  bool lowercase = true;
  int min_token_len = 2;
  std::optional<std::string> stopwords_path;
  int min_doc_freq = 5;
  double max_doc_freq_ratio = 0.5;
};

// One topic per line, N words each, most relevant first.
struct TopicSet {
  std::vector<std::vector<std::string>> topics;
  int words_per_topic = 0;
  std::string provenance;

  int topic_count() const { return static_cast<int>(topics.size()); }
};

namespace detail {

inline bool is_space_codepoint(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Minimal UTF-8 decode; invalid sequences fall back to the raw byte value.
inline uint32_t next_codepoint(std::string_view s, size_t& i) {
  const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
  unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int extra = 0;
  uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) { extra = 1; cp = b0 & 0x1F; }
  else if ((b0 & 0xF0) == 0xE0) { extra = 2; cp = b0 & 0x0F; }
  else if ((b0 & 0xF8) == 0xF0) { extra = 3; cp = b0 & 0x07; }
  else { ++i; return b0; }
  if (i + static_cast<size_t>(extra) >= s.size()) {
    // truncated sequence
    ++i;
    return b0;
  }
  for (int k = 1; k <= extra; ++k) {
    unsigned char bk = byte(i + k);
    if ((bk & 0xC0) != 0x80) { ++i; return b0; }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += static_cast<size_t>(extra) + 1;
  return cp;
}

struct TokenPiece {
  std::string text;
  int codepoints = 0;
};

// Strips ASCII punctuation from both ends; multi-byte codepoints count as
// word characters.
inline TokenPiece strip_edges(std::string_view raw) {
  struct Cp { size_t offset; size_t bytes; uint32_t cp; };
  std::vector<Cp> cps;
  size_t i = 0;
  while (i < raw.size()) {
    size_t start = i;
    uint32_t cp = next_codepoint(raw, i);
    cps.push_back({start, i - start, cp});
  }
  auto is_word_char = [](uint32_t cp) {
    return cp >= 128 || std::isalnum(static_cast<int>(cp));
  };
  size_t b = 0, e = cps.size();
  while (b < e && !is_word_char(cps[b].cp)) ++b;
  while (e > b && !is_word_char(cps[e - 1].cp)) --e;
  if (b >= e) return {};
  size_t from = cps[b].offset;
  size_t to = cps[e - 1].offset + cps[e - 1].bytes;
  return {std::string(raw.substr(from, to - from)), static_cast<int>(e - b)};
}

}  // namespace detail

// Splits on Unicode whitespace, lowercases (ASCII), strips non-alphanumeric
// edge punctuation, drops tokens shorter than min_token_len codepoints.
inline std::vector<std::string> tokenize(std::string_view text, const PreprocessConfig& cfg) {
  std::vector<std::string> tokens;
  std::string piece;
  size_t i = 0;
  auto flush = [&] {
    if (piece.empty()) return;
    detail::TokenPiece t = detail::strip_edges(piece);
    piece.clear();
    if (t.codepoints < cfg.min_token_len || t.text.empty()) return;
    tokens.push_back(cfg.lowercase ? to_lower_ascii(t.text) : t.text);
  };
  while (i < text.size()) {
    size_t start = i;
    uint32_t cp = detail::next_codepoint(text, i);
    if (detail::is_space_codepoint(cp)) {
      flush();
    } else {
      piece.append(text.substr(start, i - start));
    }
  }
  flush();
  return tokens;
}

inline std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::unordered_set<std::string> stop;
  for (const auto& line : read_lines(path)) {
    std::string w = trim(line);
    if (!w.empty()) stop.insert(to_lower_ascii(w));
  }
  return stop;
}

namespace detail {

inline CorpusStats compute_stats(const std::vector<Document>& docs) {
  CorpusStats stats;
  stats.doc_count = static_cast<int>(docs.size());
  std::set<std::string> labels;
  long total_tokens = 0;
  for (const auto& d : docs) {
    total_tokens += static_cast<long>(d.tokens.size());
    if (d.label) labels.insert(*d.label);
  }
  stats.label_count = static_cast<int>(labels.size());
  stats.avg_tokens = docs.empty() ? 0.0
                                  : static_cast<double>(total_tokens) / static_cast<double>(docs.size());
  return stats;
}

inline Vocabulary build_vocabulary(const std::vector<Document>& docs) {
  Vocabulary vocab;
  for (const auto& d : docs) {
    std::unordered_set<std::string> seen;
    for (const auto& t : d.tokens) {
      vocab.add(t);
      if (seen.insert(t).second) ++vocab.doc_freq[t];
    }
  }
  return vocab;
}

}  // namespace detail

// Builds a Corpus from already-tokenized documents (no frequency filtering).
// Used for reference corpora and synthetic fixtures.
inline Corpus corpus_from_documents(std::vector<Document> docs) {
  Corpus corpus;
  corpus.documents = std::move(docs);
  corpus.vocabulary = detail::build_vocabulary(corpus.documents);
  corpus.stats = detail::compute_stats(corpus.documents);
  return corpus;
}

// Tokenize + filter until the vocabulary honors both frequency bounds and
// every retained document still has at least two in-vocabulary tokens.
// Filtering loops to a fixpoint because dropping documents shifts document
// frequencies, which can invalidate further words.
inline Corpus preprocess_corpus(const std::vector<RawDocument>& raw_docs,
                                const PreprocessConfig& cfg) {
  if (raw_docs.empty()) throw Error::data("corpus degenerate: no input documents");

  std::unordered_set<std::string> stop;
  if (cfg.stopwords_path) stop = load_stopwords(*cfg.stopwords_path);

  std::vector<Document> docs;
  docs.reserve(raw_docs.size());
  for (size_t i = 0; i < raw_docs.size(); ++i) {
    Document d;
    d.id = std::to_string(i + 1);
    d.label = raw_docs[i].label;
    for (auto& tok : tokenize(raw_docs[i].text, cfg)) {
      if (!stop.count(tok)) d.tokens.push_back(std::move(tok));
    }
    if (d.tokens.size() >= 2) docs.push_back(std::move(d));
  }

  for (;;) {
    if (docs.empty()) throw Error::data("corpus degenerate: every document was filtered out");
    std::unordered_map<std::string, int> df;
    for (const auto& d : docs) {
      std::unordered_set<std::string> seen;
      for (const auto& t : d.tokens) {
        if (seen.insert(t).second) ++df[t];
      }
    }
    const double doc_count = static_cast<double>(docs.size());
    std::unordered_set<std::string> drop_words;
    for (const auto& [w, n] : df) {
      if (n < cfg.min_doc_freq ||
          static_cast<double>(n) / doc_count > cfg.max_doc_freq_ratio + 1e-12) {
        drop_words.insert(w);
      }
    }
    bool changed = false;
    std::vector<Document> kept;
    kept.reserve(docs.size());
    for (auto& d : docs) {
      if (!drop_words.empty()) {
        std::vector<std::string> toks;
        toks.reserve(d.tokens.size());
        for (auto& t : d.tokens) {
          if (drop_words.count(t)) changed = true;
          else toks.push_back(std::move(t));
        }
        d.tokens = std::move(toks);
      }
      if (d.tokens.size() >= 2) kept.push_back(std::move(d));
      else changed = true;
    }
    docs = std::move(kept);
    if (!changed) break;
  }

  return corpus_from_documents(std::move(docs));
}

// -------- file formats --------

// Corpus file: one document per line; labels file aligned by line number.
inline std::vector<RawDocument> load_corpus_file(const std::string& corpus_path,
                                                 const std::optional<std::string>& labels_path = {}) {
  std::vector<std::string> lines = read_lines(corpus_path);
  std::vector<std::string> labels;
  if (labels_path) {
    labels = read_lines(*labels_path);
    if (labels.size() != lines.size())
      throw Error::format("labels file has " + std::to_string(labels.size()) +
                          " lines but corpus has " + std::to_string(lines.size()));
  }
  std::vector<RawDocument> docs;
  docs.reserve(lines.size());
  for (size_t i = 0; i < lines.size(); ++i) {
    RawDocument d;
    d.text = lines[i];
    if (labels_path) {
      std::string label = trim(labels[i]);
      if (!label.empty()) d.label = std::move(label);  // blank line = unlabeled
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

inline TopicSet parse_topic_set(const std::vector<std::string>& lines, const std::string& origin) {
  TopicSet set;
  set.provenance = origin;
  PreprocessConfig split_cfg;  // reuse the whitespace splitter, nothing else
  split_cfg.lowercase = false;
  split_cfg.min_token_len = 1;
  int line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> words = tokenize(line, split_cfg);
    if (set.words_per_topic == 0) set.words_per_topic = static_cast<int>(words.size());
    if (static_cast<int>(words.size()) != set.words_per_topic)
      throw Error::format(origin + ": line " + std::to_string(line_no) + " has " +
                          std::to_string(words.size()) + " words, expected " +
                          std::to_string(set.words_per_topic));
    std::unordered_set<std::string> seen;
    for (const auto& w : words) {
      if (!seen.insert(w).second)
        throw Error::format(origin + ": line " + std::to_string(line_no) +
                            " repeats word '" + w + "'");
    }
    set.topics.push_back(std::move(words));
  }
  if (set.topics.empty()) throw Error::format(origin + ": no topics found");
  return set;
}

inline TopicSet load_topic_set(const std::string& path) {
  return parse_topic_set(read_lines(path), path);
}

inline std::string topic_set_to_string(const TopicSet& set) {
  std::string out;
  for (const auto& t : set.topics) {
    out += join(t, " ");
    out += '\n';
  }
  return out;
}

inline void save_topic_set(const TopicSet& set, const std::string& path) {
  atomic_write_file(path, topic_set_to_string(set));
}

// Vocabulary dump: one word per line in index order. Document frequencies
// are not part of the format; a loaded vocabulary carries none.
inline void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::string out;
  for (const auto& w : vocab.words) {
    out += w;
    out += '\n';
  }
  atomic_write_file(path, out);
}

inline Vocabulary load_vocabulary(const std::string& path) {
  Vocabulary vocab;
  int line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    std::string w = trim(line);
    if (w.empty()) continue;
    if (vocab.contains(w))
      throw Error::format(path + ": line " + std::to_string(line_no) +
                          " repeats word '" + w + "'");
    vocab.add(w);
  }
  if (vocab.words.empty()) throw Error::format(path + ": empty vocabulary");
  return vocab;
}

}  // namespace topicrefine
