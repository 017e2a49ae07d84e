#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "topicrefine/corpus.hpp"
#include "topicrefine/embeddings.hpp"
#include "topicrefine/error.hpp"
#include "topicrefine/prompt.hpp"
#include "topicrefine/util.hpp"

namespace topicrefine {

inline constexpr const char* kEnvApiUrl = "TOPICREFINE_API_URL";
inline constexpr const char* kEnvApiKey = "TOPICREFINE_API_KEY";
inline constexpr const char* kEnvCacheDir = "TOPICREFINE_CACHE_DIR";

enum class LlmBackendKind { remote, mock };

struct LlmConfig {
  LlmBackendKind backend = LlmBackendKind::mock;
  std::string model_id = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_retries = 3;
  std::chrono::milliseconds timeout{30000};
  std::optional<std::string> cache_dir;
  int max_in_flight = 4;  // bound on concurrent remote requests
  std::chrono::milliseconds retry_backoff{250};
  bool request_json_mode = true;
  std::optional<std::string> api_url;  // overrides TOPICREFINE_API_URL
  std::optional<std::string> api_key;  // overrides TOPICREFINE_API_KEY

  // test seam; real sleeps by default
  std::function<void(std::chrono::milliseconds)> sleep_fn;
};

struct CompletionResult {
  std::string text;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  bool cached = false;
};

// Character-count proxy used whenever a backend reports no usage numbers.
inline long estimate_tokens(std::string_view text) {
  return static_cast<long>((text.size() + 3) / 4);
}

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual CompletionResult complete(const std::string& prompt) = 0;
};

// ---------------------------------------------------------------------------
// Remote chat-completions backend
// ---------------------------------------------------------------------------

class RemoteBackend final : public CompletionBackend {
 public:
  explicit RemoteBackend(const LlmConfig& cfg) : cfg_(cfg), in_flight_(0) {}

  CompletionResult complete(const std::string& prompt) override {
    const std::string url = resolve(cfg_.api_url, kEnvApiUrl);
    if (url.empty()) throw Error::config(std::string("missing ") + kEnvApiUrl);
    const std::string key = resolve(cfg_.api_key, kEnvApiKey);
    if (key.empty())
      throw Error::config(std::string("missing credentials: set ") + kEnvApiKey);

    auto [base, path] = split_url(url);

    nlohmann::json body{
        {"model", cfg_.model_id},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", cfg_.temperature},
    };
    if (cfg_.request_json_mode) body["response_format"] = {{"type", "json_object"}};

    InFlightSlot slot(*this);

    httplib::Client cli(base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    cli.set_connection_timeout(std::max<long>(1, secs.count()), 0);
    cli.set_read_timeout(std::max<long>(1, secs.count()), 0);
    httplib::Headers headers{{"Authorization", "Bearer " + key}};

    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res)
      throw TransientBackendError("transport failure: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
      throw TransientBackendError("HTTP " + std::to_string(res->status) + " from backend");
    if (res->status < 200 || res->status >= 300)
      throw Error::backend("request rejected (HTTP " + std::to_string(res->status) +
                           "): " + res->body.substr(0, 200));

    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded())
      throw TransientBackendError("backend returned unparseable JSON");
    CompletionResult out;
    try {
      out.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw Error::backend("malformed backend response: no choices[0].message.content");
    }
    if (reply.contains("usage") && reply["usage"].is_object()) {
      out.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
      out.completion_tokens = reply["usage"].value("completion_tokens", 0L);
    }
    if (out.prompt_tokens == 0) out.prompt_tokens = estimate_tokens(prompt);
    if (out.completion_tokens == 0) out.completion_tokens = estimate_tokens(out.text);
    return out;
  }

  static std::pair<std::string, std::string> split_url(const std::string& url) {
    size_t scheme = url.find("://");
    if (scheme == std::string::npos) throw Error::config("endpoint URL needs a scheme: " + url);
    size_t slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
  }

 private:
  static std::string resolve(const std::optional<std::string>& explicit_value,
                             const char* env_name) {
    if (explicit_value && !explicit_value->empty()) return *explicit_value;
    const char* env = std::getenv(env_name);
    return env ? env : "";
  }

  // Simple bounded slot counter; avoids a semaphore's compile-time max.
  struct InFlightSlot {
    explicit InFlightSlot(RemoteBackend& b) : backend(b) {
      std::unique_lock<std::mutex> lock(backend.mu_);
      backend.cv_.wait(lock, [&] { return backend.in_flight_ < backend.cfg_.max_in_flight; });
      ++backend.in_flight_;
    }
    ~InFlightSlot() {
      {
        std::lock_guard<std::mutex> lock(backend.mu_);
        --backend.in_flight_;
      }
      backend.cv_.notify_one();
    }
    RemoteBackend& backend;
  };

  LlmConfig cfg_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_;
};

// ---------------------------------------------------------------------------
// Deterministic offline oracle
// ---------------------------------------------------------------------------

// Judges the held-out word by its mean cosine to the context words and, when
// it fails the threshold, proposes the pool words most similar on average to
// the context. Pure function of (prompt, config); no randomness.
struct MockOracleConfig {
  const EmbeddingStore* store = nullptr;
  double coherence_threshold = 0.5;
  const Vocabulary* candidate_pool = nullptr;
};

class MockOracleBackend final : public CompletionBackend {
 public:
  explicit MockOracleBackend(const MockOracleConfig& cfg) : cfg_(cfg) {
    if (!cfg_.store || !cfg_.candidate_pool)
      throw Error::config("mock backend needs an embedding store and a candidate pool");
  }

  CompletionResult complete(const std::string& prompt) override {
    auto [context, held] = parse_prompt(prompt);

    std::string label = *std::min_element(context.begin(), context.end());

    bool coherent = true;
    if (const auto* held_vec = cfg_.store->find(held)) {
      double sum = 0.0;
      int n = 0;
      for (const auto& w : context) {
        if (const auto* v = cfg_.store->find(w)) {
          sum += cosine_similarity(*held_vec, *v);
          ++n;
        }
      }
      // context entirely out of the store keeps the word, same as a missing
      // held-out vector
      if (n > 0) coherent = (sum / n) >= cfg_.coherence_threshold;
    }

    nlohmann::json reply{{"topic", label},
                         {"coherent", coherent ? "Yes" : "No"},
                         {"alternatives", nlohmann::json::array()}};
    if (!coherent) {
      for (const auto& w : top_pool_words(context, held)) reply["alternatives"].push_back(w);
    }

    CompletionResult out;
    out.text = reply.dump();
    out.prompt_tokens = estimate_tokens(prompt);
    out.completion_tokens = estimate_tokens(out.text);
    return out;
  }

 private:
  // Top-10 pool words by mean cosine to the context, excluding the context
  // words and the held-out word; ties resolve to the lower vocabulary index.
  std::vector<std::string> top_pool_words(const std::vector<std::string>& context,
                                          const std::string& held) const {
    std::unordered_set<std::string> excluded(context.begin(), context.end());
    excluded.insert(held);

    std::vector<const std::vector<double>*> ctx_vecs;
    for (const auto& w : context)
      if (const auto* v = cfg_.store->find(w)) ctx_vecs.push_back(v);

    struct Scored {
      double score;
      int index;
      const std::string* word;
    };
    std::vector<Scored> scored;
    const auto& pool = cfg_.candidate_pool->words;
    for (size_t i = 0; i < pool.size(); ++i) {
      const std::string& w = pool[i];
      if (excluded.count(w)) continue;
      const auto* v = cfg_.store->find(w);
      if (!v) continue;
      double sum = 0.0;
      for (const auto* c : ctx_vecs) sum += cosine_similarity(*v, *c);
      double mean = ctx_vecs.empty() ? 0.0 : sum / static_cast<double>(ctx_vecs.size());
      scored.push_back({mean, static_cast<int>(i), &w});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.index < b.index;
    });
    std::vector<std::string> out;
    for (size_t i = 0; i < scored.size() && i < 10; ++i) out.push_back(*scored[i].word);
    return out;
  }

  MockOracleConfig cfg_;
};

// ---------------------------------------------------------------------------
// Client: cache + retry around a backend
// ---------------------------------------------------------------------------

class LlmClient {
 public:
  LlmClient(LlmConfig cfg, std::unique_ptr<CompletionBackend> backend)
      : cfg_(std::move(cfg)), backend_(std::move(backend)) {}

  static LlmClient make(const LlmConfig& cfg, const MockOracleConfig* mock = nullptr) {
    if (cfg.backend == LlmBackendKind::mock) {
      if (!mock) throw Error::config("mock backend selected but no oracle configured");
      return LlmClient(cfg, std::make_unique<MockOracleBackend>(*mock));
    }
    return LlmClient(cfg, std::make_unique<RemoteBackend>(cfg));
  }

  CompletionResult complete(const std::string& prompt) {
    if (prompt.empty()) throw Error::data("empty prompt");

    std::optional<std::string> cache_path;
    if (cfg_.cache_dir && !cfg_.cache_dir->empty()) {
      cache_path = cache_file_path(prompt);
      if (auto hit = read_cache(*cache_path)) {
        ++cache_hits_;
        return *hit;
      }
    }

    CompletionResult result = complete_with_retries(prompt);
    if (cache_path) write_cache(*cache_path, result);
    return result;
  }

  long backend_calls() const { return backend_calls_.load(); }
  long cache_hits() const { return cache_hits_.load(); }
  long retries() const { return retries_.load(); }

  const LlmConfig& config() const { return cfg_; }

  // Cache key: (model id, temperature, prompt). Layout <dir>/<hh>/<hash>.json.
  std::string cache_file_path(const std::string& prompt) const {
    char temp[64];
    std::snprintf(temp, sizeof(temp), "%.17g", cfg_.temperature);
    std::string key_material = cfg_.model_id;
    key_material += '\x1f';
    key_material += temp;
    key_material += '\x1f';
    key_material += prompt;
    std::string hash = sha256_hex(key_material);
    return (std::filesystem::path(*cfg_.cache_dir) / hash.substr(0, 2) / (hash + ".json"))
        .string();
  }

 private:
  CompletionResult complete_with_retries(const std::string& prompt) {
    ++backend_calls_;  // one logical completion call; retries tracked apart
    for (int attempt = 0;; ++attempt) {
      try {
        return backend_->complete(prompt);
      } catch (const TransientBackendError& e) {
        if (attempt >= cfg_.max_retries)
          throw Error::backend(std::string("backend unavailable after ") +
                               std::to_string(attempt + 1) + " attempts: " + e.what());
        ++retries_;
        auto delay = cfg_.retry_backoff * (attempt + 1);  // monotone nondecreasing
        if (cfg_.sleep_fn) cfg_.sleep_fn(delay);
        else std::this_thread::sleep_for(delay);
      }
    }
  }

  std::optional<CompletionResult> read_cache(const std::string& path) const {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) return std::nullopt;  // corrupt entry: treat as miss
    CompletionResult r;
    r.text = j.value("text", "");
    r.prompt_tokens = j.value("prompt_tokens", 0L);
    r.completion_tokens = j.value("completion_tokens", 0L);
    r.cached = true;
    return r;
  }

  void write_cache(const std::string& path, const CompletionResult& r) const {
    nlohmann::json j{{"text", r.text},
                     {"prompt_tokens", r.prompt_tokens},
                     {"completion_tokens", r.completion_tokens}};
    atomic_write_file(path, j.dump());
  }

  LlmConfig cfg_;
  std::unique_ptr<CompletionBackend> backend_;
  std::atomic<long> backend_calls_{0};
  std::atomic<long> cache_hits_{0};
  std::atomic<long> retries_{0};
};

}  // namespace topicrefine
