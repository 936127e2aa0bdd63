#pragma once

#include "pathbench/labels.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pathbench {

enum class EndpointKind { RemoteChat, OracleTest };

struct SamplingParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;

  friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30'000};
  std::chrono::milliseconds timeout{120'000};
};

/// Zero means unlimited.
struct RateLimit {
  double requests_per_minute = 0.0;
  double tokens_per_minute = 0.0;
};

struct OracleErrorModel {
  double mislabel_prob = 0.0;
  double format_break_prob = 0.0;
  /// Probability of wrapping the answer in reasoning-style filler text.
  double verbose_prob = 0.0;
  std::uint64_t seed = 0;
  /// gold label -> wrong label used whenever that gold is mislabeled.
  std::map<std::string, std::string> swaps;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct ModelEndpoint {
  std::string name;
  EndpointKind kind = EndpointKind::OracleTest;
  std::string model;  // wire model id; empty means `name`
  std::optional<std::string> base_url;
  std::string auth_env;  // name of the environment variable holding the key
  SamplingParams params;
  RetryPolicy retry;
  RateLimit rate;
  OracleErrorModel oracle;

  void validate() const;
  /// Everything that changes backend output, minus credentials.
  nlohmann::ordered_json fingerprint() const;

  static ModelEndpoint from_json(const nlohmann::json& j);
  static ModelEndpoint oracle_endpoint(std::string name, OracleErrorModel model);
};

enum class Role { System, User };

struct Message {
  Role role;
  std::string content;
};

/// Ground truth the oracle backend answers from.
struct OracleHint {
  Task task = Task::TypeId;
  std::string sample_id;
  std::optional<Answer> gold;
  std::string source_text;  // report text, for summaries
  int summary_max_words = 200;
};

struct CompletionRequest {
  std::vector<Message> messages;
  SamplingParams params;
  int run_index = 0;
  std::optional<OracleHint> oracle;

  /// Exactly one system then one user message; 0 <= run_index < n_runs.
  void validate(int n_runs = 5) const;
  std::string prompt_hash() const;

  static CompletionRequest chat(std::string system, std::string user, SamplingParams params, int run_index);
};

struct Completion {
  std::string text;
  std::optional<std::int64_t> input_tokens;
  std::optional<std::int64_t> output_tokens;
  std::int64_t latency_ms = 0;
  bool from_cache = false;
  int attempts = 1;
};

/// Deterministic stand-in model. Every draw is a pure function of
/// (error_model.seed, sample_id, run_index).
Completion oracle_complete(const Answer& gold, Task task, const OracleErrorModel& error_model,
                           std::string_view sample_id, int run_index);
/// First max_words words of the source, used as the oracle's summary.
std::string oracle_summary(std::string_view source, int max_words);

/// Raw HTTP exchange; implemented over cpp-httplib.
struct HttpResponse {
  int status = 0;  // 0: no response (connection failure or timeout)
  std::string body;
  std::string error;
  std::optional<double> retry_after_seconds;
};

HttpResponse http_post_json(const std::string& base_url, const std::string& path, const std::string& body,
                            const std::string& bearer_token, std::chrono::milliseconds timeout);

bool is_retryable_status(int status);

class RateLimiter {
 public:
  explicit RateLimiter(RateLimit limit);
  /// Blocks until a request costing `tokens` fits in both budgets.
  void acquire(double tokens);

 private:
  RateLimit limit_;
  std::mutex mutex_;
  double request_budget_;
  double token_budget_;
  std::chrono::steady_clock::time_point last_;
};

/// Append-only JSON-lines audit log. Holds prompt hashes, never credentials.
class AuditLog {
 public:
  explicit AuditLog(const std::filesystem::path& path);
  void append(const nlohmann::ordered_json& entry);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

/// One JSON file per key under <dir>/<key[0:2]>/<key>.json, written by rename.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(const ModelEndpoint& endpoint, const CompletionRequest& request);
  std::filesystem::path path_for(const std::string& key) const;
  /// nullopt on miss; a corrupt entry is deleted and counted as an invalidation.
  std::optional<Completion> load(const std::string& key);
  void store(const std::string& key, const ModelEndpoint& endpoint, const CompletionRequest& request,
             const Completion& completion);
  std::size_t invalidations() const { return invalidations_.load(); }

 private:
  std::filesystem::path dir_;
  std::atomic<std::size_t> invalidations_{0};
};

class Gateway {
 public:
  struct Options {
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::filesystem::path> audit_log;
    std::size_t max_in_flight = 8;
  };

  explicit Gateway(Options options);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  Completion complete(const ModelEndpoint& endpoint, const CompletionRequest& request);
  /// Cache lookup first; on a miss delegates to complete() and stores.
  Completion cached_complete(const ModelEndpoint& endpoint, const CompletionRequest& request);

  std::size_t peak_in_flight() const { return peak_in_flight_.load(); }
  std::size_t cache_invalidations() const { return cache_ ? cache_->invalidations() : 0; }

 private:
  Completion complete_remote(const ModelEndpoint& endpoint, const CompletionRequest& request);
  RateLimiter& limiter_for(const ModelEndpoint& endpoint);
  void audit(const ModelEndpoint& endpoint, const CompletionRequest& request, const Completion* completion,
             std::string_view status, std::string_view detail);

  Options options_;
  std::unique_ptr<ResponseCache> cache_;
  std::unique_ptr<AuditLog> audit_;

  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;
  std::atomic<std::size_t> peak_in_flight_{0};

  std::mutex limiters_mutex_;
  std::map<std::string, std::unique_ptr<RateLimiter>> limiters_;
};

}  // namespace pathbench
