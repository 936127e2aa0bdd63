#include "pathbench/gateway.hpp"

#include "pathbench/error.hpp"
#include "pathbench/rng.hpp"
#include "pathbench/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <limits>
#include <random>
#include <thread>

namespace pathbench {

using nlohmann::json;
using nlohmann::ordered_json;
using std::chrono::milliseconds;

// ---- endpoint -----------------------------------------------------------------

void OracleErrorModel::validate() const {
  for (double p : {mislabel_prob, format_break_prob, verbose_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::Config, "oracle probabilities must lie in [0, 1]");
  }
}

ordered_json OracleErrorModel::to_json() const {
  ordered_json j;
  j["mislabel_prob"] = mislabel_prob;
  j["format_break_prob"] = format_break_prob;
  j["verbose_prob"] = verbose_prob;
  j["seed"] = seed;
  j["swaps"] = swaps;
  return j;
}

void ModelEndpoint::validate() const {
  if (name.empty()) throw Error(ErrorKind::Config, "endpoint name must not be empty");
  if (kind == EndpointKind::RemoteChat && (!base_url || base_url->empty())) {
    throw Error(ErrorKind::Config, "remote endpoint '" + name + "' requires base_url");
  }
  if (retry.max_attempts < 1) throw Error(ErrorKind::Config, "retry.max_attempts must be >= 1");
  if (params.max_output_tokens < 1) throw Error(ErrorKind::Config, "max_output_tokens must be >= 1");
  oracle.validate();
}

ordered_json ModelEndpoint::fingerprint() const {
  ordered_json j;
  j["name"] = name;
  j["kind"] = kind == EndpointKind::RemoteChat ? "remote_chat" : "oracle";
  if (kind == EndpointKind::RemoteChat) {
    j["model"] = model.empty() ? name : model;
    j["base_url"] = base_url.value_or("");
  } else {
    j["oracle"] = oracle.to_json();
  }
  return j;
}

namespace {
milliseconds ms_field(const json& j, const char* key, milliseconds fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : milliseconds(it->get<std::int64_t>());
}
}  // namespace

ModelEndpoint ModelEndpoint::from_json(const json& j) {
  ModelEndpoint e;
  try {
    e.name = j.at("name").get<std::string>();
    const auto kind = text::to_lower(j.value("kind", std::string("remote_chat")));
    if (kind == "remote_chat" || kind == "remote") {
      e.kind = EndpointKind::RemoteChat;
    } else if (kind == "oracle" || kind == "oracle_test") {
      e.kind = EndpointKind::OracleTest;
    } else {
      throw Error(ErrorKind::Config, "unknown endpoint kind '" + kind + "'");
    }
    e.model = j.value("model", std::string());
    if (auto it = j.find("base_url"); it != j.end() && !it->is_null()) e.base_url = it->get<std::string>();
    e.auth_env = j.value("auth_env", std::string());
    e.params.temperature = j.value("temperature", 0.0);
    e.params.max_output_tokens = j.value("max_output_tokens", 1024);
    if (auto it = j.find("retry"); it != j.end()) {
      e.retry.max_attempts = it->value("max_attempts", e.retry.max_attempts);
      e.retry.base_delay = ms_field(*it, "base_delay_ms", e.retry.base_delay);
      e.retry.max_delay = ms_field(*it, "max_delay_ms", e.retry.max_delay);
      e.retry.timeout = ms_field(*it, "timeout_ms", e.retry.timeout);
    }
    e.rate.requests_per_minute = j.value("requests_per_minute", 0.0);
    e.rate.tokens_per_minute = j.value("tokens_per_minute", 0.0);
    if (auto it = j.find("oracle"); it != j.end()) {
      e.oracle.mislabel_prob = it->value("mislabel_prob", 0.0);
      e.oracle.format_break_prob = it->value("format_break_prob", 0.0);
      e.oracle.verbose_prob = it->value("verbose_prob", 0.0);
      e.oracle.seed = it->value("seed", std::uint64_t{0});
      if (auto s = it->find("swaps"); s != it->end()) e.oracle.swaps = s->get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::Config, std::string("endpoint config: ") + ex.what());
  }
  e.validate();
  return e;
}

ModelEndpoint ModelEndpoint::oracle_endpoint(std::string name, OracleErrorModel model) {
  ModelEndpoint e;
  e.name = std::move(name);
  e.kind = EndpointKind::OracleTest;
  e.oracle = std::move(model);
  e.validate();
  return e;
}

// ---- request ------------------------------------------------------------------

void CompletionRequest::validate(int n_runs) const {
  if (messages.size() != 2 || messages[0].role != Role::System || messages[1].role != Role::User) {
    throw Error(ErrorKind::Precondition, "completion request needs exactly one system and one user message");
  }
  if (run_index < 0 || run_index >= n_runs) {
    throw Error(ErrorKind::Precondition, "run_index " + std::to_string(run_index) + " outside [0, " +
                                             std::to_string(n_runs) + ")");
  }
}

std::string CompletionRequest::prompt_hash() const {
  ordered_json j = ordered_json::array();
  for (const auto& m : messages) j.push_back({m.role == Role::System ? "system" : "user", m.content});
  return text::sha256_hex(j.dump());
}

CompletionRequest CompletionRequest::chat(std::string system, std::string user, SamplingParams params,
                                          int run_index) {
  CompletionRequest r;
  r.messages = {{Role::System, std::move(system)}, {Role::User, std::move(user)}};
  r.params = params;
  r.run_index = run_index;
  return r;
}

// ---- oracle -------------------------------------------------------------------

namespace {

constexpr std::string_view kFillerLead =
    "Let me review the pathology report step by step.\n"
    "The specimen, histology and extent of disease were considered in turn.\n\n"
    "Final Answer:\n";

std::string bare_answer(Task task, const Answer& answer) {
  switch (task) {
    case Task::TypeId: return "The diagnosis is " + answer_label(answer) + ".";
    case Task::Staging: return "The answer is " + answer_label(answer) + ".";
    default: return "Survival: " + answer_label(answer);
  }
}

}  // namespace

Completion oracle_complete(const Answer& gold, Task task, const OracleErrorModel& em, std::string_view sample_id,
                           int run_index) {
  if (!answer_matches_task(gold, task)) {
    throw Error(ErrorKind::Precondition, "oracle gold does not belong to task " + std::string(task_name(task)));
  }
  const auto run = std::to_string(run_index);
  auto draw = [&](std::string_view purpose) { return SeededStream(em.seed, {purpose, sample_id, run}); };

  Answer answer = gold;
  if (auto r = draw("mislabel"); r.uniform() < em.mislabel_prob) {
    const auto gold_label = answer_label(gold);
    std::optional<Answer> swapped;
    if (auto it = em.swaps.find(gold_label); it != em.swaps.end()) swapped = parse_answer_label(task, it->second);
    if (swapped && answer_label(*swapped) != gold_label) {
      answer = *swapped;
    } else {
      std::vector<Answer> wrong;
      for (const auto& a : task_answers(task)) {
        if (answer_label(a) != gold_label) wrong.push_back(a);
      }
      answer = wrong[static_cast<std::size_t>(r.below(wrong.size()))];
    }
  }
  const bool broken = draw("format_break").uniform() < em.format_break_prob;
  const bool verbose = draw("verbose").uniform() < em.verbose_prob;

  Completion c;
  c.text = broken ? bare_answer(task, answer) : canonical_answer_json(task, answer);
  if (verbose) c.text = std::string(kFillerLead) + c.text;
  c.output_tokens = static_cast<std::int64_t>(text::split_words(c.text).size());
  return c;
}

std::string oracle_summary(std::string_view source, int max_words) {
  const auto words = text::split_words(source);
  std::string out;
  for (std::size_t i = 0; i < words.size() && i < static_cast<std::size_t>(std::max(max_words, 0)); ++i) {
    if (!out.empty()) out += ' ';
    out += words[i];
  }
  return out;
}

// ---- rate limiting ------------------------------------------------------------

RateLimiter::RateLimiter(RateLimit limit)
    : limit_(limit),
      request_budget_(std::max(1.0, limit.requests_per_minute / 6.0)),
      token_budget_(limit.tokens_per_minute / 6.0),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire(double tokens) {
  const bool limit_requests = limit_.requests_per_minute > 0;
  const bool limit_tokens = limit_.tokens_per_minute > 0;
  if (!limit_requests && !limit_tokens) return;
  const double request_cap = std::max(1.0, limit_.requests_per_minute / 6.0);
  const double token_cap = limit_.tokens_per_minute / 6.0;
  tokens = limit_tokens ? std::min(tokens, token_cap) : 0.0;

  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed_s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    request_budget_ = std::min(request_cap, request_budget_ + elapsed_s * limit_.requests_per_minute / 60.0);
    token_budget_ = std::min(token_cap, token_budget_ + elapsed_s * limit_.tokens_per_minute / 60.0);
    const bool req_ok = !limit_requests || request_budget_ >= 1.0;
    const bool tok_ok = !limit_tokens || token_budget_ >= tokens;
    if (req_ok && tok_ok) {
      if (limit_requests) request_budget_ -= 1.0;
      if (limit_tokens) token_budget_ -= tokens;
      return;
    }
    double wait_s = 0.0;
    if (!req_ok) wait_s = std::max(wait_s, (1.0 - request_budget_) * 60.0 / limit_.requests_per_minute);
    if (!tok_ok) wait_s = std::max(wait_s, (tokens - token_budget_) * 60.0 / limit_.tokens_per_minute);
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(std::max(wait_s, 0.001)));
    lock.lock();
  }
}

// ---- audit --------------------------------------------------------------------

AuditLog::AuditLog(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw Error(ErrorKind::Io, "cannot open audit log " + path.string());
}

void AuditLog::append(const ordered_json& entry) {
  const auto line = entry.dump() + "\n";
  std::lock_guard lock(mutex_);
  out_ << line;
  out_.flush();
}

// ---- cache --------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create cache directory " + dir_.string());
}

std::string ResponseCache::key(const ModelEndpoint& endpoint, const CompletionRequest& request) {
  ordered_json j;
  j["endpoint"] = endpoint.fingerprint();
  j["prompt_hash"] = request.prompt_hash();
  j["params"] = {{"temperature", request.params.temperature}, {"max_output_tokens", request.params.max_output_tokens}};
  j["run_index"] = request.run_index;
  return text::sha256_hex(j.dump());
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<Completion> ResponseCache::load(const std::string& key) {
  const auto path = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto j = json::parse(text::read_file(path));
    if (j.at("key").get<std::string>() != key) throw std::runtime_error("key mismatch");
    Completion c;
    c.text = j.at("text").get<std::string>();
    if (j.contains("input_tokens") && !j["input_tokens"].is_null()) c.input_tokens = j["input_tokens"].get<std::int64_t>();
    if (j.contains("output_tokens") && !j["output_tokens"].is_null()) c.output_tokens = j["output_tokens"].get<std::int64_t>();
    c.latency_ms = j.value("latency_ms", std::int64_t{0});
    c.from_cache = true;
    c.attempts = 0;
    return c;
  } catch (const std::exception& e) {
    ++invalidations_;
    std::cerr << "warning: invalidating corrupt cache entry " << path.string() << ": " << e.what() << "\n";
    std::filesystem::remove(path, ec);
    return std::nullopt;
  }
}

void ResponseCache::store(const std::string& key, const ModelEndpoint& endpoint, const CompletionRequest& request,
                          const Completion& completion) {
  ordered_json j;
  j["key"] = key;
  j["endpoint"] = endpoint.name;
  j["run_index"] = request.run_index;
  j["prompt_hash"] = request.prompt_hash();
  j["text"] = completion.text;
  j["input_tokens"] = completion.input_tokens ? json(*completion.input_tokens) : json(nullptr);
  j["output_tokens"] = completion.output_tokens ? json(*completion.output_tokens) : json(nullptr);
  j["latency_ms"] = completion.latency_ms;
  text::write_file_atomic(path_for(key), j.dump(2) + "\n");
}

// ---- gateway ------------------------------------------------------------------

Gateway::Gateway(Options options) : options_(std::move(options)) {
  if (options_.max_in_flight == 0) throw Error(ErrorKind::Config, "max_in_flight must be >= 1");
  if (options_.cache_dir) cache_ = std::make_unique<ResponseCache>(*options_.cache_dir);
  if (options_.audit_log) audit_ = std::make_unique<AuditLog>(*options_.audit_log);
}

Gateway::~Gateway() = default;

RateLimiter& Gateway::limiter_for(const ModelEndpoint& endpoint) {
  std::lock_guard lock(limiters_mutex_);
  auto& slot = limiters_[endpoint.name];
  if (!slot) slot = std::make_unique<RateLimiter>(endpoint.rate);
  return *slot;
}

namespace {
std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}
}  // namespace

void Gateway::audit(const ModelEndpoint& endpoint, const CompletionRequest& request, const Completion* completion,
                    std::string_view status, std::string_view detail) {
  if (!audit_) return;
  ordered_json j;
  j["ts"] = utc_timestamp();
  j["endpoint"] = endpoint.name;
  j["run_index"] = request.run_index;
  j["prompt_hash"] = request.prompt_hash();
  if (request.oracle) j["sample_id"] = request.oracle->sample_id;
  j["status"] = status;
  if (completion) {
    j["from_cache"] = completion->from_cache;
    j["attempts"] = completion->attempts;
    j["latency_ms"] = completion->latency_ms;
    j["output_sha256"] = text::sha256_hex(completion->text);
  }
  if (!detail.empty()) j["detail"] = detail;
  audit_->append(j);
}

Completion Gateway::complete(const ModelEndpoint& endpoint, const CompletionRequest& request) {
  request.validate(std::numeric_limits<int>::max());
  {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
    ++in_flight_;
    auto peak = peak_in_flight_.load();
    while (in_flight_ > peak && !peak_in_flight_.compare_exchange_weak(peak, in_flight_)) {
    }
  }
  struct SlotRelease {
    Gateway* g;
    ~SlotRelease() {
      {
        std::lock_guard lock(g->slots_mutex_);
        --g->in_flight_;
      }
      g->slots_cv_.notify_one();
    }
  } release{this};

  const auto start = std::chrono::steady_clock::now();
  try {
    Completion c;
    if (endpoint.kind == EndpointKind::OracleTest) {
      if (!request.oracle) throw Error(ErrorKind::Precondition, "oracle endpoint needs an oracle hint");
      const auto& hint = *request.oracle;
      if (hint.task == Task::Summarize) {
        c.text = oracle_summary(hint.source_text, hint.summary_max_words);
      } else {
        if (!hint.gold) throw Error(ErrorKind::Precondition, "oracle hint lacks a gold answer");
        c = oracle_complete(*hint.gold, hint.task, endpoint.oracle, hint.sample_id, request.run_index);
      }
    } else {
      c = complete_remote(endpoint, request);
    }
    c.latency_ms = std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - start).count();
    audit(endpoint, request, &c, "ok", "");
    return c;
  } catch (const Error& e) {
    audit(endpoint, request, nullptr, to_string(e.kind()), e.what());
    throw;
  }
}

Completion Gateway::cached_complete(const ModelEndpoint& endpoint, const CompletionRequest& request) {
  if (!cache_) return complete(endpoint, request);
  const auto key = ResponseCache::key(endpoint, request);
  if (auto hit = cache_->load(key)) {
    audit(endpoint, request, &*hit, "ok", "cache");
    return *hit;
  }
  auto c = complete(endpoint, request);
  cache_->store(key, endpoint, request, c);
  return c;
}

bool is_retryable_status(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

namespace {

std::string backend_message(const std::string& body) {
  try {
    const auto j = json::parse(body);
    if (j.contains("error")) {
      const auto& e = j["error"];
      if (e.is_object() && e.contains("message")) return e["message"].get<std::string>();
      if (e.is_string()) return e.get<std::string>();
    }
  } catch (const std::exception&) {
  }
  return body.substr(0, 500);
}

}  // namespace

Completion Gateway::complete_remote(const ModelEndpoint& endpoint, const CompletionRequest& request) {
  endpoint.validate();
  std::string token;
  if (!endpoint.auth_env.empty()) {
    const char* value = std::getenv(endpoint.auth_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw Error(ErrorKind::Config, "environment variable " + endpoint.auth_env + " is not set");
    }
    token = value;
  }

  ordered_json body;
  body["model"] = endpoint.model.empty() ? endpoint.name : endpoint.model;
  body["messages"] = ordered_json::array();
  std::size_t chars = 0;
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", m.role == Role::System ? "system" : "user"}, {"content", m.content}});
    chars += m.content.size();
  }
  body["temperature"] = request.params.temperature;
  body["max_tokens"] = request.params.max_output_tokens;
  const auto payload = body.dump();

  limiter_for(endpoint).acquire(static_cast<double>(chars) / 4.0 + request.params.max_output_tokens);

  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  std::string last_error;
  for (int attempt = 1; attempt <= endpoint.retry.max_attempts; ++attempt) {
    const auto resp = http_post_json(*endpoint.base_url, "/chat/completions", payload, token, endpoint.retry.timeout);
    if (resp.status == 200) {
      try {
        const auto j = json::parse(resp.body);
        Completion c;
        c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
          if (u->contains("prompt_tokens")) c.input_tokens = (*u)["prompt_tokens"].get<std::int64_t>();
          if (u->contains("completion_tokens")) c.output_tokens = (*u)["completion_tokens"].get<std::int64_t>();
        }
        c.attempts = attempt;
        return c;
      } catch (const json::exception& e) {
        throw Error(ErrorKind::Protocol, "malformed chat-completion response: " + std::string(e.what()));
      }
    }
    if (!is_retryable_status(resp.status)) {
      throw Error(ErrorKind::Protocol, "backend " + endpoint.name + " returned HTTP " + std::to_string(resp.status) +
                                           ": " + backend_message(resp.body));
    }
    last_error = resp.status == 0 ? resp.error : "HTTP " + std::to_string(resp.status) + ": " + backend_message(resp.body);
    if (attempt == endpoint.retry.max_attempts) break;

    const double exp_ms = static_cast<double>(endpoint.retry.base_delay.count()) * std::ldexp(1.0, attempt - 1);
    double delay_ms = std::min(exp_ms, static_cast<double>(endpoint.retry.max_delay.count()));
    delay_ms *= 0.5 + 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(jitter_rng);
    if (resp.retry_after_seconds) {
      delay_ms = std::max(delay_ms, std::min(*resp.retry_after_seconds * 1000.0,
                                             static_cast<double>(endpoint.retry.max_delay.count())));
    }
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
  }
  throw Error(ErrorKind::Transport, "backend " + endpoint.name + " failed after " +
                                        std::to_string(endpoint.retry.max_attempts) + " attempts: " + last_error);
}

}  // namespace pathbench
