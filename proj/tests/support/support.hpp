#pragma once

#include "pathbench/corpus.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>

namespace pbtest {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

struct StubRequest {
  std::string path;
  std::string body;
  std::string authorization;
};

struct StubReply {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
  int delay_ms = 0;
};

/// Local chat-completions stand-in on 127.0.0.1 with a test-supplied handler.
class StubServer {
 public:
  using Handler = std::function<StubReply(const StubRequest&)>;
  explicit StubServer(Handler handler);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// http://127.0.0.1:<port>/v1
  std::string base_url() const;
  int requests() const { return requests_.load(); }
  int max_concurrent() const { return max_concurrent_.load(); }

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
  std::atomic<int> requests_{0};
  std::atomic<int> active_{0};
  std::atomic<int> max_concurrent_{0};
};

/// Chat-completion response body carrying `content`.
std::string chat_body(const std::string& content);

/// A port on 127.0.0.1 that refuses connections.
int closed_port();

pathbench::PathologyRecord make_record(const std::string& id, std::size_t type_index, const std::string& report,
                                       std::optional<pathbench::Split> split = pathbench::Split::Train);

std::string slurp(const std::filesystem::path& p);

}  // namespace pbtest
