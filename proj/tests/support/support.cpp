#include "support.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace pbtest {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::random_device rd;
  for (;;) {
    path_ = fs::temp_directory_path() / ("pathbench-test-" + std::to_string(rd()));
    if (fs::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

struct StubServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

StubServer::StubServer(Handler handler) : impl_(std::make_unique<Impl>()) {
  impl_->server.new_task_queue = [] { return new httplib::ThreadPool(16); };
  impl_->server.Post(R"(/.*)", [this, handler](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    const int now = ++active_;
    int peak = max_concurrent_.load();
    while (now > peak && !max_concurrent_.compare_exchange_weak(peak, now)) {
    }
    const auto reply = handler({req.path, req.body, req.get_header_value("Authorization")});
    if (reply.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(reply.delay_ms));
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_content(reply.body, "application/json");
    --active_;
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string StubServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port) + "/v1"; }

std::string chat_body(const std::string& content) {
  nlohmann::json j;
  j["id"] = "stub";
  j["choices"] = nlohmann::json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}});
  j["usage"] = {{"prompt_tokens", 11}, {"completion_tokens", 7}};
  return j.dump();
}

int closed_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof addr;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), len);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

pathbench::PathologyRecord make_record(const std::string& id, std::size_t type_index, const std::string& report,
                                       std::optional<pathbench::Split> split) {
  pathbench::PathologyRecord r;
  r.sample_id = id;
  r.cancer_type = pathbench::CancerType::at(type_index);
  r.report_text = report;
  r.split = split;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pbtest
