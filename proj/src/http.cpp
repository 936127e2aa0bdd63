#include "pathbench/gateway.hpp"

#ifdef PATHBENCH_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <charconv>

namespace pathbench {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

ParsedUrl parse_url(const std::string& url) {
  ParsedUrl out;
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path = url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace

HttpResponse http_post_json(const std::string& base_url, const std::string& path, const std::string& body,
                            const std::string& bearer_token, std::chrono::milliseconds timeout) {
  const auto url = parse_url(base_url);
  HttpResponse out;
  httplib::Client client(url.origin);
  if (!client.is_valid()) {
    out.error = "invalid base_url " + base_url;
    return out;
  }
  const auto secs = static_cast<time_t>(timeout.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
  auto res = client.Post(url.path + path, headers, body, "application/json");
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  if (res->has_header("Retry-After")) {
    const auto v = res->get_header_value("Retry-After");
    double secs_after = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), secs_after);
    if (ec == std::errc{}) out.retry_after_seconds = secs_after;
  }
  return out;
}

}  // namespace pathbench
