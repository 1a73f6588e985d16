#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace alm::http {

struct Url {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string path;              // e.g. "/v1/chat/completions"
};

/// Splits an absolute http(s) URL. Throws ValidationError on anything else.
Url parse_url(const std::string& url);

struct Response {
  int status = 0;  // 0 when the transport failed
  std::string body;
  std::string transport_error;
};

/// Blocking JSON POST. Never throws on network failure; inspect `status`.
Response post_json(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers,
                   std::chrono::seconds timeout);

}  // namespace alm::http
