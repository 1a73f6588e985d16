#include "alm/http.hpp"

#include <httplib.h>

#include "alm/error.hpp"

namespace alm::http {

Url parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint must be an absolute URL: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ValidationError("unsupported URL scheme: " + scheme);
  const auto path_start = url.find('/', scheme_end + 3);
  Url out;
  out.scheme_host_port = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (out.scheme_host_port.size() <= scheme_end + 3) throw ValidationError("URL has no host: " + url);
  return out;
}

Response post_json(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers,
                   std::chrono::seconds timeout) {
  const Url u = parse_url(url);
  Response out;
  try {
    httplib::Client client(u.scheme_host_port);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(u.path, h, body, "application/json");
    if (!res) {
      out.transport_error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
  } catch (const std::exception& e) {
    out.transport_error = e.what();
  }
  return out;
}

}  // namespace alm::http
