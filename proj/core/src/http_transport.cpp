#include <fmt/format.h>
#include <httplib.h>

#include "csb/transport.hpp"

namespace csb {

HttpStatusError::HttpStatusError(int status, const std::string& message)
    : Error(message), status_(status) {}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string target;  // /path?query
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(fmt::format("URL '{}' has no scheme", url));
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

  HttpResponse send(const HttpRequest& request) override {
    const auto [origin, target] = split_url(request.url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    client.set_follow_location(true);

    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);

    httplib::Result res;
    if (request.method == "GET") {
      res = client.Get(target, headers);
    } else if (!request.form.empty()) {
      httplib::MultipartFormDataItems items;
      for (const auto& f : request.form) items.push_back({f.name, f.value, f.filename, f.content_type});
      res = client.Post(target, headers, items);
    } else {
      res = client.Post(target, headers, request.body,
                        request.content_type.empty() ? "application/json" : request.content_type);
    }

    if (!res) throw TransportError(fmt::format("{} {}: {}", request.method, request.url, httplib::to_string(res.error())));
    if (res->status == 429 || res->status >= 500)
      throw TransportError(fmt::format("{} {}: HTTP {}", request.method, request.url, res->status));
    if (res->status < 200 || res->status >= 300)
      throw HttpStatusError(res->status, fmt::format("{} {}: HTTP {}: {}", request.method, request.url,
                                                     res->status, res->body.substr(0, 500)));
    return {res->status, res->body};
  }

 private:
  std::chrono::seconds timeout_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(std::chrono::seconds timeout) {
  return std::make_shared<HttpTransport>(timeout);
}

}  // namespace csb
