#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <thread>
#include <string>
#include <utility>
#include <vector>

#include "csb/error.hpp"

namespace csb {

struct FormField {
  std::string name;
  std::string value;
  std::string filename;      // non-empty for file parts
  std::string content_type;  // defaults per part type when empty
};

struct HttpRequest {
  std::string method = "POST";
  std::string url;  // absolute: scheme://host[:port]/path[?query]
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::string content_type;
  std::vector<FormField> form;  // multipart/form-data when non-empty
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Retryable failure: connection errors, timeouts, 429 and 5xx.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Non-retryable HTTP failure (4xx other than 429).
class HttpStatusError : public Error {
 public:
  HttpStatusError(int status, const std::string& message);
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Returns 2xx responses; throws TransportError or HttpStatusError otherwise.
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

std::shared_ptr<Transport> make_http_transport(std::chrono::seconds timeout = std::chrono::seconds(120));

struct BackoffPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
};

// Calls `fn` until it returns without TransportError or attempts run out
// (the last TransportError is rethrown). Other exceptions propagate at once.
template <class Fn>
auto with_backoff(const BackoffPolicy& policy, Fn&& fn,
                  const std::function<void(std::chrono::milliseconds)>& sleep = {}) -> decltype(fn()) {
  auto delay = policy.initial_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const TransportError&) {
      if (attempt >= policy.attempts) throw;
    }
    if (sleep) {
      sleep(delay);
    } else if (delay.count() > 0) {
      std::this_thread::sleep_for(delay);
    }
    delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
  }
}

}  // namespace csb
