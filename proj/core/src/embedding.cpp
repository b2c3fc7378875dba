#include "csb/embedding.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstring>
#include <map>

#include "csb/error.hpp"
#include "csb/hash.hpp"
#include "csb/utf8.hpp"

extern char** environ;

namespace csb {
namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < text.size() && !(text[j] == ' ' || text[j] == '\t' || text[j] == '\n' || text[j] == '\r')) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

class FdChannel final : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, std::chrono::milliseconds timeout, bool socket, pid_t child = -1)
      : read_fd_(read_fd), write_fd_(write_fd), timeout_(timeout), socket_(socket), child_(child) {}

  ~FdChannel() override {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (child_ > 0) {
      int status = 0;
      ::waitpid(child_, &status, 0);
    }
  }

  void write_line(std::string_view line) override {
    std::string data(line);
    data += '\n';
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = socket_ ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                                : ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(fmt::format("embedding sidecar write failed: {}", std::strerror(errno)));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> read_line() override {
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      if (eof_) {
        if (buffer_.empty()) return std::nullopt;
        std::string line = std::move(buffer_);
        buffer_.clear();
        return line;
      }
      pollfd p{read_fd_, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(timeout_.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw IoError(fmt::format("embedding sidecar poll failed: {}", std::strerror(errno)));
      }
      if (rc == 0) throw IoError(fmt::format("embedding sidecar timed out after {} ms", timeout_.count()));
      char chunk[65536];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(fmt::format("embedding sidecar read failed: {}", std::strerror(errno)));
      }
      if (n == 0) {
        eof_ = true;
      } else {
        buffer_.append(chunk, static_cast<std::size_t>(n));
      }
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  std::chrono::milliseconds timeout_;
  bool socket_;
  pid_t child_;
  std::string buffer_;
  bool eof_ = false;
};

std::string layer_string(const json& v) {
  if (v.is_null()) return {};
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

SyntheticEmbeddingBackend::SyntheticEmbeddingBackend(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw Error("synthetic embedding dimension must be positive");
}

std::vector<double> SyntheticEmbeddingBackend::token_vector(std::string_view token) const {
  std::u32string padded = U"^";
  padded += utf8::decode(token);
  padded += U"$";
  std::vector<double> v(dim_, 0.0);
  const std::size_t n = padded.size() < 3 ? 1 : padded.size() - 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string gram = utf8::encode(padded.substr(i, 3));
    std::uint64_t state = fnv1a64(gram);
    for (std::size_t d = 0; d < dim_; ++d) {
      // Uniform in [-1, 1).
      v[d] += static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
    }
  }
  // One whole-token direction keeps distinct tokens apart even when their trigram sets coincide.
  std::uint64_t state = fnv1a64(token) ^ 0x5bd1e995ULL;
  for (std::size_t d = 0; d < dim_; ++d) v[d] += static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
  return v;
}

std::vector<TokenEmbeddings> SyntheticEmbeddingBackend::embed_tokens(std::span<const std::string> texts) {
  std::vector<TokenEmbeddings> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    auto tokens = whitespace_tokens(text);
    if (tokens.empty()) throw Error("cannot embed an empty text");
    std::vector<std::vector<double>> vectors;
    vectors.reserve(tokens.size());
    for (const auto& t : tokens) vectors.push_back(token_vector(t));
    out.emplace_back(std::move(tokens), vectors);
  }
  return out;
}

EmbeddingMetadata SyntheticEmbeddingBackend::metadata() const {
  return {fmt::format("synthetic-trigram-{}", dim_), "none"};
}

SidecarEmbeddingBackend::SidecarEmbeddingBackend(std::unique_ptr<LineChannel> channel, SidecarOptions options)
    : channel_(std::move(channel)), options_(options) {
  if (!channel_) throw Error("embedding sidecar channel is null");
  if (options_.batch_size == 0) throw ValidationError("batch_size", "must be positive");
}

std::vector<TokenEmbeddings> SidecarEmbeddingBackend::embed_tokens(std::span<const std::string> texts) {
  std::vector<std::optional<TokenEmbeddings>> slots(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += options_.batch_size) {
    const std::size_t end = std::min(texts.size(), begin + options_.batch_size);
    std::map<std::string, std::size_t> pending;
    for (std::size_t i = begin; i < end; ++i) {
      if (texts[i].empty()) throw Error("cannot embed an empty text");
      const std::string id = std::to_string(next_id_++);
      pending.emplace(id, i);
      channel_->write_line(json{{"id", id}, {"mode", "tokens"}, {"text", texts[i]}}.dump());
    }
    while (!pending.empty()) {
      const auto line = channel_->read_line();
      if (!line) throw IoError(fmt::format("embedding sidecar closed with {} requests unanswered", pending.size()));
      if (line->empty()) continue;
      json resp;
      try {
        resp = json::parse(*line);
      } catch (const json::exception& e) {
        throw Error(fmt::format("embedding sidecar sent malformed JSON: {}", e.what()));
      }
      if (!resp.is_object() || !resp.contains("id")) throw Error("embedding sidecar response has no id");
      const std::string id = resp["id"].is_string() ? resp["id"].get<std::string>() : resp["id"].dump();
      const auto it = pending.find(id);
      if (it == pending.end()) throw Error(fmt::format("embedding sidecar answered unknown or repeated id '{}'", id));
      if (resp.contains("error"))
        throw Error(fmt::format("embedding sidecar failed request '{}': {}", id,
                                resp["error"].is_string() ? resp["error"].get<std::string>() : resp["error"].dump()));
      try {
        auto tokens = resp.at("tokens").get<std::vector<std::string>>();
        auto vectors = resp.at("vectors").get<std::vector<std::vector<double>>>();
        for (std::size_t v = 0; v < vectors.size(); ++v) {
          double norm2 = 0.0;
          for (double x : vectors[v]) norm2 += x * x;
          if (std::abs(std::sqrt(norm2) - 1.0) > options_.unit_norm_tolerance)
            throw Error(fmt::format("vector {} is not unit-norm (norm {})", v, std::sqrt(norm2)));
        }
        slots[it->second].emplace(std::move(tokens), vectors);
        if (!metadata_) {
          metadata_ = EmbeddingMetadata{resp.value("model", std::string{}),
                                        layer_string(resp.contains("layer") ? resp["layer"] : json())};
        }
      } catch (const json::exception& e) {
        throw Error(fmt::format("embedding sidecar response '{}' is malformed: {}", id, e.what()));
      } catch (const Error& e) {
        throw Error(fmt::format("embedding sidecar response '{}': {}", id, e.what()));
      }
      pending.erase(it);
    }
  }
  std::vector<TokenEmbeddings> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

EmbeddingMetadata SidecarEmbeddingBackend::metadata() const {
  return metadata_.value_or(EmbeddingMetadata{"unknown", "unknown"});
}

std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == endpoint.size())
    throw ValidationError("embed-endpoint", fmt::format("expected host:port, got '{}'", endpoint));
  unsigned port = 0;
  const auto digits = endpoint.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || port == 0 || port > 65535)
    throw ValidationError("embed-endpoint", fmt::format("invalid port in '{}'", endpoint));
  return {std::string(endpoint.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, std::uint16_t port,
                                                 std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw IoError(fmt::format("cannot resolve embedding sidecar {}:{}: {}", host, port, ::gai_strerror(rc)));
  int fd = -1;
  int last_errno = 0;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_errno = errno;
      continue;
    }
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    last_errno = errno;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0)
    throw IoError(fmt::format("cannot connect to embedding sidecar at {}:{}: {}", host, port, std::strerror(last_errno)));
  return std::make_unique<FdChannel>(fd, fd, timeout, true);
}

std::unique_ptr<LineChannel> spawn_stdio_channel(const std::vector<std::string>& argv,
                                                 std::chrono::milliseconds timeout) {
  if (argv.empty()) throw ValidationError("embed-command", "command is empty");
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw IoError("pipe failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw IoError("pipe failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw IoError(fmt::format("cannot start embedding sidecar '{}': {}", argv[0], std::strerror(rc)));
  }
  // A dead child must surface as a write error, not a signal.
  std::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<FdChannel>(from_child[0], to_child[1], timeout, false, pid);
}

}  // namespace csb
