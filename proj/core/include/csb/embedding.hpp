#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csb/metrics.hpp"

namespace csb {

struct EmbeddingMetadata {
  std::string model;
  std::string layer;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  // One TokenEmbeddings per input text, in input order. Texts are non-empty.
  virtual std::vector<TokenEmbeddings> embed_tokens(std::span<const std::string> texts) = 0;
  virtual EmbeddingMetadata metadata() const = 0;
};

// Deterministic offline backend for tests and fixture runs. Tokens are split
// on whitespace; each vector is a sum of hashed character-trigram directions,
// so identical tokens get identical vectors and similar spellings are close.
class SyntheticEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit SyntheticEmbeddingBackend(std::size_t dim = 64);
  std::vector<TokenEmbeddings> embed_tokens(std::span<const std::string> texts) override;
  EmbeddingMetadata metadata() const override;

  std::vector<double> token_vector(std::string_view token) const;

 private:
  std::size_t dim_;
};

// Newline-delimited byte stream to the sidecar.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(std::string_view line) = 0;
  // nullopt on end of stream. Throws csb::IoError on timeout or read failure.
  virtual std::optional<std::string> read_line() = 0;
};

std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, std::uint16_t port,
                                                 std::chrono::milliseconds timeout);
// Spawns `argv` and talks to it over its stdin/stdout.
std::unique_ptr<LineChannel> spawn_stdio_channel(const std::vector<std::string>& argv,
                                                 std::chrono::milliseconds timeout);

struct SidecarOptions {
  std::size_t batch_size = 32;
  double unit_norm_tolerance = 1e-6;
};

// Client for the embedding sidecar.
//   request:  {"id": "...", "mode": "tokens", "text": "..."}
//   response: {"id": "...", "tokens": [...], "vectors": [[...]], "model": "...", "layer": ...}
//          or {"id": "...", "error": "..."}
// Up to `batch_size` requests are written before responses are read back;
// responses may arrive in any order and are matched by id.
class SidecarEmbeddingBackend final : public EmbeddingBackend {
 public:
  SidecarEmbeddingBackend(std::unique_ptr<LineChannel> channel, SidecarOptions options = {});

  std::vector<TokenEmbeddings> embed_tokens(std::span<const std::string> texts) override;
  EmbeddingMetadata metadata() const override;

  std::size_t requests_sent() const noexcept { return next_id_; }

 private:
  std::unique_ptr<LineChannel> channel_;
  SidecarOptions options_;
  std::size_t next_id_ = 0;
  std::optional<EmbeddingMetadata> metadata_;
};

// Parses "host:port".
std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view endpoint);

}  // namespace csb
