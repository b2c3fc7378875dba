#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csb/error.hpp"

struct sqlite3;

namespace csb {

class StoreCorruption : public Error {
 public:
  using Error::Error;
};

// Durable single-file key/value store for resumable stages. Keys live in
// named namespaces ("assessments", "transcriptions", ...). A key is either
// absent or holds a complete payload: the payload row and its completion flag
// are committed in one synchronous transaction, and reads only ever return
// rows whose flag is set.
//
// All methods are thread-safe; writes are serialized through one connection.
class CheckpointStore {
 public:
  explicit CheckpointStore(const std::filesystem::path& path);
  ~CheckpointStore();

  CheckpointStore(const CheckpointStore&) = delete;
  CheckpointStore& operator=(const CheckpointStore&) = delete;

  std::optional<std::string> get(std::string_view ns, std::string_view key) const;
  bool contains(std::string_view ns, std::string_view key) const;
  void put(std::string_view ns, std::string_view key, std::string_view payload);
  void erase(std::string_view ns, std::string_view key);

  std::vector<std::string> keys(std::string_view ns) const;
  std::size_t count(std::string_view ns) const;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void exec(const char* sql) const;

  std::filesystem::path path_;
  sqlite3* db_ = nullptr;
  mutable std::mutex mu_;
};

}  // namespace csb
