#include "csb/checkpoint.hpp"

#include <fmt/format.h>
#include <sqlite3.h>

#include "csb/error.hpp"

namespace csb {
namespace {

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) fail("prepare");
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int index, std::string_view text) {
    if (sqlite3_bind_text(stmt_, index, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT) != SQLITE_OK)
      fail("bind");
    return *this;
  }

  // True while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    fail("step");
  }

  std::string column(int index) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, index));
    const int n = sqlite3_column_bytes(stmt_, index);
    return p ? std::string(p, static_cast<std::size_t>(n)) : std::string();
  }

  long long column_int(int index) const { return sqlite3_column_int64(stmt_, index); }

 private:
  [[noreturn]] void fail(const char* what) const {
    const int code = sqlite3_errcode(db_);
    const std::string msg = fmt::format("checkpoint store {} failed: {}", what, sqlite3_errmsg(db_));
    if (code == SQLITE_CORRUPT || code == SQLITE_NOTADB) throw StoreCorruption(msg);
    throw Error(msg);
  }

  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

}  // namespace

CheckpointStore::CheckpointStore(const std::filesystem::path& path) : path_(path) {
  if (sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw IoError(fmt::format("cannot open checkpoint store {}: {}", path.string(), msg));
  }
  sqlite3_busy_timeout(db_, 5000);
  try {
    exec("PRAGMA journal_mode=WAL");
    exec("PRAGMA synchronous=FULL");
    exec("CREATE TABLE IF NOT EXISTS entries ("
         " ns TEXT NOT NULL, key TEXT NOT NULL, payload TEXT NOT NULL,"
         " complete INTEGER NOT NULL DEFAULT 0, PRIMARY KEY (ns, key))");
    Statement check(db_, "PRAGMA quick_check");
    if (check.step() && check.column(0) != "ok")
      throw StoreCorruption(fmt::format("checkpoint store {} failed integrity check: {}", path.string(), check.column(0)));
  } catch (...) {
    sqlite3_close(db_);
    db_ = nullptr;
    throw;
  }
}

CheckpointStore::~CheckpointStore() { sqlite3_close(db_); }

void CheckpointStore::exec(const char* sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    const int code = sqlite3_errcode(db_);
    std::string msg = fmt::format("checkpoint store {}: {}", path_.string(), err ? err : "unknown error");
    sqlite3_free(err);
    if (code == SQLITE_CORRUPT || code == SQLITE_NOTADB) throw StoreCorruption(msg);
    throw Error(msg);
  }
}

std::optional<std::string> CheckpointStore::get(std::string_view ns, std::string_view key) const {
  std::lock_guard lock(mu_);
  Statement s(db_, "SELECT payload FROM entries WHERE ns = ?1 AND key = ?2 AND complete = 1");
  s.bind(1, ns).bind(2, key);
  if (!s.step()) return std::nullopt;
  return s.column(0);
}

bool CheckpointStore::contains(std::string_view ns, std::string_view key) const {
  return get(ns, key).has_value();
}

void CheckpointStore::put(std::string_view ns, std::string_view key, std::string_view payload) {
  std::lock_guard lock(mu_);
  exec("BEGIN IMMEDIATE");
  try {
    {
      Statement ins(db_, "INSERT OR REPLACE INTO entries (ns, key, payload, complete) VALUES (?1, ?2, ?3, 0)");
      ins.bind(1, ns).bind(2, key).bind(3, payload);
      ins.step();
    }
    {
      Statement mark(db_, "UPDATE entries SET complete = 1 WHERE ns = ?1 AND key = ?2");
      mark.bind(1, ns).bind(2, key);
      mark.step();
    }
    exec("COMMIT");
  } catch (...) {
    char* err = nullptr;
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, &err);
    sqlite3_free(err);
    throw;
  }
}

void CheckpointStore::erase(std::string_view ns, std::string_view key) {
  std::lock_guard lock(mu_);
  Statement s(db_, "DELETE FROM entries WHERE ns = ?1 AND key = ?2");
  s.bind(1, ns).bind(2, key);
  s.step();
}

std::vector<std::string> CheckpointStore::keys(std::string_view ns) const {
  std::lock_guard lock(mu_);
  Statement s(db_, "SELECT key FROM entries WHERE ns = ?1 AND complete = 1 ORDER BY key");
  s.bind(1, ns);
  std::vector<std::string> out;
  while (s.step()) out.push_back(s.column(0));
  return out;
}

std::size_t CheckpointStore::count(std::string_view ns) const {
  std::lock_guard lock(mu_);
  Statement s(db_, "SELECT COUNT(*) FROM entries WHERE ns = ?1 AND complete = 1");
  s.bind(1, ns);
  s.step();
  return static_cast<std::size_t>(s.column_int(0));
}

}  // namespace csb
