#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace csb::tsv {

// C-style escaping: backslash, tab, newline and carriage return become
// "\\", "\t", "\n", "\r". Every other byte is copied through.
std::string escape(std::string_view field);
// Throws csb::Error on a dangling or unknown escape.
std::string unescape(std::string_view field);

std::vector<std::string_view> split(std::string_view line);

// Shortest decimal representation that round-trips exactly.
std::string format_number(double value);
// Throws csb::Error on anything but a complete decimal number.
double parse_number(std::string_view text);
std::uint64_t parse_count(std::string_view text);

struct Row {
  std::size_t line = 0;  // 1-based, header is line 1
  std::vector<std::string> fields;
};

// Reads a tab-separated file with a mandatory header row. A zero-byte file
// yields no rows. Column count, header names and escapes are validated;
// violations raise ParseError with the line number.
std::vector<Row> read_table(const std::filesystem::path& path,
                            std::span<const std::string_view> header);

class Writer {
 public:
  explicit Writer(std::span<const std::string_view> header);
  Writer(std::initializer_list<std::string_view> header);
  explicit Writer(const std::vector<std::string>& header);

  void row(std::span<const std::string> fields);
  void row(std::initializer_list<std::string> fields);

  const std::string& str() const noexcept { return buffer_; }

 private:
  std::size_t columns_;
  std::string buffer_;
};

}  // namespace csb::tsv

namespace csb {

// Write to a sibling temp file, flush, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace csb
