#include "csb/tsv.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csb/error.hpp"

namespace csb {

ParseError::ParseError(std::string file, std::size_t line, const std::string& message)
    : Error(line > 0 ? fmt::format("{}:{}: {}", file, line, message)
                     : fmt::format("{}: {}", file, message)),
      file_(std::move(file)),
      line_(line) {}

ValidationError::ValidationError(std::string field, const std::string& message)
    : Error(fmt::format("{}: {}", field, message)), field_(std::move(field)), detail_(message) {}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (f == nullptr) throw IoError(fmt::format("cannot open {} for writing", tmp.string()));
    const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size() &&
                    std::fflush(f) == 0;
    std::fclose(f);
    if (!ok) throw IoError(fmt::format("write failed: {}", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace csb

namespace csb::tsv {

std::string escape(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (char c : field) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] != '\\') {
      out += field[i];
      continue;
    }
    if (++i == field.size()) throw Error("dangling backslash escape");
    switch (field[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw Error(fmt::format("unknown escape \\{}", field[i]));
    }
  }
  return out;
}

std::string format_number(double value) { return fmt::format("{}", value); }

double parse_number(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end)
    throw Error(fmt::format("'{}' is not a number", text));
  return v;
}

std::uint64_t parse_count(std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end)
    throw Error(fmt::format("'{}' is not a nonnegative integer", text));
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::vector<Row> read_table(const std::filesystem::path& path,
                            std::span<const std::string_view> header) {
  const std::string content = read_file(path);
  const std::string name = path.string();
  std::vector<Row> rows;
  if (content.empty()) return rows;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    std::string_view line(content.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const auto cols = split(line);
    if (line_no == 1) {
      if (cols.size() != header.size())
        throw ParseError(name, line_no, fmt::format("header has {} columns, expected {}", cols.size(), header.size()));
      for (std::size_t i = 0; i < header.size(); ++i)
        if (cols[i] != header[i])
          throw ParseError(name, line_no, fmt::format("header column {} is '{}', expected '{}'", i + 1, cols[i], header[i]));
      continue;
    }
    if (line.empty() && pos >= content.size()) break;
    if (cols.size() != header.size())
      throw ParseError(name, line_no, fmt::format("expected {} columns, found {}", header.size(), cols.size()));
    Row row;
    row.line = line_no;
    row.fields.reserve(cols.size());
    for (auto c : cols) {
      try {
        row.fields.push_back(unescape(c));
      } catch (const Error& e) {
        throw ParseError(name, line_no, e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Writer::Writer(std::span<const std::string_view> header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) buffer_ += '\t';
    buffer_ += header[i];
  }
  buffer_ += '\n';
}

Writer::Writer(std::initializer_list<std::string_view> header)
    : Writer(std::span<const std::string_view>(header.begin(), header.size())) {}

Writer::Writer(const std::vector<std::string>& header)
    : Writer(std::vector<std::string_view>(header.begin(), header.end())) {}

void Writer::row(std::span<const std::string> fields) {
  if (fields.size() != columns_)
    throw Error(fmt::format("row has {} fields, table has {} columns", fields.size(), columns_));
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) buffer_ += '\t';
    buffer_ += escape(fields[i]);
  }
  buffer_ += '\n';
}

void Writer::row(std::initializer_list<std::string> fields) {
  row(std::span<const std::string>(fields.begin(), fields.size()));
}

}  // namespace csb::tsv
