#include "graphata/text.hpp"

#include <charconv>
#include <cstdio>

#include "graphata/errors.hpp"

namespace graphata {

std::string format_double(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

LineReader::LineReader(const std::string& path) : path_(path), in_(path) {
  if (!in_) throw IoError("cannot open '" + path + "' for reading");
}

std::optional<std::vector<std::string_view>> LineReader::next() {
  while (std::getline(in_, line_)) {
    ++line_number_;
    auto fields = split_fields(line_);
    if (!fields.empty()) return fields;
  }
  return std::nullopt;
}

std::vector<std::string_view> LineReader::expect(std::string_view what) {
  auto fields = next();
  if (!fields) fail("unexpected end of file, expected " + std::string(what));
  return *fields;
}

void LineReader::fail(const std::string& message) const {
  throw ParseError(path_ + ":" + std::to_string(line_number_) + ": " + message);
}

double LineReader::parse_double(std::string_view field, std::string_view what) const {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    fail("invalid number '" + std::string(field) + "' for " + std::string(what));
  }
  return value;
}

std::size_t LineReader::parse_size(std::string_view field, std::string_view what) const {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    fail("invalid count '" + std::string(field) + "' for " + std::string(what));
  }
  return value;
}

long long LineReader::parse_int(std::string_view field, std::string_view what) const {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    fail("invalid integer '" + std::string(field) + "' for " + std::string(what));
  }
  return value;
}

void LineReader::expect_count(const std::vector<std::string_view>& fields, std::size_t count,
                              std::string_view what) const {
  if (fields.size() != count) {
    fail(std::string(what) + ": expected " + std::to_string(count) + " fields, got " + std::to_string(fields.size()));
  }
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace graphata
