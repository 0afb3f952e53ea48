#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace graphata {

// Shortest-stable decimal form with 17 significant digits; round-trips exactly.
std::string format_double(double x);

// Whitespace-separated fields of a line.
std::vector<std::string_view> split_fields(std::string_view line);

// Reads a text file line by line and raises ParseError with "path:line:"
// context. Blank lines are skipped.
class LineReader {
 public:
  // Throws IoError when the file cannot be opened.
  explicit LineReader(const std::string& path);

  // Next non-blank line split into fields, or nullopt at end of file.
  std::optional<std::vector<std::string_view>> next();
  // Like next() but a missing line is a parse error naming `what`.
  std::vector<std::string_view> expect(std::string_view what);

  [[noreturn]] void fail(const std::string& message) const;
  double parse_double(std::string_view field, std::string_view what) const;
  std::size_t parse_size(std::string_view field, std::string_view what) const;
  long long parse_int(std::string_view field, std::string_view what) const;
  void expect_count(const std::vector<std::string_view>& fields, std::size_t count, std::string_view what) const;

  std::size_t line_number() const { return line_number_; }
  const std::string& line() const { return line_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::string line_;
  std::size_t line_number_ = 0;
};

// Opens for writing or throws IoError.
std::ofstream open_for_write(const std::string& path);

}  // namespace graphata
