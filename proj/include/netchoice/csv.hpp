#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace netchoice::csv {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Locale-independent parse with `.` decimal separator. Returns nullopt when
/// the whole token is not a number.
std::optional<double> parse_double(std::string_view token);

std::vector<std::string> split_line(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// Reads a comma separated file whose first line is a header. Blank lines
/// are skipped; CR line endings are tolerated.
Table read_table(const std::filesystem::path& path);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace netchoice::csv
