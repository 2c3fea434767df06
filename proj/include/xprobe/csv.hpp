#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xprobe {

/// Shortest round-trip decimal form.
std::string format_number(double value);
/// Empty cell for an undefined value.
std::string format_number(const std::optional<double>& value);

/// Comma-separated writer with a header row; quotes cells only when needed.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::size_t width_;
  std::filesystem::path path_;
};

/// Parses a CSV document written by CsvWriter (RFC 4180 quoting) into rows.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace xprobe
