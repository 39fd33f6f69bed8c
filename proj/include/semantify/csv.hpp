#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace semantify {

/// 17 significant digits; round-trips every double.
std::string format_real(double value);

/// Minimal comma-separated table: a header row plus data rows. Fields are
/// plain tokens (no quoting); blank lines are ignored.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);
double parse_real(std::string_view field);

}  // namespace semantify
