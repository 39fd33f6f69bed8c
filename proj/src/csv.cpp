#include "semantify/csv.hpp"

#include <charconv>

#include <fmt/format.h>

#include "semantify/archive.hpp"
#include "semantify/error.hpp"

namespace semantify {

std::string format_real(double value) { return fmt::format("{:.17g}", value); }

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  bool first = true;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw DataError(fmt::format("csv row has {} fields, header has {}", fields.size(),
                                    table.header.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw DataError("csv is empty");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  try {
    return parse_csv(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(fmt::format("'{}': {}", path.string(), e.what()));
  }
}

double parse_real(std::string_view field) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw DataError(fmt::format("'{}' is not a number", field));
  return value;
}

}  // namespace semantify
