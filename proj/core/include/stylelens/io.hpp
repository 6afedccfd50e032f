#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace stylelens {

/// A parsed CSV file: header row plus data rows. Lines starting with '#'
/// are treated as comments and skipped, which lets report header blocks
/// round-trip through the reader.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // 1-based source line of each row

  /// Column index for `name`; throws Error when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// Splits one CSV record. Double-quoted fields may contain commas and
/// doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line);

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

/// Strict decimal parse of a whole field; throws std::invalid_argument.
double parse_double(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace stylelens
