#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace fga {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Comma-delimited, RFC 4180 quoting, LF or CRLF line ends.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_field(const std::string& value);
std::string format_csv(const CsvTable& table);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

}  // namespace fga
