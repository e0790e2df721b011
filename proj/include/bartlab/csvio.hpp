#pragma once

#include <string>
#include <vector>

namespace bartlab {

// Quotes a field per RFC 4180 when it contains a comma, quote, or newline.
std::string csv_escape(const std::string& field);

// Shortest representation that round-trips a double exactly.
std::string csv_format(double value);

// Writes header + rows, validating that every row matches the header width.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Full RFC 4180 reader (quoted fields, embedded separators and newlines,
// doubled quotes). Returns all records including the header row.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace bartlab
