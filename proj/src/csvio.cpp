#include "bartlab/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bartlab/common.hpp"

namespace bartlab {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += "\"\"";
    else quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string csv_format(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  double parsed = 0.0;
  std::sscanf(buffer, "%lf", &parsed);
  if (parsed == value) {
    // Try shorter forms while they still round-trip.
    for (int digits = 1; digits < 17; ++digits) {
      char shorter[40];
      std::snprintf(shorter, sizeof(shorter), "%.*g", digits, value);
      std::sscanf(shorter, "%lf", &parsed);
      if (parsed == value) return shorter;
    }
  }
  return buffer;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  for (size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != header.size())
      throw ConfigError("write_csv: row " + std::to_string(r) + " has " +
                        std::to_string(rows[r].size()) + " fields, header has " +
                        std::to_string(header.size()));
  std::ofstream out(path);
  if (!out) throw ConfigError("write_csv: cannot open " + path);
  for (size_t c = 0; c < header.size(); ++c) {
    if (c) out << ',';
    out << csv_escape(header[c]);
  }
  out << '\n';
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << csv_escape(row[c]);
    }
    out << '\n';
  }
  if (!out.good()) throw ConfigError("write_csv: write failed for " + path);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("read_csv: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  size_t i = 0;
  const size_t n = text.size();
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(record);
    record.clear();
  };
  while (i < n) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          quoted = false;
          ++i;
        }
      } else {
        field += c;
        ++i;
      }
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
      ++i;
    } else if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\r') {
      ++i;
      if (i < n && text[i] == '\n') ++i;
      end_record();
    } else if (c == '\n') {
      ++i;
      end_record();
    } else {
      field += c;
      field_started = true;
      ++i;
    }
  }
  if (quoted) throw ConfigError("read_csv: unterminated quoted field in " + path);
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

}  // namespace bartlab
