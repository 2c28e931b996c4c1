#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "emclim/util.hpp"

namespace emclim::csv {

// RFC 4180-lite: quoted fields with "" escapes, no embedded newlines.
inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c == '\r') {
      // ignore
    } else {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

inline std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
  int require_column(const std::string& name, const std::string& context) const {
    int c = column(name);
    if (c < 0) throw DataError(context + ": missing required column '" + name + "'");
    return c;
  }
};

inline Table read_table(std::istream& in, const std::string& context) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(context + ": empty CSV");
  t.header = split_line(line);
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size())
      throw DataError(context + ": line " + std::to_string(lineno) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV: " + path.string());
  return read_table(in, path.filename().string());
}

inline std::optional<double> parse_optional_double(const std::string& raw,
                                                   const std::string& context) {
  std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw DataError(context + ": not a number: '" + raw + "'");
  return v;
}

inline double parse_double(const std::string& raw, const std::string& context) {
  auto v = parse_optional_double(raw, context);
  if (!v) throw DataError(context + ": empty numeric field");
  return *v;
}

inline long parse_long(const std::string& raw, const std::string& context) {
  std::string s = trim(raw);
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end == s.c_str() || *end != '\0')
    throw DataError(context + ": not an integer: '" + raw + "'");
  return v;
}

}  // namespace emclim::csv
