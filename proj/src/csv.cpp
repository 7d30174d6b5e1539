#include "regretlab/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace regretlab::io {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (const char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

double parse_cell(const std::string& cell, std::size_t line_number) {
  if (cell.empty()) {
    throw std::runtime_error("read_csv: empty cell on line " + std::to_string(line_number));
  }
  char* end = nullptr;
  const double value = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) {
    throw std::runtime_error("read_csv: non-numeric cell \"" + cell + "\" on line " +
                             std::to_string(line_number));
  }
  return value;
}

}  // namespace

std::string format_number(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

std::string csv_to_string(const CsvTable& table) {
  if (table.header.empty()) {
    throw std::invalid_argument("write_csv: header must not be empty");
  }
  std::ostringstream out;
  for (const auto& comment : table.comments) {
    out << "# " << comment << '\n';
  }
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i > 0) out << ',';
    out << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw std::invalid_argument("write_csv: row width " + std::to_string(row.size()) +
                                  " does not match header width " +
                                  std::to_string(table.header.size()));
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << format_number(row[i]);
    }
    out << '\n';
  }
  return out.str();
}

void write_csv(const std::string& path, const CsvTable& table) {
  const std::string text = csv_to_string(table);
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("write_csv: cannot open \"" + path + "\" for writing");
  }
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) {
    throw std::runtime_error("write_csv: failed writing \"" + path + "\"");
  }
}

CsvTable csv_from_string(const std::string& text) {
  CsvTable table;
  bool have_header = false;
  std::size_t line_number = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::size_t start = 1;
      if (start < line.size() && line[start] == ' ') ++start;
      table.comments.push_back(line.substr(start));
      continue;
    }
    if (!have_header) {
      table.header = split_fields(line);
      have_header = true;
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != table.header.size()) {
      throw std::runtime_error("read_csv: line " + std::to_string(line_number) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(table.header.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& cell : fields) {
      row.push_back(parse_cell(cell, line_number));
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) {
    throw std::runtime_error("read_csv: no header row found");
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("read_csv: cannot open \"" + path + "\"");
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return csv_from_string(buffer.str());
}

}  // namespace regretlab::io
