#pragma once

#include <string>
#include <vector>

// Minimal CSV writer/reader for the tool's numeric outputs: '#'-prefixed
// metadata lines, one header row, then rows of decimals printed with 12
// significant digits.  Files use LF line endings on every platform, and a
// written file re-parses to the same numbers (12 significant digits
// round-trip through format_number).
namespace regretlab::io {

// "%.12g" rendering: parsing the result and formatting it again yields the
// identical string.
std::string format_number(double value);

struct CsvTable {
  std::vector<std::string> comments;  // metadata lines, stored without the "# " prefix
  std::vector<std::string> header;    // column names
  std::vector<std::vector<double>> rows;
};

// Serializes the table (comments first, then header, then rows). Throws
// std::invalid_argument when a row's width differs from the header's and
// std::runtime_error when the file cannot be opened.
void write_csv(const std::string& path, const CsvTable& table);
std::string csv_to_string(const CsvTable& table);

// Parses a file produced by write_csv. Throws std::runtime_error naming the
// line number on malformed content (non-numeric cell, ragged row, missing
// header).
CsvTable read_csv(const std::string& path);
CsvTable csv_from_string(const std::string& text);

}  // namespace regretlab::io
