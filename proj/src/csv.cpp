#include "amsim/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace amsim {

std::string csv_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : path_(path), out_(path), columns_(columns.size()) {
  if (!out_) throw ConfigError("csv: cannot open " + path + " for writing");
  if (columns.empty()) throw ConfigError("csv: header must name at least one column");
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw ConfigError("csv: row width " + std::to_string(cells.size()) + " does not match header of " +
                      path_);
  }
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

void CsvWriter::num_row(double t, const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size() + 1);
  cells.push_back(csv_time(t));
  for (double v : values) cells.push_back(csv_num(v));
  row(cells);
}

void CsvWriter::close() { out_.close(); }

int CsvTable::col(const std::string& name) const {
  const int c = col_optional(name);
  if (c < 0) throw ConfigError("csv: missing column '" + name + "'");
  return c;
}

int CsvTable::col_optional(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double CsvTable::num(size_t row, int column) const {
  const std::string& s = cell(row, column);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw ConfigError("csv: cell '" + s + "' is not numeric");
  return v;
}

const std::string& CsvTable::cell(size_t row, int column) const {
  if (row >= rows.size() || column < 0 || static_cast<size_t>(column) >= columns.size()) {
    throw ConfigError("csv: cell index out of range");
  }
  return rows[row][column];
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("csv: cannot open " + path);
  CsvTable table;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(l);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw ConfigError("csv: " + path + " is empty");
  table.columns = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.columns.size()) {
      throw ConfigError("csv: ragged row in " + path);
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace amsim
