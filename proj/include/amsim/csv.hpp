#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "amsim/errors.hpp"

namespace amsim {

/// Fixed-format cell renderers so identical runs produce identical bytes.
/// Timestamps carry microsecond resolution, values 9 significant digits.
std::string csv_time(double t);
std::string csv_num(double v);

/// Line-buffered CSV writer with a mandatory header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);

  void row(const std::vector<std::string>& cells);
  /// Convenience for all-numeric rows: time column plus %.9g values.
  void num_row(double t, const std::vector<double>& values);

  /// Flushes and closes the file; further rows are an error. Destruction
  /// closes too, this exists so logs can be re-read while the writer set is
  /// still alive.
  void close();

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  size_t columns_ = 0;
};

/// In-memory CSV with string cells, loaded whole. Numeric access parses on
/// demand.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Column index; throws ConfigError when the column is missing.
  int col(const std::string& name) const;
  /// -1 when absent instead of throwing.
  int col_optional(const std::string& name) const;
  double num(size_t row, int column) const;
  const std::string& cell(size_t row, int column) const;
};

/// Loads a comma-separated file written by CsvWriter (no quoting or escaping).
/// Throws ConfigError when the file is missing or the rows are ragged.
CsvTable read_csv(const std::string& path);

}  // namespace amsim
