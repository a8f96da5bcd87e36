#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace granger {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<double> values;  // rows * cols, row-major
  std::size_t rows = 0;
  std::size_t cols = 0;
};

// Numeric CSV with a mandatory header row.  Throws std::runtime_error with
// file and line context on ragged rows or non-numeric cells.
CsvTable read_numeric_csv(const std::string& path);

// Doubles are written with 17 significant digits so a read round-trips to
// the identical bit pattern.
void write_numeric_csv(const std::string& path,
                       const std::vector<std::string>& header,
                       const double* values, std::size_t rows,
                       std::size_t cols);

void write_string_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::string>& cells, std::size_t rows,
                      std::size_t cols);

std::vector<std::string> default_var_names(std::size_t n);

}  // namespace granger
