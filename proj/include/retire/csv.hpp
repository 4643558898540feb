#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "retire/dataset.hpp"

namespace retire {

struct csv_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct missing_column_error : csv_error {
  using csv_error::csv_error;
};
struct non_numeric_cell_error : csv_error {
  int row, col;  // 1-based data row (header excluded), 0-based column
  non_numeric_cell_error(const std::string& msg, int r, int c) : csv_error(msg), row(r), col(c) {}
};
struct ragged_row_error : csv_error {
  int row;
  ragged_row_error(const std::string& msg, int r) : csv_error(msg), row(r) {}
};

struct CsvData {
  Dataset data;
  std::string response_name;
  std::vector<std::string> predictor_names;
};

// UTF-8 CSV with a header row and numeric body. The response column is
// selected by name, or by 0-based index when the selector is all digits;
// remaining columns become predictors in header order.
CsvData parse_csv(const std::string& path, const std::string& response_selector);

// Writes y plus predictors with shortest-round-trip float formatting.
void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& predictor_names = {});

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

}  // namespace retire
