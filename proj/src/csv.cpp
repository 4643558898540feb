#include "retire/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace retire {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_cell(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) return false;
  return std::isfinite(out);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

CsvData parse_csv(const std::string& path, const std::string& response_selector) {
  std::ifstream in(path);
  if (!in) throw csv_error("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw csv_error("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);
  const int ncol = static_cast<int>(header.size());
  if (ncol < 1) throw csv_error("'" + path + "' has no columns");

  int response_col = -1;
  for (int c = 0; c < ncol; ++c) {
    if (header[static_cast<std::size_t>(c)] == response_selector) {
      response_col = c;
      break;
    }
  }
  if (response_col < 0 && !response_selector.empty() &&
      std::all_of(response_selector.begin(), response_selector.end(),
                  [](unsigned char ch) { return std::isdigit(ch); })) {
    const int idx = std::stoi(response_selector);
    if (idx >= 0 && idx < ncol) response_col = idx;
  }
  if (response_col < 0) {
    throw missing_column_error("response column '" + response_selector + "' not found in '" + path + "'");
  }

  std::vector<std::vector<double>> rows;
  int rownum = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++rownum;
    const std::vector<std::string> cells = split_line(line);
    if (static_cast<int>(cells.size()) != ncol) {
      throw ragged_row_error("row " + std::to_string(rownum) + " has " + std::to_string(cells.size()) +
                                 " cells, expected " + std::to_string(ncol),
                             rownum);
    }
    std::vector<double> vals(static_cast<std::size_t>(ncol));
    for (int c = 0; c < ncol; ++c) {
      if (!parse_cell(cells[static_cast<std::size_t>(c)], vals[static_cast<std::size_t>(c)])) {
        throw non_numeric_cell_error("non-numeric cell at row " + std::to_string(rownum) + ", column " +
                                         std::to_string(c) + " ('" + trim(cells[static_cast<std::size_t>(c)]) + "')",
                                     rownum, c);
      }
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw csv_error("'" + path + "' has no data rows");

  const int n = static_cast<int>(rows.size());
  const int d = ncol - 1;
  CsvData out;
  out.data.x.resize(n, d);
  out.data.y.resize(n);
  out.response_name = header[static_cast<std::size_t>(response_col)];
  for (int c = 0; c < ncol; ++c) {
    if (c != response_col) out.predictor_names.push_back(header[static_cast<std::size_t>(c)]);
  }
  for (int i = 0; i < n; ++i) {
    out.data.y[i] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(response_col)];
    int jc = 0;
    for (int c = 0; c < ncol; ++c) {
      if (c == response_col) continue;
      out.data.x(i, jc++) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    }
  }
  out.data.validate();
  return out;
}

void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& predictor_names) {
  std::ofstream outf(path);
  if (!outf) throw csv_error("cannot write '" + path + "'");
  outf << "y";
  for (int j = 0; j < data.d(); ++j) {
    if (static_cast<std::size_t>(j) < predictor_names.size()) {
      outf << ',' << predictor_names[static_cast<std::size_t>(j)];
    } else {
      outf << ",x" << (j + 1);
    }
  }
  outf << '\n';
  for (int i = 0; i < data.n(); ++i) {
    outf << format_double(data.y[i]);
    for (int j = 0; j < data.d(); ++j) outf << ',' << format_double(data.x(i, j));
    outf << '\n';
  }
  if (!outf) throw csv_error("write to '" + path + "' failed");
}

}  // namespace retire
