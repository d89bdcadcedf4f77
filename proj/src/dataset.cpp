#include "wb/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "wb/errors.hpp"

namespace wb {

Dataset::Dataset(std::vector<double> y, std::vector<std::uint8_t> d,
                 std::vector<double> x_rows, std::vector<std::string> x_names,
                 std::optional<std::vector<double>> z, OutcomeSupport support)
    : y_(std::move(y)),
      d_(std::move(d)),
      x_rows_(std::move(x_rows)),
      x_names_(std::move(x_names)),
      z_(std::move(z)),
      support_(support) {
  const std::size_t n = y_.size();
  if (n == 0) throw DomainError("dataset: no observations");
  if (d_.size() != n || (z_ && z_->size() != n) ||
      x_rows_.size() != n * x_names_.size()) {
    throw DomainError("dataset: column lengths disagree");
  }
  if (!(support_.lo < support_.hi) || !std::isfinite(support_.lo) ||
      !std::isfinite(support_.hi)) {
    throw DomainError("dataset: outcome support must be finite with lo < hi");
  }
  std::set<std::string> names(x_names_.begin(), x_names_.end());
  if (names.size() != x_names_.size()) {
    throw SchemaError("dataset: duplicate covariate column names");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(y_[i] >= support_.lo && y_[i] <= support_.hi)) {
      throw DomainError("dataset: outcome outside declared support at row " +
                        std::to_string(i + 1));
    }
    if (d_[i] > 1) {
      throw DomainError("dataset: treatment not in {0,1} at row " +
                        std::to_string(i + 1));
    }
  }
}

std::size_t Dataset::x_index(const std::string& name) const {
  const auto it = std::find(x_names_.begin(), x_names_.end(), name);
  if (it == x_names_.end()) {
    throw SchemaError("dataset: no covariate column named '" + name + "'");
  }
  return static_cast<std::size_t>(it - x_names_.begin());
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  const std::size_t k = x_names_.size();
  std::vector<double> y;
  std::vector<std::uint8_t> d;
  std::vector<double> xr;
  std::optional<std::vector<double>> z;
  y.reserve(rows.size());
  d.reserve(rows.size());
  xr.reserve(rows.size() * k);
  if (z_) z.emplace();
  for (std::size_t i : rows) {
    y.push_back(y_[i]);
    d.push_back(d_[i]);
    const auto row = x_row(i);
    xr.insert(xr.end(), row.begin(), row.end());
    if (z_) z->push_back((*z_)[i]);
  }
  return Dataset(std::move(y), std::move(d), std::move(xr), x_names_, std::move(z),
                 support_);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& col) {
  const std::string s = trim(raw);
  if (s.empty()) {
    throw ParseError("csv: missing value at row " + std::to_string(row) +
                     ", column '" + col + "'");
  }
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw ParseError("csv: cannot parse '" + s + "' at row " + std::to_string(row) +
                     ", column '" + col + "'");
  }
  return value;
}

Dataset load_from_stream(std::istream& in, const Schema& schema,
                         OutcomeSupport support) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("csv: empty input");
  const auto columns = split_line(header);

  auto column_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (trim(columns[j]) == name) return j;
    }
    throw SchemaError("csv: required column '" + name + "' not found in header");
  };

  const std::size_t y_col = column_of(schema.y);
  const std::size_t d_col = column_of(schema.d);
  std::vector<std::size_t> x_cols;
  x_cols.reserve(schema.x.size());
  for (const auto& name : schema.x) x_cols.push_back(column_of(name));
  std::optional<std::size_t> z_col;
  if (schema.z) z_col = column_of(*schema.z);

  std::vector<double> y;
  std::vector<std::uint8_t> d;
  std::vector<double> x_rows;
  std::optional<std::vector<double>> z;
  if (schema.z) z.emplace();

  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != columns.size()) {
      throw ParseError("csv: row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " fields, header has " +
                       std::to_string(columns.size()));
    }
    y.push_back(parse_cell(cells[y_col], row, schema.y));
    const double dv = parse_cell(cells[d_col], row, schema.d);
    if (dv != 0.0 && dv != 1.0) {
      throw DomainError("csv: treatment value '" + trim(cells[d_col]) +
                        "' at row " + std::to_string(row) + " is not 0 or 1");
    }
    d.push_back(static_cast<std::uint8_t>(dv));
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      x_rows.push_back(parse_cell(cells[x_cols[j]], row, schema.x[j]));
    }
    if (z_col) z->push_back(parse_cell(cells[*z_col], row, *schema.z));
  }
  if (row == 0) throw DomainError("csv: no data rows");
  return Dataset(std::move(y), std::move(d), std::move(x_rows), schema.x,
                 std::move(z), support);
}

}  // namespace

Dataset load_dataset(const std::string& path, const Schema& schema,
                     OutcomeSupport support) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open dataset file '" + path + "'");
  return load_from_stream(in, schema, support);
}

Dataset load_dataset_from_string(const std::string& csv_text, const Schema& schema,
                                 OutcomeSupport support) {
  std::istringstream in(csv_text);
  return load_from_stream(in, schema, support);
}

}  // namespace wb
