#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mest/data.hpp"
#include "mest/errors.hpp"

namespace mest {

enum class TableSchema {
  CsvHeader,                  // header "y,x1,...,xp"; y in the first column
  WhitespaceLastColResponse,  // no header; last column is the response
};

namespace detail {

inline double parse_cell(const std::string& cell, int line, int column) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != cell.size() || cell.empty()) {
    throw DataError("parse error at line " + std::to_string(line) + ", column " +
                    std::to_string(column) + ": '" + cell + "' is not a number");
  }
  return value;
}

inline std::vector<std::string> split_fields(std::string line, bool csv) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  if (csv) {
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
  } else {
    std::istringstream ss(line);
    std::string field;
    while (ss >> field) fields.push_back(field);
  }
  return fields;
}

}  // namespace detail

/// Reads a numeric table into a Dataset. CsvHeader expects "y,x1,...,xp"
/// (an optional trailing "is_outlier" column restores the outlier mask);
/// WhitespaceLastColResponse is the UCI Airfoil layout.
inline Dataset load_table(const std::filesystem::path& path, TableSchema schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  const bool csv = schema == TableSchema::CsvHeader;
  std::string line;
  int line_no = 0;
  bool has_mask = false;
  std::size_t width = 0;
  std::vector<std::vector<double>> rows;

  if (csv) {
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
    ++line_no;
    auto header = detail::split_fields(line, true);
    if (!header.empty() && header.back() == "is_outlier") {
      has_mask = true;
      header.pop_back();
    }
    if (header.empty() || header.front() != "y") {
      throw DataError("parse error at line 1: expected header y,x1,...,xp");
    }
    width = header.size() + (has_mask ? 1 : 0);
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_fields(line, csv);
    if (fields.empty()) continue;
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw DataError("parse error at line " + std::to_string(line_no) + ": expected " +
                      std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) {
      row[j] = detail::parse_cell(fields[j], line_no, static_cast<int>(j + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("'" + path.string() + "' has no data rows");
  if (width < 2) throw DataError("'" + path.string() + "' needs at least one feature column");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(width - 1 - (has_mask ? 1 : 0));
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  std::optional<std::vector<std::uint8_t>> mask;
  if (has_mask) mask.emplace(rows.size(), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (csv) {
      y(i) = row[0];
      for (Eigen::Index j = 0; j < p; ++j) x(i, j) = row[static_cast<std::size_t>(j + 1)];
      if (has_mask) (*mask)[static_cast<std::size_t>(i)] = row.back() != 0.0 ? 1 : 0;
    } else {
      for (Eigen::Index j = 0; j < p; ++j) x(i, j) = row[static_cast<std::size_t>(j)];
      y(i) = row.back();
    }
  }
  return Dataset(std::move(x), std::move(y), std::move(mask));
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Writes the CSV counterpart of load_table's CsvHeader schema.
inline void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "y";
  for (Eigen::Index j = 0; j < ds.p(); ++j) out << ",x" << (j + 1);
  if (ds.outlier_mask()) out << ",is_outlier";
  out << "\n";
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out << detail::format_double(ds.y()(i));
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
      out << "," << detail::format_double(ds.x()(i, j));
    }
    if (ds.outlier_mask()) {
      out << "," << static_cast<int>((*ds.outlier_mask())[static_cast<std::size_t>(i)]);
    }
    out << "\n";
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace mest
