/*
 * Copyright (C) 2026 The geosens authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GEOSENS_EXPERIMENTS_TABLE_HPP
#define GEOSENS_EXPERIMENTS_TABLE_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "../error.hpp"

namespace geosens::experiments {

inline constexpr int kSchemaVersion = 1;

/// Empty cells (monostate) stand for undefined values; no NaN ever reaches a
/// result file.
using Cell = std::variant<std::monostate, std::int64_t, std::uint64_t, double, std::string>;

inline const std::vector<std::string>& schema_columns() {
  static const std::vector<std::string> cols{
      "schema_version", "row_type",  "experiment", "case",     "nu",         "param",
      "value",          "param2",    "value2",     "b_hat",    "b_ci_lower", "b_ci_upper",
      "b_se",           "c_hat",     "c_ci_lower", "c_ci_upper", "c_se",     "b_true",
      "c_true",         "s_hat",     "d_hat",      "msd_b",    "msd_b_se",   "msd_c",
      "msd_c_se",       "replicates", "status",    "seed",     "n",          "nw",
      "mode",           "dropped_tau", "elapsed_s"};
  return cols;
}

/// One output row addressed by column name.
class Row {
public:
  Row& set(const std::string& column, Cell value) {
    if (!column_index().count(column)) fail(ErrorCode::InvalidSpec, "unknown result column '" + column + "'");
    if (const auto* d = std::get_if<double>(&value); d && !std::isfinite(*d)) value = std::monostate{};
    cells_[column] = std::move(value);
    return *this;
  }
  template <class T>
    requires std::is_integral_v<T>
  Row& set(const std::string& column, T value) {
    if constexpr (std::is_signed_v<T>) {
      return set(column, Cell{static_cast<std::int64_t>(value)});
    } else {
      return set(column, Cell{static_cast<std::uint64_t>(value)});
    }
  }
  Row& set(const std::string& column, double value) { return set(column, Cell{value}); }
  Row& set(const std::string& column, std::string value) { return set(column, Cell{std::move(value)}); }
  Row& set(const std::string& column, const char* value) { return set(column, Cell{std::string(value)}); }

  Cell get(const std::string& column) const {
    const auto it = cells_.find(column);
    return it == cells_.end() ? Cell{} : it->second;
  }

private:
  static const std::map<std::string, std::size_t>& column_index() {
    static const std::map<std::string, std::size_t> idx = [] {
      std::map<std::string, std::size_t> m;
      for (std::size_t i = 0; i < schema_columns().size(); ++i) m[schema_columns()[i]] = i;
      return m;
    }();
    return idx;
  }
  std::map<std::string, Cell> cells_;
};

struct ResultTable {
  std::vector<Row> rows;
  std::vector<std::string> warnings;
  bool degenerate_index = false; // some ball index had no usable denominator
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline std::string csv_field(const Cell& cell) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "";
        } else if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, std::uint64_t>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(v);
        } else {
          if (v.find_first_of(",\"\n") == std::string::npos) return v;
          std::string out = "\"";
          for (char c : v) {
            if (c == '"') out += '"';
            out += c;
          }
          return out + "\"";
        }
      },
      cell);
}

inline void write_csv(std::ostream& os, const ResultTable& table) {
  const auto& cols = schema_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << csv_field(row.get(cols[i]));
    os << '\n';
  }
}

} // namespace geosens::experiments

#endif // GEOSENS_EXPERIMENTS_TABLE_HPP
