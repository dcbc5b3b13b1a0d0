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

#ifndef GEOSENS_TOOLS_CLI_HPP
#define GEOSENS_TOOLS_CLI_HPP

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "geosens/error.hpp"
#include "geosens/experiments/config.hpp"
#include "geosens/experiments/runners.hpp"
#include "geosens/experiments/table.hpp"

namespace geosens::cli {

enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kNumericalFailure = 3,
  kDegenerateDenominator = 4,
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
  case ErrorCode::ConfigError:
  case ErrorCode::InvalidSpec:
  case ErrorCode::InvalidNu:
  case ErrorCode::IncompatibleIsometry:
  case ErrorCode::GridTooLarge:
  case ErrorCode::TooLarge:
  case ErrorCode::TooFewSamples:
    return kConfigError;
  case ErrorCode::DegenerateDenominator:
    return kDegenerateDenominator;
  default:
    return kNumericalFailure;
  }
}

/// Flat key -> values from an INI-like file; section keys become "section.key".
inline experiments::KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    fail(ErrorCode::ConfigError, std::string("malformed config file: ") + e.what());
  }
  experiments::KeyValues kv;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    std::string key;
    for (const auto& p : item.parents) key += p + ".";
    key += item.name;
    if (kv.count(key)) fail(ErrorCode::ConfigError, "duplicate config key '" + key + "'");
    kv[key] = item.inputs;
  }
  return kv;
}

inline nlohmann::ordered_json to_json(const experiments::ResultTable& table) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["schema_version"] = experiments::kSchemaVersion;
  doc["columns"] = experiments::schema_columns();
  ordered_json rows = ordered_json::array();
  for (const auto& row : table.rows) {
    ordered_json obj = ordered_json::object();
    for (const auto& col : experiments::schema_columns()) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
              obj[col] = nullptr;
            } else {
              obj[col] = v;
            }
          },
          row.get(col));
    }
    rows.push_back(std::move(obj));
  }
  doc["rows"] = std::move(rows);
  doc["warnings"] = table.warnings;
  return doc;
}

inline void write_table(std::ostream& os, const experiments::ResultTable& table, const std::string& format) {
  if (format == "json") {
    os << to_json(table).dump(2) << '\n';
  } else {
    experiments::write_csv(os, table);
  }
}

/// Full command-line entry point; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Geodesic-ball sensitivity indices for manifold-valued model outputs", "geosens"};
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n, nw, bootstrap;
  std::optional<std::string> mode, out_path, format;
  app.add_option("experiment", experiment, "example1 | example2 | example3 | stiffness | custom")->required();
  app.add_option("--config", config_path, "INI-like experiment configuration")->required();
  app.add_option("--seed", seed, "experiment seed (overrides the config)");
  app.add_option("--n", n, "pick-freeze sample size N");
  app.add_option("--nw", nw, "W-pool size Nw (default N)");
  app.add_option("--mode", mode, "exact | incomplete:M");
  app.add_option("--bootstrap", bootstrap, "bootstrap replicates (0 disables, otherwise >= 100)");
  app.add_option("--out", out_path, "output file (default stdout)");
  app.add_option("--format", format, "csv | json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    auto cfg = experiments::parse_config(experiment, read_config_file(config_path));
    if (seed) cfg.seed = *seed;
    if (n) cfg.n = *n;
    if (nw) cfg.nw = *nw;
    if (mode) cfg.mode = experiments::parse_mode(*mode);
    if (bootstrap) cfg.bootstrap = *bootstrap;
    if (out_path) cfg.out = *out_path;
    if (format) cfg.format = *format;
    experiments::validate_common(cfg);

    const auto table = experiments::run_experiment(cfg);
    for (const auto& w : table.warnings) err << "geosens: warning: " << w << '\n';
    if (cfg.out.empty()) {
      write_table(out, table, cfg.format);
    } else {
      std::ofstream file(cfg.out, std::ios::binary);
      if (!file) fail(ErrorCode::ConfigError, "cannot write output file '" + cfg.out + "'");
      write_table(file, table, cfg.format);
    }
    if (table.degenerate_index) {
      err << "geosens: error: DegenerateDenominator: ball index undefined for at least one row\n";
      return kDegenerateDenominator;
    }
    return kSuccess;
  } catch (const Error& e) {
    err << "geosens: error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "geosens: error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

} // namespace geosens::cli

#endif // GEOSENS_TOOLS_CLI_HPP
