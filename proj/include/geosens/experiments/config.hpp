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

#ifndef GEOSENS_EXPERIMENTS_CONFIG_HPP
#define GEOSENS_EXPERIMENTS_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../estimators.hpp"

namespace geosens::experiments {

/// Raw key -> values of a flat config file; list values are already split.
using KeyValues = std::map<std::string, std::vector<std::string>>;

[[noreturn]] inline void config_error(const std::string& msg) { fail(ErrorCode::ConfigError, msg); }

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    config_error(key + ": '" + text + "' is not a finite number");
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    config_error(key + ": '" + text + "' is not a non-negative integer");
  }
  return v;
}

inline EstimationMode parse_mode(const std::string& text) {
  const std::string t = trim(text);
  if (t == "exact") return EstimationMode::exact();
  const std::string prefix = "incomplete:";
  if (t.rfind(prefix, 0) == 0) {
    const auto m = parse_u64("mode", t.substr(prefix.size()));
    if (m < 1) config_error("mode: incomplete needs M >= 1");
    return EstimationMode::incomplete(m);
  }
  config_error("mode: expected 'exact' or 'incomplete:M', got '" + text + "'");
}

/// Grid values: a list "a, b, c" or a single "start:stop:count" (inclusive
/// linear spacing).
inline std::vector<double> parse_grid(const std::string& key, const std::vector<std::string>& values) {
  if (values.empty()) config_error(key + ": empty value");
  if (values.size() == 1 && values[0].find(':') != std::string::npos) {
    const std::string& t = values[0];
    const auto c1 = t.find(':');
    const auto c2 = t.find(':', c1 + 1);
    if (c2 == std::string::npos) config_error(key + ": range must be start:stop:count");
    const double start = parse_double(key, t.substr(0, c1));
    const double stop = parse_double(key, t.substr(c1 + 1, c2 - c1 - 1));
    const auto count = parse_u64(key, t.substr(c2 + 1));
    if (count < 1) config_error(key + ": range count must be >= 1");
    std::vector<double> out;
    for (std::uint64_t i = 0; i < count; ++i) {
      out.push_back(count == 1 ? start
                               : start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    return out;
  }
  std::vector<double> out;
  for (const auto& v : values) out.push_back(parse_double(key, v));
  return out;
}

/// Typed experiment configuration; model parameters stay as grids keyed by
/// name and are interpreted by each runner.
struct ExperimentConfig {
  std::string experiment;
  std::optional<std::uint64_t> seed;
  std::size_t n = 0;  // 0: experiment default
  std::size_t nw = 0; // 0: Nw = N
  EstimationMode mode;
  std::size_t bootstrap = 0;
  double level = 0.95;
  std::string out;
  std::string format = "csv";
  bool timing = true;
  unsigned threads = 0;
  std::map<std::string, std::vector<double>> grids;   // numeric model parameters
  std::map<std::string, std::string> words;           // textual model parameters
  std::map<std::string, std::vector<std::string>> lists; // raw values, for list-typed keys

  std::uint64_t require_seed() const {
    if (!seed) config_error("seed is mandatory (config key 'seed' or --seed)");
    return *seed;
  }

  std::vector<double> grid(const std::string& key, std::vector<double> fallback) const {
    const auto it = grids.find(key);
    return it == grids.end() ? fallback : it->second;
  }

  double scalar(const std::string& key, double fallback) const {
    const auto it = grids.find(key);
    if (it == grids.end()) return fallback;
    if (it->second.size() != 1) config_error(key + " must be a single value here");
    return it->second.front();
  }

  std::string word(const std::string& key, const std::string& fallback) const {
    const auto it = words.find(key);
    return it == words.end() ? fallback : it->second;
  }
};

inline const std::set<std::string>& experiment_names() {
  static const std::set<std::string> names{"example1", "example2", "example3", "stiffness", "custom"};
  return names;
}

/// Numeric model parameters accepted per experiment.
inline std::set<std::string> numeric_keys(const std::string& experiment) {
  if (experiment == "example1") return {"alpha", "p", "b", "msd_replicates", "msd_sizes"};
  if (experiment == "example2") return {"mu1", "mu2", "sigma1sq", "sigma2sq"};
  if (experiment == "example3") return {"mu1"};
  if (experiment == "stiffness") return {"lambda_mu", "lambda_k"};
  if (experiment == "custom") return {"coefficients", "nu"};
  return {};
}

inline std::set<std::string> word_keys(const std::string& experiment) {
  if (experiment == "example1") return {"msd_mode"};
  if (experiment == "stiffness") return {"case"};
  if (experiment == "custom") return {"model"};
  return {};
}

/// Builds the typed config; `experiment` (from the command line) must agree
/// with an `experiment` key when the file has one.
inline ExperimentConfig parse_config(const std::string& experiment, const KeyValues& kv) {
  if (!experiment_names().count(experiment)) config_error("unknown experiment '" + experiment + "'");
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  const auto numeric = numeric_keys(experiment);
  const auto textual = word_keys(experiment);

  auto single = [&](const std::string& key, const std::vector<std::string>& values) {
    if (values.size() != 1) config_error(key + " expects a single value");
    return trim(values.front());
  };

  for (const auto& [raw_key, values] : kv) {
    const std::string key = trim(raw_key);
    if (key == "experiment") {
      if (single(key, values) != experiment) {
        config_error("config file is for experiment '" + single(key, values) + "', not '" + experiment + "'");
      }
    } else if (key == "seed") {
      cfg.seed = parse_u64(key, single(key, values));
    } else if (key == "n") {
      cfg.n = parse_u64(key, single(key, values));
    } else if (key == "nw") {
      cfg.nw = parse_u64(key, single(key, values));
    } else if (key == "mode") {
      cfg.mode = parse_mode(single(key, values));
    } else if (key == "bootstrap") {
      cfg.bootstrap = parse_u64(key, single(key, values));
    } else if (key == "level") {
      cfg.level = parse_double(key, single(key, values));
    } else if (key == "out") {
      cfg.out = single(key, values);
    } else if (key == "format") {
      cfg.format = single(key, values);
    } else if (key == "timing") {
      const auto v = single(key, values);
      if (v != "true" && v != "false") config_error("timing must be true or false");
      cfg.timing = v == "true";
    } else if (key == "threads") {
      cfg.threads = static_cast<unsigned>(parse_u64(key, single(key, values)));
    } else if (numeric.count(key)) {
      cfg.grids[key] = parse_grid(key, values);
      cfg.lists[key] = values;
    } else if (textual.count(key)) {
      cfg.words[key] = single(key, values);
    } else {
      config_error("unknown config key '" + key + "' for experiment " + experiment);
    }
  }
  return cfg;
}

/// Checks shared by every runner once command-line overrides are applied.
inline void validate_common(const ExperimentConfig& cfg) {
  cfg.require_seed();
  if (cfg.n == 1) config_error("n must be >= 2");
  if (cfg.nw == 1) config_error("nw must be >= 2");
  if (cfg.bootstrap != 0 && cfg.bootstrap < 100) config_error("bootstrap needs at least 100 replicates (or 0)");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) config_error("level must lie in (0,1)");
  if (cfg.format != "csv" && cfg.format != "json") config_error("format must be csv or json");
}

} // namespace geosens::experiments

#endif // GEOSENS_EXPERIMENTS_CONFIG_HPP
