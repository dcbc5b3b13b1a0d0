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

#ifndef GEOSENS_ERROR_HPP
#define GEOSENS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace geosens {

enum class ErrorCode {
  InvalidPoint,
  NumericalFailure,
  AntipodalPoints,
  IncompatibleIsometry,
  InvalidSpec,
  DegenerateInput,
  InvalidNu,
  SamplingStalled,
  TooFewSamples,
  DegenerateBalls,
  DegenerateDenominator,
  TooFewValidReplicates,
  GridTooLarge,
  TooLarge,
  ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidPoint: return "InvalidPoint";
  case ErrorCode::NumericalFailure: return "NumericalFailure";
  case ErrorCode::AntipodalPoints: return "AntipodalPoints";
  case ErrorCode::IncompatibleIsometry: return "IncompatibleIsometry";
  case ErrorCode::InvalidSpec: return "InvalidSpec";
  case ErrorCode::DegenerateInput: return "DegenerateInput";
  case ErrorCode::InvalidNu: return "InvalidNu";
  case ErrorCode::SamplingStalled: return "SamplingStalled";
  case ErrorCode::TooFewSamples: return "TooFewSamples";
  case ErrorCode::DegenerateBalls: return "DegenerateBalls";
  case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
  case ErrorCode::TooFewValidReplicates: return "TooFewValidReplicates";
  case ErrorCode::GridTooLarge: return "GridTooLarge";
  case ErrorCode::TooLarge: return "TooLarge";
  case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above, so
/// callers (notably the CLI) can map it to an exit status without parsing text.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

} // namespace geosens

#endif // GEOSENS_ERROR_HPP
