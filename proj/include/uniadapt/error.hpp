// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uniadapt {

enum class Errc {
  ZeroNorm,
  InvalidTemperature,
  DegenerateClassCount,
  DimMismatch,
  NotNormalized,
  IsolatedNode,
  InvalidRHS,
  SingularMatrix,
  EmptyClassCache,
  EmptyCache,
  InvalidLabels,
  InvalidConfig,
  FormatError,
  TruncatedFile,
  CannotSeparate,
  IoError,
  InvalidFeature,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroNorm: return "ZeroNorm";
    case Errc::InvalidTemperature: return "InvalidTemperature";
    case Errc::DegenerateClassCount: return "DegenerateClassCount";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::IsolatedNode: return "IsolatedNode";
    case Errc::InvalidRHS: return "InvalidRHS";
    case Errc::SingularMatrix: return "SingularMatrix";
    case Errc::EmptyClassCache: return "EmptyClassCache";
    case Errc::EmptyCache: return "EmptyCache";
    case Errc::InvalidLabels: return "InvalidLabels";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::FormatError: return "FormatError";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::CannotSeparate: return "CannotSeparate";
    case Errc::IoError: return "IoError";
    case Errc::InvalidFeature: return "InvalidFeature";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace uniadapt
