#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace spectral_slam {

enum class ErrorCode {
  InvalidConfig,
  VelocityTooSmall,
  InsufficientData,
  AllColumnsDropped,
  DegenerateInput,
  SingularLandmarks,
  IllConditionedAnchors,
  TooFewAnchors,
  DimensionMismatch,
  TooFewPoints,
  NoNullspace,
  NoConstantDirection,
  DegenerateAxis,
  NegativeScale,
  SingularConfiguration,
  RankDeficientFeatures,
  SingularInnovationCovariance,
  NonFiniteCost,
  LengthMismatch,
  ParseError,
  SchemaError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Input errors map to CLI exit code 2, everything else to 3.
bool is_input_error(ErrorCode code);

class SlamError : public std::runtime_error {
 public:
  SlamError(ErrorCode code, const std::string& message, std::optional<int> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::optional<int>& line() const noexcept { return line_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  // Copy of this error attributed to a pipeline stage.
  SlamError with_stage(std::string stage) const;

 private:
  ErrorCode code_;
  std::optional<int> line_;
  std::string detail_;
  std::string stage_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace spectral_slam
