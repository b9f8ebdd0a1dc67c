#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsal {

enum class Errc {
  DimensionMismatch,
  NonFinite,
  EmptyFixations,
  OutOfBounds,
  ZeroMass,
  AllFixated,
  EmptyNegatives,
  LengthMismatch,
  UnknownVideo,
  EmptySequence,
  StaleCache,
  ShapeMismatch,
  EmptyDataset,
  TrainingFailed,
  CorruptCheckpoint,
  IoError,
  BadHeader,
  TruncatedData,
  UnsupportedDepth,
  OutOfRange,
  ParseError,
  MissingPrediction,
  MissingInput,
  InconsistentVideos,
  InvalidArgument,
};

// Stable identifier printed after "ERROR " by the CLI.
std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tsal
