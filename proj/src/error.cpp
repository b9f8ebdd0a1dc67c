#include "tsal/error.hpp"

namespace tsal {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::EmptyFixations: return "EmptyFixations";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::ZeroMass: return "ZeroMass";
    case Errc::AllFixated: return "AllFixated";
    case Errc::EmptyNegatives: return "EmptyNegatives";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownVideo: return "UnknownVideo";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::StaleCache: return "StaleCache";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::TrainingFailed: return "TrainingFailed";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::IoError: return "IoError";
    case Errc::BadHeader: return "BadHeader";
    case Errc::TruncatedData: return "TruncatedData";
    case Errc::UnsupportedDepth: return "UnsupportedDepth";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::ParseError: return "ParseError";
    case Errc::MissingPrediction: return "MissingPrediction";
    case Errc::MissingInput: return "MissingInput";
    case Errc::InconsistentVideos: return "InconsistentVideos";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace tsal
