#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace icnr {

enum class ErrorKind {
  Io,
  UnsupportedDatatype,
  CorruptHeader,
  DimensionMismatch,
  EmptyMask,
  RankDeficient,
  LengthMismatch,
  KMismatch,
  ShapeMismatch,
  NonFiniteLoss,
  NonFiniteInput,
  CorruptStream,
  ChecksumMismatch,
  VersionUnsupported,
  SingularDesign,
  EmptyRegion,
  TooFewSamples,
  TooSmall,
  Config,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorKind::CorruptHeader: return "CorruptHeader";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::KMismatch: return "KMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::CorruptStream: return "CorruptStream";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::VersionUnsupported: return "VersionUnsupported";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::TooSmall: return "TooSmall";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace icnr
