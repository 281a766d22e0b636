#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sb {

enum class Errc {
  FileNotFound,
  UnsupportedFormat,
  CorruptStream,
  IoFailure,
  WrongColorspace,
  ZeroDimension,
  ShapeMismatch,
  TooSmall,
  OutOfRange,
  EvenRepetition,
  LengthMismatch,
  PayloadTooLarge,
  BandOutOfRange,
  CapacityExceeded,
  InvalidConfig,
  EmptyGrid,
  EmptyCoverSet,
  NonPositiveRadius,
  DegenerateSize,
  UnknownPreset,
  WeightDimensionMismatch,
  EmptyCorpus,
  EmptyClass,
  DegenerateScatter,
  SchemaMismatch,
  TooFewImages,
  AxisTooSmall,
};

inline std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptStream: return "CorruptStream";
    case Errc::IoFailure: return "IoFailure";
    case Errc::WrongColorspace: return "WrongColorspace";
    case Errc::ZeroDimension: return "ZeroDimension";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::TooSmall: return "TooSmall";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::EvenRepetition: return "EvenRepetition";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::PayloadTooLarge: return "PayloadTooLarge";
    case Errc::BandOutOfRange: return "BandOutOfRange";
    case Errc::CapacityExceeded: return "CapacityExceeded";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EmptyGrid: return "EmptyGrid";
    case Errc::EmptyCoverSet: return "EmptyCoverSet";
    case Errc::NonPositiveRadius: return "NonPositiveRadius";
    case Errc::DegenerateSize: return "DegenerateSize";
    case Errc::UnknownPreset: return "UnknownPreset";
    case Errc::WeightDimensionMismatch: return "WeightDimensionMismatch";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::DegenerateScatter: return "DegenerateScatter";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::TooFewImages: return "TooFewImages";
    case Errc::AxisTooSmall: return "AxisTooSmall";
  }
  return "Unknown";
}

// Every toolkit failure carries a machine-readable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  // Errors that stem from a bad request rather than from processing.
  bool is_config_error() const noexcept {
    switch (code_) {
      case Errc::InvalidConfig:
      case Errc::UnknownPreset:
      case Errc::EmptyGrid:
      case Errc::EvenRepetition:
      case Errc::BandOutOfRange:
      case Errc::AxisTooSmall:
      case Errc::FileNotFound:
        return true;
      default:
        return false;
    }
  }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace sb
