#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace alc {

enum class Errc {
  // tensor-io
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  DimMismatch,
  IoFailure,
  ManifestParse,
  // core / pool / acquisition
  OutOfBounds,
  EmptySegment,
  EmptySubset,
  DegenerateVector,
  MissingProbMap,
  IgnoreLabel,
  EmptyPool,
  InvalidArgument,
  // cost model
  InvalidL,
  InvalidP,
  // predictor
  NoLabeledPixels,
  CommandFailed,
  MissingProbs,
  ValidationFailed,
  // correction loop
  MissingGroundTruth,
  StaleAnswer,
  UnknownQuery,
  InvalidLabel,
  OutstandingQueries,
  SessionFinished,
  InterruptedResumable,
  // metrics
  ImageMismatch,
  MissingOutputs,
};

constexpr std::string_view errc_name(Errc e) noexcept {
  switch (e) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::IoFailure: return "IoFailure";
    case Errc::ManifestParse: return "ManifestParse";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::EmptySegment: return "EmptySegment";
    case Errc::EmptySubset: return "EmptySubset";
    case Errc::DegenerateVector: return "DegenerateVector";
    case Errc::MissingProbMap: return "MissingProbMap";
    case Errc::IgnoreLabel: return "IgnoreLabel";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidL: return "InvalidL";
    case Errc::InvalidP: return "InvalidP";
    case Errc::NoLabeledPixels: return "NoLabeledPixels";
    case Errc::CommandFailed: return "CommandFailed";
    case Errc::MissingProbs: return "MissingProbs";
    case Errc::ValidationFailed: return "ValidationFailed";
    case Errc::MissingGroundTruth: return "MissingGroundTruth";
    case Errc::StaleAnswer: return "StaleAnswer";
    case Errc::UnknownQuery: return "UnknownQuery";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::OutstandingQueries: return "OutstandingQueries";
    case Errc::SessionFinished: return "SessionFinished";
    case Errc::InterruptedResumable: return "InterruptedResumable";
    case Errc::ImageMismatch: return "ImageMismatch";
    case Errc::MissingOutputs: return "MissingOutputs";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an `alc::Error` carrying a
/// machine-checkable code; the message is for humans only.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace alc
