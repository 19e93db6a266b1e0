#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace dbhcam {

/// Stable machine-readable failure codes. Each failure raised by the library
/// carries exactly one of these; the names are part of the wire protocol.
enum class ErrorCode {
  DomainError,
  EmptyMask,
  InconsistentMask,
  NonApproaching,
  AlignFail,
  NoOverlap,
  OutOfTrunk,
  TrunkTooShort,
  FormatError,
  SegmentationEmpty,
  UnknownImage,
  ProviderUnavailable,
  Framing,
  ParameterError,
  ShapeMismatch,
  EmptyEvaluation,
  IncompleteRecord,
  ManifestSchema,
  ProtocolError,
  FrameError,
  UnsupportedType,
  PayloadTooLarge,
  IoError,
};

inline constexpr std::array<std::pair<ErrorCode, std::string_view>, 23> kErrorCodeNames{{
    {ErrorCode::DomainError, "DOMAIN_ERROR"},
    {ErrorCode::EmptyMask, "EMPTY_MASK"},
    {ErrorCode::InconsistentMask, "INCONSISTENT_MASK"},
    {ErrorCode::NonApproaching, "NON_APPROACHING"},
    {ErrorCode::AlignFail, "ALIGN_FAIL"},
    {ErrorCode::NoOverlap, "NO_OVERLAP"},
    {ErrorCode::OutOfTrunk, "OUT_OF_TRUNK"},
    {ErrorCode::TrunkTooShort, "TRUNK_TOO_SHORT"},
    {ErrorCode::FormatError, "FORMAT_ERROR"},
    {ErrorCode::SegmentationEmpty, "SEGMENTATION_EMPTY"},
    {ErrorCode::UnknownImage, "UNKNOWN_IMAGE"},
    {ErrorCode::ProviderUnavailable, "PROVIDER_UNAVAILABLE"},
    {ErrorCode::Framing, "FRAMING"},
    {ErrorCode::ParameterError, "PARAMETER_ERROR"},
    {ErrorCode::ShapeMismatch, "SHAPE_MISMATCH"},
    {ErrorCode::EmptyEvaluation, "EMPTY_EVALUATION"},
    {ErrorCode::IncompleteRecord, "INCOMPLETE_RECORD"},
    {ErrorCode::ManifestSchema, "MANIFEST_SCHEMA"},
    {ErrorCode::ProtocolError, "PROTOCOL_ERROR"},
    {ErrorCode::FrameError, "FRAME_ERROR"},
    {ErrorCode::UnsupportedType, "UNSUPPORTED_TYPE"},
    {ErrorCode::PayloadTooLarge, "PAYLOAD_TOO_LARGE"},
    {ErrorCode::IoError, "IO_ERROR"},
}};

constexpr std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kErrorCodeNames) {
    if (c == code) return name;
  }
  return "UNKNOWN";
}

inline bool parse_error_code(std::string_view name, ErrorCode& out) {
  for (const auto& [c, n] : kErrorCodeNames) {
    if (n == name) {
      out = c;
      return true;
    }
  }
  return false;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return to_string(code_); }

 private:
  ErrorCode code_;
};

}  // namespace dbhcam
