#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace volseg {

enum class ErrorKind {
  kInvalidArgument,
  kEmptyMask,
  kGeometryMismatch,
  kBadMagic,
  kBadHeader,
  kUnsupportedDatatype,
  kTruncatedData,
  kIo,
  kSchema,
  kDuplicateCaseId,
  kMissingFile,
  kMissingPrediction,
  kDegenerateX,
  kTooFewPoints,
  kShapeMismatch,
  kNonFiniteLoss,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kEmptyMask: return "EmptyMask";
    case ErrorKind::kGeometryMismatch: return "GeometryMismatch";
    case ErrorKind::kBadMagic: return "BadMagic";
    case ErrorKind::kBadHeader: return "BadHeader";
    case ErrorKind::kUnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorKind::kTruncatedData: return "TruncatedData";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kSchema: return "SchemaError";
    case ErrorKind::kDuplicateCaseId: return "DuplicateCaseId";
    case ErrorKind::kMissingFile: return "MissingFile";
    case ErrorKind::kMissingPrediction: return "MissingPrediction";
    case ErrorKind::kDegenerateX: return "DegenerateX";
    case ErrorKind::kTooFewPoints: return "TooFewPoints";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
  }
  return "Unknown";
}

/// Base of every error thrown by the library. what() is "<Kind>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + detail),
        kind_(kind),
        detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

#define VOLSEG_DEFINE_ERROR(Name, Kind)                         \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& detail) : Error(Kind, detail) {} \
  }

VOLSEG_DEFINE_ERROR(InvalidArgument, ErrorKind::kInvalidArgument);
VOLSEG_DEFINE_ERROR(EmptyMask, ErrorKind::kEmptyMask);
VOLSEG_DEFINE_ERROR(GeometryMismatch, ErrorKind::kGeometryMismatch);
VOLSEG_DEFINE_ERROR(BadMagic, ErrorKind::kBadMagic);
VOLSEG_DEFINE_ERROR(BadHeader, ErrorKind::kBadHeader);
VOLSEG_DEFINE_ERROR(UnsupportedDatatype, ErrorKind::kUnsupportedDatatype);
VOLSEG_DEFINE_ERROR(TruncatedData, ErrorKind::kTruncatedData);
VOLSEG_DEFINE_ERROR(IoError, ErrorKind::kIo);
VOLSEG_DEFINE_ERROR(SchemaError, ErrorKind::kSchema);
VOLSEG_DEFINE_ERROR(DuplicateCaseId, ErrorKind::kDuplicateCaseId);
VOLSEG_DEFINE_ERROR(MissingFile, ErrorKind::kMissingFile);
VOLSEG_DEFINE_ERROR(MissingPrediction, ErrorKind::kMissingPrediction);
VOLSEG_DEFINE_ERROR(DegenerateX, ErrorKind::kDegenerateX);
VOLSEG_DEFINE_ERROR(TooFewPoints, ErrorKind::kTooFewPoints);
VOLSEG_DEFINE_ERROR(ShapeMismatch, ErrorKind::kShapeMismatch);
VOLSEG_DEFINE_ERROR(NonFiniteLoss, ErrorKind::kNonFiniteLoss);

#undef VOLSEG_DEFINE_ERROR

}  // namespace volseg
