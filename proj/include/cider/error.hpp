#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cider {

enum class ErrorKind {
    MalformedHeader,
    UnsupportedEncoding,
    TruncatedData,
    IoFailure,
    EmptyClip,
    LengthMismatch,
    ShapeMismatch,
    DegenerateBatch,
    NonScalarLoss,
    InvalidConfig,
    ShapeTooSmall,
    NoPositives,
    NoNegatives,
    EmptyList,
    TooFewRuns,
    EmptyChunks,
    SingleClass,
    InvalidCounts,
    MissingFile,
    UnknownStratum,
    LabelStratumConflict,
    DuplicateRow,
    EmptyDataset,
    UnknownTask,
    DimensionMismatch,
    InvalidArgument,
    LeakageDetected,
};

std::string_view to_string(ErrorKind kind);

/// All library failures are reported as cider::Error carrying a kind tag so
/// callers (and tests) can dispatch on the failure class.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace cider
