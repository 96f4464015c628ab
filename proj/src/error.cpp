#include "cider/error.hpp"

namespace cider {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedHeader: return "MalformedHeader";
        case ErrorKind::UnsupportedEncoding: return "UnsupportedEncoding";
        case ErrorKind::TruncatedData: return "TruncatedData";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::EmptyClip: return "EmptyClip";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::DegenerateBatch: return "DegenerateBatch";
        case ErrorKind::NonScalarLoss: return "NonScalarLoss";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::ShapeTooSmall: return "ShapeTooSmall";
        case ErrorKind::NoPositives: return "NoPositives";
        case ErrorKind::NoNegatives: return "NoNegatives";
        case ErrorKind::EmptyList: return "EmptyList";
        case ErrorKind::TooFewRuns: return "TooFewRuns";
        case ErrorKind::EmptyChunks: return "EmptyChunks";
        case ErrorKind::SingleClass: return "SingleClass";
        case ErrorKind::InvalidCounts: return "InvalidCounts";
        case ErrorKind::MissingFile: return "MissingFile";
        case ErrorKind::UnknownStratum: return "UnknownStratum";
        case ErrorKind::LabelStratumConflict: return "LabelStratumConflict";
        case ErrorKind::DuplicateRow: return "DuplicateRow";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::UnknownTask: return "UnknownTask";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::LeakageDetected: return "LeakageDetected";
    }
    return "Unknown";
}

}  // namespace cider
