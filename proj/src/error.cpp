#include "tgiqa/error.hpp"

namespace tgiqa {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::BadMagic: return "BadMagic";
        case Errc::UnsupportedDtype: return "UnsupportedDtype";
        case Errc::UnsupportedOrder: return "UnsupportedOrder";
        case Errc::UnsupportedShape: return "UnsupportedShape";
        case Errc::TruncatedPayload: return "TruncatedPayload";
        case Errc::NonFinite: return "NonFinite";
        case Errc::AlignmentError: return "AlignmentError";
        case Errc::DuplicateKey: return "DuplicateKey";
        case Errc::SeverityMismatch: return "SeverityMismatch";
        case Errc::MalformedLine: return "MalformedLine";
        case Errc::MalformedRow: return "MalformedRow";
        case Errc::BadFormat: return "BadFormat";
        case Errc::UnsupportedMaxval: return "UnsupportedMaxval";
        case Errc::TruncatedPixels: return "TruncatedPixels";
        case Errc::UnknownKind: return "UnknownKind";
        case Errc::NonCleanInput: return "NonCleanInput";
        case Errc::MissingImage: return "MissingImage";
        case Errc::IoError: return "IoError";
        case Errc::ZeroNormRow: return "ZeroNormRow";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::NotNormalized: return "NotNormalized";
        case Errc::EmptyJoin: return "EmptyJoin";
        case Errc::DegenerateInput: return "DegenerateInput";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::TooFewGroups: return "TooFewGroups";
        case Errc::SingleClass: return "SingleClass";
        case Errc::NoConvergence: return "NoConvergence";
        case Errc::AllLabelsSkipped: return "AllLabelsSkipped";
        case Errc::AllIdsSkipped: return "AllIdsSkipped";
        case Errc::UnknownNode: return "UnknownNode";
        case Errc::CycleDetected: return "CycleDetected";
        case Errc::NoValidStrata: return "NoValidStrata";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace tgiqa
