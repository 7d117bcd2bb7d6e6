#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tgiqa {

enum class Errc {
    BadMagic,
    UnsupportedDtype,
    UnsupportedOrder,
    UnsupportedShape,
    TruncatedPayload,
    NonFinite,
    AlignmentError,
    DuplicateKey,
    SeverityMismatch,
    MalformedLine,
    MalformedRow,
    BadFormat,
    UnsupportedMaxval,
    TruncatedPixels,
    UnknownKind,
    NonCleanInput,
    MissingImage,
    IoError,
    ZeroNormRow,
    DimensionMismatch,
    NotNormalized,
    EmptyJoin,
    DegenerateInput,
    EmptyInput,
    TooFewGroups,
    SingleClass,
    NoConvergence,
    AllLabelsSkipped,
    AllIdsSkipped,
    UnknownNode,
    CycleDetected,
    NoValidStrata,
    InvalidArgument,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the toolkit carries one of the codes above so
/// callers (and the CLI exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace tgiqa
