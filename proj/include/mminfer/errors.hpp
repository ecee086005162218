#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mminfer {

enum class ErrorCode {
    InvalidInput,
    NoFiniteEvaluation,
    DegenerateDesign,
    SingularInformation,
    NonconvergedFit,
    AllCandidatesFailed,
    NonPositiveGamma,
    InsufficientReplication,
    TooManyFailures,
    InsufficientSuccesses,
    MissingColumn,
    ParseError,
    EmptyAfterFiltering,
    Usage,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (the CLI,
// the benchmark engine) can map it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace mminfer
