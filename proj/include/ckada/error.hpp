#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ckada {

// Every failure the library reports. The numeric value of each group is the
// process exit code used by the command-line tool (see README "Exit codes").
enum class ErrorCode {
    invalid_argument,      // 2
    io,                    // 3
    parse,                 // 4
    ragged_rows,           // 4
    dimension_mismatch,    // 5
    shape_mismatch,        // 5
    length_mismatch,       // 5
    sample_count_mismatch, // 6
    empty_class,           // 6
    insufficient_class,    // 6
    class_too_small,       // 6
    too_few_samples,       // 6
    zero_sample,           // 7
    empty_cloud,           // 7
    infeasible_separation, // 7
    invalid_weights,       // 8
    not_positive_definite, // 9
    numerical_breakdown,   // 9
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::io: return "IOError";
    case ErrorCode::parse: return "ParseError";
    case ErrorCode::ragged_rows: return "RaggedRows";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::length_mismatch: return "LengthMismatch";
    case ErrorCode::sample_count_mismatch: return "SampleCountMismatch";
    case ErrorCode::empty_class: return "EmptyClass";
    case ErrorCode::insufficient_class: return "InsufficientClass";
    case ErrorCode::class_too_small: return "ClassTooSmall";
    case ErrorCode::too_few_samples: return "TooFewSamples";
    case ErrorCode::zero_sample: return "ZeroSample";
    case ErrorCode::empty_cloud: return "EmptyCloud";
    case ErrorCode::infeasible_separation: return "InfeasibleSeparation";
    case ErrorCode::invalid_weights: return "InvalidWeights";
    case ErrorCode::not_positive_definite: return "NotPositiveDefinite";
    case ErrorCode::numerical_breakdown: return "NumericalBreakdown";
    }
    return "Unknown";
}

inline int exit_code(ErrorCode code)
{
    switch (code) {
    case ErrorCode::invalid_argument: return 2;
    case ErrorCode::io: return 3;
    case ErrorCode::parse:
    case ErrorCode::ragged_rows: return 4;
    case ErrorCode::dimension_mismatch:
    case ErrorCode::shape_mismatch:
    case ErrorCode::length_mismatch: return 5;
    case ErrorCode::sample_count_mismatch:
    case ErrorCode::empty_class:
    case ErrorCode::insufficient_class:
    case ErrorCode::class_too_small:
    case ErrorCode::too_few_samples: return 6;
    case ErrorCode::zero_sample:
    case ErrorCode::empty_cloud:
    case ErrorCode::infeasible_separation: return 7;
    case ErrorCode::invalid_weights: return 8;
    case ErrorCode::not_positive_definite:
    case ErrorCode::numerical_breakdown: return 9;
    }
    return 1;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what)
{
    if (!cond)
        fail(code, what);
}

} // namespace ckada
