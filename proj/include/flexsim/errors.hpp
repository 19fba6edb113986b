#pragma once

#include <stdexcept>
#include <string>

namespace flexsim {

/// Base class for all library errors.
struct FlexError : std::runtime_error {
    explicit FlexError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed format string or invalid (N, M) bit allocation.
struct FormatError : FlexError {
    using FlexError::FlexError;
};

/// Requested exponent falls outside the M-bit window.
struct ExponentOutOfRange : FlexError {
    using FlexError::FlexError;
};

struct EmptyTensor : FlexError {
    using FlexError::FlexError;
};

struct ShapeMismatch : FlexError {
    using FlexError::FlexError;
};

/// A kernel asked to write output through a slot whose scale was never initialized.
struct UninitializedSlot : FlexError {
    using FlexError::FlexError;
};

/// predict_chi called on an empty statistics window.
struct EmptyHistory : FlexError {
    using FlexError::FlexError;
};

/// fixed_point_mul_check called with an output exponent that is not the sum of the inputs'.
struct ExponentMismatch : FlexError {
    using FlexError::FlexError;
};

struct InvalidSpec : FlexError {
    using FlexError::FlexError;
};

struct IoError : FlexError {
    using FlexError::FlexError;
};

}  // namespace flexsim
