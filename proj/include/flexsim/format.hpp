#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flexsim/errors.hpp"

namespace flexsim {

/// Bit allocation of a flexN+M tensor: an N-bit two's-complement integer
/// mantissa per element (sign included) and one M-bit exponent shared by the
/// whole tensor.
struct FlexFormat {
    int mantissa_bits;  // N
    int exponent_bits;  // M

    FlexFormat(int n, int m);

    /// Largest storable mantissa, 2^(N-1)-1. Also the saturation threshold:
    /// a rounded magnitude at or above this value counts as overflow.
    std::int64_t mantissa_max() const { return (std::int64_t{1} << (mantissa_bits - 1)) - 1; }
    /// Most negative storable mantissa, -2^(N-1). Quantization never produces
    /// it (saturation stops one step short) but storage permits it.
    std::int64_t mantissa_min() const { return -(std::int64_t{1} << (mantissa_bits - 1)); }
    std::int64_t overflow_threshold() const { return mantissa_max(); }

    /// Signed exponent window implied by M bits: [-2^(M-1), 2^(M-1)-1].
    int exponent_min() const { return -(1 << (exponent_bits - 1)); }
    int exponent_max() const { return (1 << (exponent_bits - 1)) - 1; }
    bool exponent_in_window(int e) const { return e >= exponent_min() && e <= exponent_max(); }

    std::string str() const;  // "flex16+5"

    friend bool operator==(const FlexFormat&, const FlexFormat&) = default;
};

/// Parses "flexN+M" (case-insensitive). Throws FormatError on anything else.
FlexFormat parse_format(std::string_view s);

/// Shared exponent e and its scale factor kappa = 2^-e. Both are stored; the
/// equality is an invariant (see consistent()).
struct ExponentState {
    int exponent = 0;
    double scale = 1.0;

    /// Builds the state for a raw exponent with no window check. Use
    /// scale_from_exponent for the window-checked variant.
    static ExponentState from_exponent(int e);

    friend bool operator==(const ExponentState&, const ExponentState&) = default;
};

inline bool consistent(const ExponentState& st) {
    return st.scale > 0.0 && st.scale == ExponentState::from_exponent(st.exponent).scale;
}

/// Window-checked constructor: throws ExponentOutOfRange if e does not fit in
/// the format's M-bit window.
ExponentState scale_from_exponent(int e, const FlexFormat& fmt);

/// Clamps e into the format's window. Returns the clamped value.
int clamp_exponent(int e, const FlexFormat& fmt);

enum class RoundingMode {
    NearestEven,  // default: round half to even
    Truncate,     // toward zero
    Stochastic,   // probabilistic, needs a seed
};

/// Rounding policy for quantization. Stochastic mode carries its own seeded
/// generator; the other modes are stateless.
class Rounding {
  public:
    explicit Rounding(RoundingMode mode = RoundingMode::NearestEven, std::uint64_t seed = 0)
        : mode_(mode), rng_(seed) {}

    RoundingMode mode() const { return mode_; }

    /// Rounds to an integral value under the active mode. Non-finite inputs
    /// pass through unchanged.
    double apply(double v);

  private:
    RoundingMode mode_;
    std::mt19937_64 rng_;
};

struct QuantizedValue {
    std::int32_t mantissa;
    bool overflowed;
};

/// mantissa = round(x / kappa), saturated into [-(2^(N-1)-1), 2^(N-1)-1].
/// overflowed is true iff the rounded magnitude reached 2^(N-1)-1 before
/// saturation; the max value itself counts as overflow.
QuantizedValue quantize_value(double x, const ExponentState& st, const FlexFormat& fmt,
                              Rounding& rounding);
QuantizedValue quantize_value(double x, const ExponentState& st, const FlexFormat& fmt);

struct QuantizedTensor {
    std::vector<std::int32_t> mantissas;
    std::int64_t gamma;  // max |mantissa| after saturation
    bool overflowed;
};

QuantizedTensor quantize_tensor(std::span<const double> xs, const ExponentState& st,
                                const FlexFormat& fmt, Rounding& rounding);
QuantizedTensor quantize_tensor(std::span<const double> xs, const ExponentState& st,
                                const FlexFormat& fmt);

/// Exact per-element mantissa * kappa. Power-of-two scaling is exact in
/// binary floating point for every storable mantissa.
std::vector<double> dequantize_tensor(std::span<const std::int32_t> mantissas,
                                      const ExponentState& st);

struct ValueRange {
    double min_real;  // -2^(N-1) * kappa (full storage range)
    double max_real;  // (2^(N-1)-1) * kappa
    double epsilon;   // kappa, the quantization step
};

ValueRange representable_range(const ExponentState& st, const FlexFormat& fmt);

/// ceil(log2(v)) for integer v >= 1.
int ceil_log2(std::int64_t v);

/// ceil(log2(x)) for finite x > 0, computed by exponent extraction so exact
/// powers of two land on the boundary (ceil_log2(2.0) == 1).
int ceil_log2(double x);

}  // namespace flexsim
