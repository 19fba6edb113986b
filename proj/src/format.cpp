#include "flexsim/format.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>

namespace flexsim {

FlexFormat::FlexFormat(int n, int m) : mantissa_bits(n), exponent_bits(m) {
    if (n < 2 || n > 32)
        throw FormatError("mantissa bits must be in [2, 32], got " + std::to_string(n));
    if (m < 1 || m > 8)
        throw FormatError("exponent bits must be in [1, 8], got " + std::to_string(m));
}

std::string FlexFormat::str() const {
    return "flex" + std::to_string(mantissa_bits) + "+" + std::to_string(exponent_bits);
}

FlexFormat parse_format(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const std::string_view v = lower;
    if (v.size() < 7 || v.substr(0, 4) != "flex")
        throw FormatError("bad format string '" + std::string(s) + "', expected flexN+M");
    const auto plus = v.find('+', 4);
    if (plus == std::string_view::npos)
        throw FormatError("bad format string '" + std::string(s) + "', expected flexN+M");
    int n = 0, m = 0;
    auto [p1, e1] = std::from_chars(v.data() + 4, v.data() + plus, n);
    auto [p2, e2] = std::from_chars(v.data() + plus + 1, v.data() + v.size(), m);
    if (e1 != std::errc{} || e2 != std::errc{} || p1 != v.data() + plus ||
        p2 != v.data() + v.size())
        throw FormatError("bad format string '" + std::string(s) + "', expected flexN+M");
    return FlexFormat(n, m);
}

ExponentState ExponentState::from_exponent(int e) {
    return ExponentState{e, std::ldexp(1.0, -e)};
}

ExponentState scale_from_exponent(int e, const FlexFormat& fmt) {
    if (!fmt.exponent_in_window(e))
        throw ExponentOutOfRange("exponent " + std::to_string(e) + " outside window [" +
                                 std::to_string(fmt.exponent_min()) + ", " +
                                 std::to_string(fmt.exponent_max()) + "] of " + fmt.str());
    return ExponentState::from_exponent(e);
}

int clamp_exponent(int e, const FlexFormat& fmt) {
    return std::clamp(e, fmt.exponent_min(), fmt.exponent_max());
}

double Rounding::apply(double v) {
    if (!std::isfinite(v)) return v;
    switch (mode_) {
        case RoundingMode::Truncate:
            return std::trunc(v);
        case RoundingMode::Stochastic: {
            const double f = std::floor(v);
            const double frac = v - f;
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            return f + (uni(rng_) < frac ? 1.0 : 0.0);
        }
        case RoundingMode::NearestEven:
        default: {
            const double f = std::floor(v);
            const double frac = v - f;
            if (frac > 0.5) return f + 1.0;
            if (frac < 0.5) return f;
            return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;  // tie: pick the even neighbor
        }
    }
}

QuantizedValue quantize_value(double x, const ExponentState& st, const FlexFormat& fmt,
                              Rounding& rounding) {
    const double thr = static_cast<double>(fmt.overflow_threshold());
    if (std::isnan(x)) return {0, false};
    const double r = rounding.apply(x / st.scale);
    if (std::isnan(r)) return {0, false};
    const bool over = std::fabs(r) >= thr;
    const double clamped = std::clamp(r, -thr, thr);
    return {static_cast<std::int32_t>(clamped), over};
}

QuantizedValue quantize_value(double x, const ExponentState& st, const FlexFormat& fmt) {
    Rounding nearest;
    return quantize_value(x, st, fmt, nearest);
}

QuantizedTensor quantize_tensor(std::span<const double> xs, const ExponentState& st,
                                const FlexFormat& fmt, Rounding& rounding) {
    if (xs.empty()) throw EmptyTensor("quantize_tensor: empty input");
    QuantizedTensor out;
    out.mantissas.reserve(xs.size());
    out.gamma = 0;
    out.overflowed = false;
    for (double x : xs) {
        const auto q = quantize_value(x, st, fmt, rounding);
        out.mantissas.push_back(q.mantissa);
        out.overflowed |= q.overflowed;
        const std::int64_t mag = std::abs(static_cast<std::int64_t>(q.mantissa));
        out.gamma = std::max(out.gamma, mag);
    }
    return out;
}

QuantizedTensor quantize_tensor(std::span<const double> xs, const ExponentState& st,
                                const FlexFormat& fmt) {
    Rounding nearest;
    return quantize_tensor(xs, st, fmt, nearest);
}

std::vector<double> dequantize_tensor(std::span<const std::int32_t> mantissas,
                                      const ExponentState& st) {
    std::vector<double> out(mantissas.size());
    for (std::size_t i = 0; i < mantissas.size(); ++i)
        out[i] = static_cast<double>(mantissas[i]) * st.scale;
    return out;
}

ValueRange representable_range(const ExponentState& st, const FlexFormat& fmt) {
    return ValueRange{
        static_cast<double>(fmt.mantissa_min()) * st.scale,
        static_cast<double>(fmt.mantissa_max()) * st.scale,
        st.scale,
    };
}

int ceil_log2(std::int64_t v) {
    // smallest c with 2^c >= v; bit_width(v-1) counts exactly that
    return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(v - 1)));
}

int ceil_log2(double x) {
    int exp = 0;
    const double m = std::frexp(x, &exp);  // x = m * 2^exp, m in [0.5, 1)
    return m == 0.5 ? exp - 1 : exp;
}

}  // namespace flexsim
