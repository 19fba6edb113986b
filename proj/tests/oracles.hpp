// Test-only reference implementations, kept independent of the library's
// computation paths. The rational scale-adjustment oracle reproduces the
// pseudocode on exact arithmetic; the im2col oracle recomputes convolutions
// through patch-matrix multiplication.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace oracles {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline Rational pow2(int k) {
    Rational r = 1;
    for (int i = 0; i < std::abs(k); ++i) r *= 2;
    return k >= 0 ? r : Rational(1) / r;
}

// exact ceil(log2(x)) for rational x > 0
inline int ceil_log2(Rational x) {
    if (x <= 0) throw std::invalid_argument("ceil_log2: x must be positive");
    int c = 0;
    while (x > 1) {
        x /= 2;
        ++c;
    }
    while (x <= Rational(1, 2)) {
        x *= 2;
        --c;
    }
    return c;
}

// exact sqrt for rationals that are perfect squares (covers the zero-variance
// windows the hand-derived cases produce)
inline Rational exact_sqrt(const Rational& x) {
    if (x == 0) return 0;
    const BigInt num = boost::multiprecision::numerator(x);
    const BigInt den = boost::multiprecision::denominator(x);
    const BigInt rn = boost::multiprecision::sqrt(num);
    const BigInt rd = boost::multiprecision::sqrt(den);
    if (rn * rn != num || rd * rd != den)
        throw std::domain_error("exact_sqrt: not a perfect square");
    return Rational(rn, rd);
}

struct RationalSlot {
    std::vector<Rational> window;
    Rational kappa = 1;
    long long overflows = 0;
    Rational last_chi = 0;
};

// One scale-adjustment step on exact arithmetic. n_bits is the mantissa width.
inline Rational rational_adjust(RationalSlot& slot, std::int64_t gamma, int n_bits,
                                int window_len, const Rational& alpha, const Rational& beta,
                                const Rational& gamma_c) {
    const std::int64_t threshold = (std::int64_t{1} << (n_bits - 1)) - 1;
    std::int64_t g = gamma;
    if (g >= threshold) {
        slot.window.clear();
        ++slot.overflows;
        g *= 2;
    }
    slot.window.push_back(Rational(g) * slot.kappa);
    while (static_cast<int>(slot.window.size()) > window_len)
        slot.window.erase(slot.window.begin());

    Rational maxv = slot.window.front();
    Rational mean = 0;
    for (const auto& v : slot.window) {
        if (v > maxv) maxv = v;
        mean += v;
    }
    mean /= static_cast<int>(slot.window.size());
    Rational var = 0;
    for (const auto& v : slot.window) var += (v - mean) * (v - mean);
    var /= static_cast<int>(slot.window.size());

    const Rational chi = alpha * (maxv + beta * exact_sqrt(var) + gamma_c * slot.kappa);
    slot.last_chi = chi;
    slot.kappa = pow2(ceil_log2(chi) - n_bits + 1);
    return slot.kappa;
}

// ideal exponent for a tensor whose max-abs value is v: the scale the
// underutilization jump aims at, e = (N-2) - ceil(log2 v), on exact arithmetic
inline int ideal_exponent(double v, int n_bits) {
    return (n_bits - 2) - ceil_log2(Rational(v));
}

// im2col + matmul convolution reference (valid-with-padding, NCHW)
struct ConvShape {
    std::int64_t batch, channels, height, width;
    std::int64_t filters, kh, kw, stride, pad;
    std::int64_t out_h() const { return (height + 2 * pad - kh) / stride + 1; }
    std::int64_t out_w() const { return (width + 2 * pad - kw) / stride + 1; }
};

inline std::vector<double> im2col_conv(const std::vector<double>& x, const std::vector<double>& w,
                                       const ConvShape& s) {
    const std::int64_t oh = s.out_h(), ow = s.out_w();
    const std::int64_t patch = s.channels * s.kh * s.kw;
    // patches: [batch*oh*ow, patch]
    std::vector<double> cols(static_cast<std::size_t>(s.batch * oh * ow * patch), 0.0);
    for (std::int64_t b = 0; b < s.batch; ++b)
        for (std::int64_t i = 0; i < oh; ++i)
            for (std::int64_t j = 0; j < ow; ++j) {
                const std::int64_t row = (b * oh + i) * ow + j;
                std::int64_t col = 0;
                for (std::int64_t c = 0; c < s.channels; ++c)
                    for (std::int64_t r = 0; r < s.kh; ++r)
                        for (std::int64_t q = 0; q < s.kw; ++q, ++col) {
                            const std::int64_t hi = i * s.stride - s.pad + r;
                            const std::int64_t wi = j * s.stride - s.pad + q;
                            if (hi < 0 || hi >= s.height || wi < 0 || wi >= s.width) continue;
                            cols[static_cast<std::size_t>(row * patch + col)] =
                                x[static_cast<std::size_t>(
                                    ((b * s.channels + c) * s.height + hi) * s.width + wi)];
                        }
            }
    // out[b,o,i,j] = cols[row] . w[o]
    std::vector<double> y(static_cast<std::size_t>(s.batch * s.filters * oh * ow), 0.0);
    for (std::int64_t b = 0; b < s.batch; ++b)
        for (std::int64_t o = 0; o < s.filters; ++o)
            for (std::int64_t i = 0; i < oh; ++i)
                for (std::int64_t j = 0; j < ow; ++j) {
                    const std::int64_t row = (b * oh + i) * ow + j;
                    double acc = 0.0;
                    for (std::int64_t p = 0; p < patch; ++p)
                        acc += cols[static_cast<std::size_t>(row * patch + p)] *
                               w[static_cast<std::size_t>(o * patch + p)];
                    y[static_cast<std::size_t>(((b * s.filters + o) * oh + i) * ow + j)] = acc;
                }
    return y;
}

}  // namespace oracles
