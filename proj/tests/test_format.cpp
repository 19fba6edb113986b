#include <doctest.h>

#include <cmath>
#include <random>

#include "flexsim/format.hpp"

using namespace flexsim;

namespace {
const FlexFormat kF16{16, 5};
}

TEST_CASE("format string parsing") {
    CHECK(parse_format("flex16+5") == kF16);
    CHECK(parse_format("FLEX16+5") == kF16);
    CHECK(parse_format("Flex8+3") == FlexFormat{8, 3});
    CHECK(parse_format("flex16+5").str() == "flex16+5");
    CHECK_THROWS_AS(parse_format("flex16+9x"), FormatError);
    CHECK_THROWS_AS(parse_format("flex16"), FormatError);
    CHECK_THROWS_AS(parse_format("16+5"), FormatError);
    CHECK_THROWS_AS(parse_format("reference"), FormatError);
    CHECK_THROWS_AS(parse_format("flex+5"), FormatError);
    // bit-allocation bounds
    CHECK_THROWS_AS(parse_format("flex1+5"), FormatError);
    CHECK_THROWS_AS(parse_format("flex33+5"), FormatError);
    CHECK_THROWS_AS(parse_format("flex16+0"), FormatError);
    CHECK_THROWS_AS(parse_format("flex16+9"), FormatError);
    CHECK_NOTHROW(parse_format("flex2+1"));
    CHECK_NOTHROW(parse_format("flex32+8"));
}

TEST_CASE("format constants") {
    CHECK(kF16.mantissa_max() == 32767);
    CHECK(kF16.mantissa_min() == -32768);
    CHECK(kF16.overflow_threshold() == 32767);
    CHECK(kF16.exponent_min() == -16);
    CHECK(kF16.exponent_max() == 15);
}

TEST_CASE("scale_from_exponent") {
    CHECK(scale_from_exponent(0, kF16).scale == 1.0);
    CHECK(scale_from_exponent(12, kF16).scale == 0.000244140625);
    CHECK(scale_from_exponent(-6, kF16).scale == 64.0);
    CHECK(scale_from_exponent(15, kF16).scale == std::ldexp(1.0, -15));
    CHECK(scale_from_exponent(-16, kF16).scale == 65536.0);
    CHECK_THROWS_AS(scale_from_exponent(16, kF16), ExponentOutOfRange);
    CHECK_THROWS_AS(scale_from_exponent(-17, kF16), ExponentOutOfRange);
    CHECK(consistent(scale_from_exponent(12, kF16)));
}

TEST_CASE("quantize_value examples") {
    const auto e12 = ExponentState::from_exponent(12);
    const auto e13 = ExponentState::from_exponent(13);

    auto q = quantize_value(0.0, e12, kF16);
    CHECK(q.mantissa == 0);
    CHECK(!q.overflowed);

    q = quantize_value(1.0, e12, kF16);
    CHECK(q.mantissa == 4096);
    CHECK(!q.overflowed);

    q = quantize_value(3.14159, e12, kF16);
    CHECK(q.mantissa == 12868);
    CHECK(!q.overflowed);

    q = quantize_value(5.0, e13, kF16);
    CHECK(q.mantissa == 32767);
    CHECK(q.overflowed);

    // the saturation threshold itself counts as overflow
    q = quantize_value(32767.0, ExponentState::from_exponent(0), kF16);
    CHECK(q.mantissa == 32767);
    CHECK(q.overflowed);
    q = quantize_value(32766.0, ExponentState::from_exponent(0), kF16);
    CHECK(!q.overflowed);

    // negative saturation stops one step short of the two's-complement minimum
    q = quantize_value(-1e9, e12, kF16);
    CHECK(q.mantissa == -32767);
    CHECK(q.overflowed);

    // non-finite inputs
    CHECK(quantize_value(std::nan(""), e12, kF16).mantissa == 0);
    q = quantize_value(INFINITY, e12, kF16);
    CHECK(q.mantissa == 32767);
    CHECK(q.overflowed);
}

TEST_CASE("rounding modes") {
    const auto e0 = ExponentState::from_exponent(0);

    SUBCASE("nearest-even ties") {
        CHECK(quantize_value(2.5, e0, kF16).mantissa == 2);
        CHECK(quantize_value(3.5, e0, kF16).mantissa == 4);
        CHECK(quantize_value(-2.5, e0, kF16).mantissa == -2);
        CHECK(quantize_value(-3.5, e0, kF16).mantissa == -4);
    }
    SUBCASE("truncate") {
        Rounding trunc(RoundingMode::Truncate);
        CHECK(quantize_value(3.9, e0, kF16, trunc).mantissa == 3);
        CHECK(quantize_value(-3.9, e0, kF16, trunc).mantissa == -3);
    }
    SUBCASE("stochastic is seeded and unbiased") {
        Rounding a(RoundingMode::Stochastic, 77);
        Rounding b(RoundingMode::Stochastic, 77);
        std::vector<std::int32_t> ma, mb;
        for (int i = 0; i < 200; ++i) {
            ma.push_back(quantize_value(10.3, e0, kF16, a).mantissa);
            mb.push_back(quantize_value(10.3, e0, kF16, b).mantissa);
        }
        CHECK(ma == mb);  // same seed, same stream
        double mean = 0;
        Rounding c(RoundingMode::Stochastic, 5);
        const int n = 20000;
        for (int i = 0; i < n; ++i) mean += quantize_value(10.3, e0, kF16, c).mantissa;
        mean /= n;
        CHECK(mean == doctest::Approx(10.3).epsilon(0.01));
    }
}

TEST_CASE("quantize_tensor examples") {
    const auto e12 = ExponentState::from_exponent(12);
    const std::vector<double> xs{1.0, -2.5, 3.75};
    auto q = quantize_tensor(xs, e12, kF16);
    CHECK(q.mantissas == std::vector<std::int32_t>{4096, -10240, 15360});
    CHECK(q.gamma == 15360);
    CHECK(!q.overflowed);

    const std::vector<double> zeros{0.0, 0.0, 0.0};
    q = quantize_tensor(zeros, e12, kF16);
    CHECK(q.gamma == 0);
    CHECK(!q.overflowed);

    const std::vector<double> four{4.0};
    q = quantize_tensor(four, ExponentState::from_exponent(13), kF16);
    CHECK(q.mantissas == std::vector<std::int32_t>{32767});
    CHECK(q.gamma == 32767);
    CHECK(q.overflowed);

    CHECK_THROWS_AS(quantize_tensor(std::vector<double>{}, e12, kF16), EmptyTensor);
}

TEST_CASE("dequantize examples") {
    const auto e12 = ExponentState::from_exponent(12);
    CHECK(dequantize_tensor(std::vector<std::int32_t>{4096}, e12) == std::vector<double>{1.0});
    CHECK(dequantize_tensor(std::vector<std::int32_t>{0}, e12) == std::vector<double>{0.0});
    CHECK(dequantize_tensor(std::vector<std::int32_t>{-10240}, e12) ==
          std::vector<double>{-2.5});
}

TEST_CASE("representable_range") {
    auto r = representable_range(ExponentState::from_exponent(12), kF16);
    CHECK(r.min_real == -8.0);
    CHECK(r.max_real == 7.999755859375);
    CHECK(r.epsilon == 0.000244140625);

    r = representable_range(ExponentState::from_exponent(0), kF16);
    CHECK(r.min_real == -32768.0);
    CHECK(r.max_real == 32767.0);
    CHECK(r.epsilon == 1.0);

    r = representable_range(ExponentState::from_exponent(0), FlexFormat{2, 5});
    CHECK(r.min_real == -2.0);
    CHECK(r.max_real == 1.0);
    CHECK(r.epsilon == 1.0);
}

TEST_CASE("round-trip error bound") {
    std::mt19937_64 rng(11);
    for (int e : {0, 5, 12, -6}) {
        const auto st = ExponentState::from_exponent(e);
        const auto range = representable_range(st, kF16);
        std::uniform_real_distribution<double> dist(-range.max_real, range.max_real);
        Rounding trunc(RoundingMode::Truncate);
        for (int i = 0; i < 10000; ++i) {
            const double x = dist(rng);
            const auto q = quantize_value(x, st, kF16);
            CHECK(std::fabs(q.mantissa * st.scale - x) <= st.scale / 2);
            const auto t = quantize_value(x, st, kF16, trunc);
            CHECK(std::fabs(t.mantissa * st.scale - x) <= st.scale);
        }
    }
}

TEST_CASE("monotonicity under nearest-even") {
    std::mt19937_64 rng(12);
    const auto st = ExponentState::from_exponent(10);
    const auto range = representable_range(st, kF16);
    std::uniform_real_distribution<double> dist(-range.max_real * 1.5, range.max_real * 1.5);
    for (int i = 0; i < 10000; ++i) {
        double x = dist(rng), y = dist(rng);
        if (x > y) std::swap(x, y);
        CHECK(quantize_value(x, st, kF16).mantissa <= quantize_value(y, st, kF16).mantissa);
    }
}

TEST_CASE("scaling identity") {
    // quantizing x at kappa gives the same mantissa as 2x at 2*kappa
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> dist(-7.9, 7.9);
    const auto st = ExponentState::from_exponent(12);
    const auto st2 = ExponentState::from_exponent(11);
    for (int i = 0; i < 10000; ++i) {
        const double x = dist(rng);
        CHECK(quantize_value(x, st, kF16).mantissa == quantize_value(2 * x, st2, kF16).mantissa);
    }
}

TEST_CASE("overflow flag agrees with the gamma threshold") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> dist(-12.0, 12.0);  // about half saturate
    const auto st = ExponentState::from_exponent(12);
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> xs(8);
        for (auto& v : xs) v = dist(rng);
        const auto q = quantize_tensor(xs, st, kF16);
        CHECK(q.overflowed == (q.gamma >= kF16.overflow_threshold()));
    }
}

TEST_CASE("ceil_log2") {
    CHECK(ceil_log2(std::int64_t{1}) == 0);
    CHECK(ceil_log2(std::int64_t{2}) == 1);
    CHECK(ceil_log2(std::int64_t{3}) == 2);
    CHECK(ceil_log2(std::int64_t{4}) == 2);
    CHECK(ceil_log2(std::int64_t{15360}) == 14);
    CHECK(ceil_log2(2.0) == 1);
    CHECK(ceil_log2(2.0244140625) == 2);
    CHECK(ceil_log2(16.02392578125) == 5);
    CHECK(ceil_log2(0.5) == -1);
    CHECK(ceil_log2(0.50001) == 0);
    CHECK(ceil_log2(1.0) == 0);
}
