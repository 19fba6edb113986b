#include "flexsim/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace flexsim {

std::int64_t shape_product(std::span<const std::int64_t> shape) {
    std::int64_t p = 1;
    for (auto d : shape) p *= d;
    return p;
}

FlexTensor from_reals(std::span<const double> xs, std::vector<std::int64_t> shape,
                      const ExponentState& st, const FlexFormat& fmt, Rounding& rounding,
                      std::string tensor_id) {
    if (xs.empty()) throw EmptyTensor("from_reals: empty input");
    if (shape_product(shape) != static_cast<std::int64_t>(xs.size()))
        throw ShapeMismatch("from_reals: shape does not match element count");
    auto q = quantize_tensor(xs, st, fmt, rounding);
    FlexTensor t;
    t.mantissas = std::move(q.mantissas);
    t.shape = std::move(shape);
    t.state = st;
    t.tensor_id = std::move(tensor_id);
    t.gamma = q.gamma;
    return t;
}

FlexTensor from_reals(std::span<const double> xs, std::vector<std::int64_t> shape,
                      const ExponentState& st, const FlexFormat& fmt, std::string tensor_id) {
    Rounding nearest;
    return from_reals(xs, std::move(shape), st, fmt, nearest, std::move(tensor_id));
}

std::vector<double> to_reals(const FlexTensor& t) {
    return dequantize_tensor(t.mantissas, t.state);
}

std::int64_t max_abs_mantissa(const FlexTensor& t) {
    if (t.mantissas.empty()) throw EmptyTensor("max_abs_mantissa: empty tensor");
    std::int64_t g = 0;
    for (auto m : t.mantissas) g = std::max(g, std::abs(static_cast<std::int64_t>(m)));
    return g;
}

FlexTensor reshape(const FlexTensor& t, std::vector<std::int64_t> shape) {
    if (shape_product(shape) != t.size())
        throw ShapeMismatch("reshape: element count mismatch");
    FlexTensor out = t;
    out.shape = std::move(shape);
    return out;
}

void write_dump(std::ostream& os, const FlexTensor& t, const FlexFormat& fmt) {
    os << "flexdump 1\n";
    os << "format " << fmt.str() << "\n";
    os << "exponent " << t.state.exponent << "\n";
    os << "shape";
    for (auto d : t.shape) os << ' ' << d;
    os << "\nmantissas";
    for (auto m : t.mantissas) os << ' ' << m;
    os << "\n";
}

namespace {

std::string expect_word(std::istream& is, const char* what) {
    std::string w;
    if (!(is >> w)) throw IoError(std::string("tensor dump: missing ") + what);
    return w;
}

}  // namespace

TensorDump read_dump(std::istream& is) {
    if (expect_word(is, "magic") != "flexdump" || expect_word(is, "version") != "1")
        throw IoError("tensor dump: bad header");
    if (expect_word(is, "format keyword") != "format") throw IoError("tensor dump: bad header");
    TensorDump d;
    d.format = parse_format(expect_word(is, "format string"));
    if (expect_word(is, "exponent keyword") != "exponent")
        throw IoError("tensor dump: missing exponent");
    int e = 0;
    if (!(is >> e)) throw IoError("tensor dump: bad exponent");
    if (!d.format.exponent_in_window(e))
        throw IoError("tensor dump: exponent " + std::to_string(e) + " outside the window of " +
                      d.format.str());
    d.tensor.state = ExponentState::from_exponent(e);
    if (expect_word(is, "shape keyword") != "shape") throw IoError("tensor dump: missing shape");
    std::string tok;
    std::vector<std::int64_t> shape;
    while (is >> tok && tok != "mantissas") shape.push_back(std::stoll(tok));
    if (tok != "mantissas") throw IoError("tensor dump: missing mantissas");
    d.tensor.shape = std::move(shape);
    const std::int64_t n = shape_product(d.tensor.shape);
    d.tensor.mantissas.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t m = 0;
        if (!(is >> m)) throw IoError("tensor dump: truncated mantissa data");
        if (m > d.format.mantissa_max() || m < d.format.mantissa_min())
            throw IoError("tensor dump: mantissa out of range for " + d.format.str());
        d.tensor.mantissas.push_back(static_cast<std::int32_t>(m));
    }
    d.tensor.gamma = max_abs_mantissa(d.tensor);
    return d;
}

}  // namespace flexsim
