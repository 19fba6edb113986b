#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flexsim/format.hpp"

namespace flexsim {

/// A tensor of N-bit integer mantissas bound to one shared exponent.
/// Immutable once a kernel has written it; kernels replace the whole buffer.
struct FlexTensor {
    std::vector<std::int32_t> mantissas;
    std::vector<std::int64_t> shape;
    ExponentState state;
    std::string tensor_id;
    std::int64_t gamma = 0;  // max |mantissa| cached at last write

    std::int64_t size() const { return static_cast<std::int64_t>(mantissas.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
};

std::int64_t shape_product(std::span<const std::int64_t> shape);

/// Quantizes xs at the given state; the tensor caches the resulting gamma.
FlexTensor from_reals(std::span<const double> xs, std::vector<std::int64_t> shape,
                      const ExponentState& st, const FlexFormat& fmt, Rounding& rounding,
                      std::string tensor_id = {});
FlexTensor from_reals(std::span<const double> xs, std::vector<std::int64_t> shape,
                      const ExponentState& st, const FlexFormat& fmt,
                      std::string tensor_id = {});

std::vector<double> to_reals(const FlexTensor& t);

/// Recomputes max |mantissa| from the buffer (the cached value exists for the
/// common path; this is the verification path). Note |-2^(N-1)| exceeds
/// mantissa_max and still counts toward overflow.
std::int64_t max_abs_mantissa(const FlexTensor& t);

/// Same mantissas and exponent under a new shape; element count must match.
FlexTensor reshape(const FlexTensor& t, std::vector<std::int64_t> shape);

/// Identifies one use of a tensor so a shared mantissa buffer can carry
/// distinct exponent statistics per consumer.
struct TensorUseKey {
    std::string tensor_id;
    std::string use_id;

    friend bool operator==(const TensorUseKey&, const TensorUseKey&) = default;
};

struct TensorUseKeyHash {
    std::size_t operator()(const TensorUseKey& k) const {
        const std::size_t h1 = std::hash<std::string>{}(k.tensor_id);
        const std::size_t h2 = std::hash<std::string>{}(k.use_id);
        return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
    }
};

// Text dump: a self-describing record of {format, exponent, shape, mantissas}
// consumed by the CLI quantize/compare tools and golden-file tests.
struct TensorDump {
    FlexTensor tensor;
    FlexFormat format{16, 5};
};

void write_dump(std::ostream& os, const FlexTensor& t, const FlexFormat& fmt);
TensorDump read_dump(std::istream& is);

}  // namespace flexsim
