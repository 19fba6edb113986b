#pragma once

#include <cstdint>
#include <vector>

#include "flexsim/autoflex.hpp"
#include "flexsim/format.hpp"
#include "flexsim/tensor.hpp"

namespace flexsim {

/// WriteAndStats requantizes the result into the destination buffer and
/// reports gamma. StatsOnly computes gamma at the slot's current scale
/// without touching the destination (used during exponent initialization).
/// ReferenceReal is the unquantized path: it selects the realops:: functions
/// at the training-arm level and is not accepted by the flex entry points.
enum class KernelMode { WriteAndStats, StatsOnly, ReferenceReal };

struct KernelOutput {
    std::int64_t gamma = 0;
    bool overflowed = false;
    bool wrote_output = false;
};

// ---------------------------------------------------------------------------
// Real-arithmetic core. Plain double buffers, row-major. These functions are
// both the high-precision interior of every simulated kernel and the
// ReferenceReal training arm.
// ---------------------------------------------------------------------------
namespace realops {

// C[m x n] = A ( m x k ) * B ( k x n ); trans flags reinterpret the operand
// buffers as transposed.
void matmul(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& c,
            std::int64_t m, std::int64_t k, std::int64_t n, bool trans_a = false,
            bool trans_b = false);

struct Conv2dDims {
    std::int64_t batch, in_channels, height, width;
    std::int64_t out_channels, kernel_h, kernel_w;
    std::int64_t stride = 1, pad = 0;

    std::int64_t out_h() const { return (height + 2 * pad - kernel_h) / stride + 1; }
    std::int64_t out_w() const { return (width + 2 * pad - kernel_w) / stride + 1; }
    bool valid() const {
        return stride >= 1 && pad >= 0 && height + 2 * pad >= kernel_h &&
               width + 2 * pad >= kernel_w;
    }
};

// Direct (naive) convolution and its two gradients.
void conv2d(const std::vector<double>& x, const std::vector<double>& w, std::vector<double>& y,
            const Conv2dDims& d);
void conv2d_grad_w(const std::vector<double>& x, const std::vector<double>& dy,
                   std::vector<double>& dw, const Conv2dDims& d);
void conv2d_grad_x(const std::vector<double>& dy, const std::vector<double>& w,
                   std::vector<double>& dx, const Conv2dDims& d);

void add(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out);
void sub(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out);
void mul(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out);
void relu(const std::vector<double>& a, std::vector<double>& out);
void scale_by_const(const std::vector<double>& a, double c, std::vector<double>& out);
// out = (z > 0) ? d : 0, the backward companion of relu
void relu_grad(const std::vector<double>& d, const std::vector<double>& z,
               std::vector<double>& out);

// rows x cols + bias[cols]; 4-D variant broadcasts bias over channels
void bias_add(const std::vector<double>& x, const std::vector<double>& bias,
              std::vector<double>& out, std::int64_t rows, std::int64_t cols);
void bias_add_nchw(const std::vector<double>& x, const std::vector<double>& bias,
                   std::vector<double>& out, std::int64_t batch, std::int64_t channels,
                   std::int64_t hw);
void col_sum(const std::vector<double>& x, std::vector<double>& out, std::int64_t rows,
             std::int64_t cols);
void channel_sum_nchw(const std::vector<double>& x, std::vector<double>& out, std::int64_t batch,
                      std::int64_t channels, std::int64_t hw);

// non-overlapping k x k max pooling; argmax records the flat input index per
// output element (first maximum wins)
void maxpool(const std::vector<double>& x, std::vector<double>& y, std::vector<std::int64_t>& argmax,
             std::int64_t batch, std::int64_t channels, std::int64_t h, std::int64_t w, int k);
void maxpool_grad(const std::vector<double>& dy, const std::vector<std::int64_t>& argmax,
                  std::vector<double>& dx, std::int64_t input_size);

void sgd(const std::vector<double>& w, const std::vector<double>& dw, double lr,
         std::vector<double>& out);

}  // namespace realops

// ---------------------------------------------------------------------------
// Simulated flexN+M kernels: dequantize inputs, compute in reals, requantize
// at the output slot's pre-decided scale. The scale is never changed
// mid-call; adjustment happens afterwards through the autoflex module.
// ---------------------------------------------------------------------------
namespace kernels {

KernelOutput matmul(const FlexTensor& a, const FlexTensor& b, FlexTensor& out, StatsSlot& out_slot,
                    KernelMode mode, const FlexFormat& fmt, Rounding& rounding,
                    bool trans_a = false, bool trans_b = false);

KernelOutput conv2d(const FlexTensor& x, const FlexTensor& w, FlexTensor& out,
                    StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                    Rounding& rounding, std::int64_t stride = 1, std::int64_t pad = 0);
KernelOutput conv2d_grad_w(const FlexTensor& x, const FlexTensor& dy, FlexTensor& out,
                           StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                           Rounding& rounding, std::int64_t stride = 1, std::int64_t pad = 0);
KernelOutput conv2d_grad_x(const FlexTensor& dy, const FlexTensor& w, FlexTensor& out,
                           StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                           Rounding& rounding, std::int64_t stride = 1, std::int64_t pad = 0);

enum class EwOp { Add, Sub, Mul, Relu, ScaleByConst };

/// add/sub/mul take two equal-shape inputs; relu and scale_by_const take one
/// (b ignored, scale_by_const reads `scalar`).
KernelOutput elementwise(EwOp op, const FlexTensor& a, const FlexTensor* b, double scalar,
                         FlexTensor& out, StatsSlot& out_slot, KernelMode mode,
                         const FlexFormat& fmt, Rounding& rounding);

KernelOutput relu_grad(const FlexTensor& d, const FlexTensor& z, FlexTensor& out,
                       StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                       Rounding& rounding);

KernelOutput bias_add(const FlexTensor& x, const FlexTensor& bias, FlexTensor& out,
                      StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                      Rounding& rounding);
KernelOutput col_sum(const FlexTensor& x, FlexTensor& out, StatsSlot& out_slot, KernelMode mode,
                     const FlexFormat& fmt, Rounding& rounding);

KernelOutput maxpool(const FlexTensor& x, int k, FlexTensor& out, std::vector<std::int64_t>& argmax,
                     StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                     Rounding& rounding);
KernelOutput maxpool_grad(const FlexTensor& dy, const std::vector<std::int64_t>& argmax,
                          const std::vector<std::int64_t>& input_shape, FlexTensor& out,
                          StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                          Rounding& rounding);

/// w - lr * dw, requantized at the weight slot's scale. Updates smaller than
/// half the weight's quantization step are swamped (the element is unchanged).
KernelOutput sgd_update(const FlexTensor& w, const FlexTensor& dw, double lr, FlexTensor& out,
                        StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                        Rounding& rounding);

/// Boundary kernel: quantizes a real buffer into a flex tensor (network
/// inputs, loss gradients). Behaves like any other kernel w.r.t. modes.
KernelOutput quantize_write(std::span<const double> values,
                            const std::vector<std::int64_t>& shape, FlexTensor& out,
                            StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                            Rounding& rounding);

/// Verification op: elementwise product computed purely on integer mantissas
/// (wide intermediate, no rounding). Requires e_out = e_a + e_b, the exponent
/// sum under which fixed point multiplication is exact. Throws
/// ExponentMismatch otherwise. Not used in training.
std::vector<std::int64_t> fixed_point_mul_check(const FlexTensor& a, const FlexTensor& b,
                                                int e_out);

}  // namespace kernels

}  // namespace flexsim
