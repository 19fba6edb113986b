#include "flexsim/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace flexsim {

namespace realops {

void matmul(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& c,
            std::int64_t m, std::int64_t k, std::int64_t n, bool trans_a, bool trans_b) {
    c.assign(static_cast<std::size_t>(m * n), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = trans_a ? a[static_cast<std::size_t>(p * m + i)]
                                      : a[static_cast<std::size_t>(i * k + p)];
            if (av == 0.0) continue;
            const double* brow = trans_b ? nullptr : &b[static_cast<std::size_t>(p * n)];
            for (std::int64_t j = 0; j < n; ++j) {
                const double bv = trans_b ? b[static_cast<std::size_t>(j * k + p)] : brow[j];
                c[static_cast<std::size_t>(i * n + j)] += av * bv;
            }
        }
    }
}

void conv2d(const std::vector<double>& x, const std::vector<double>& w, std::vector<double>& y,
            const Conv2dDims& d) {
    const std::int64_t oh = d.out_h(), ow = d.out_w();
    y.assign(static_cast<std::size_t>(d.batch * d.out_channels * oh * ow), 0.0);
    for (std::int64_t b = 0; b < d.batch; ++b)
        for (std::int64_t o = 0; o < d.out_channels; ++o)
            for (std::int64_t i = 0; i < oh; ++i)
                for (std::int64_t j = 0; j < ow; ++j) {
                    double acc = 0.0;
                    for (std::int64_t c = 0; c < d.in_channels; ++c)
                        for (std::int64_t r = 0; r < d.kernel_h; ++r)
                            for (std::int64_t s = 0; s < d.kernel_w; ++s) {
                                const std::int64_t hi = i * d.stride - d.pad + r;
                                const std::int64_t wi = j * d.stride - d.pad + s;
                                if (hi < 0 || hi >= d.height || wi < 0 || wi >= d.width) continue;
                                acc += x[static_cast<std::size_t>(
                                           ((b * d.in_channels + c) * d.height + hi) * d.width +
                                           wi)] *
                                       w[static_cast<std::size_t>(
                                           ((o * d.in_channels + c) * d.kernel_h + r) *
                                               d.kernel_w +
                                           s)];
                            }
                    y[static_cast<std::size_t>(((b * d.out_channels + o) * oh + i) * ow + j)] =
                        acc;
                }
}

void conv2d_grad_w(const std::vector<double>& x, const std::vector<double>& dy,
                   std::vector<double>& dw, const Conv2dDims& d) {
    const std::int64_t oh = d.out_h(), ow = d.out_w();
    dw.assign(static_cast<std::size_t>(d.out_channels * d.in_channels * d.kernel_h * d.kernel_w),
              0.0);
    for (std::int64_t b = 0; b < d.batch; ++b)
        for (std::int64_t o = 0; o < d.out_channels; ++o)
            for (std::int64_t i = 0; i < oh; ++i)
                for (std::int64_t j = 0; j < ow; ++j) {
                    const double g = dy[static_cast<std::size_t>(
                        ((b * d.out_channels + o) * oh + i) * ow + j)];
                    if (g == 0.0) continue;
                    for (std::int64_t c = 0; c < d.in_channels; ++c)
                        for (std::int64_t r = 0; r < d.kernel_h; ++r)
                            for (std::int64_t s = 0; s < d.kernel_w; ++s) {
                                const std::int64_t hi = i * d.stride - d.pad + r;
                                const std::int64_t wi = j * d.stride - d.pad + s;
                                if (hi < 0 || hi >= d.height || wi < 0 || wi >= d.width) continue;
                                dw[static_cast<std::size_t>(
                                    ((o * d.in_channels + c) * d.kernel_h + r) * d.kernel_w +
                                    s)] +=
                                    g * x[static_cast<std::size_t>(
                                            ((b * d.in_channels + c) * d.height + hi) * d.width +
                                            wi)];
                            }
                }
}

void conv2d_grad_x(const std::vector<double>& dy, const std::vector<double>& w,
                   std::vector<double>& dx, const Conv2dDims& d) {
    const std::int64_t oh = d.out_h(), ow = d.out_w();
    dx.assign(static_cast<std::size_t>(d.batch * d.in_channels * d.height * d.width), 0.0);
    for (std::int64_t b = 0; b < d.batch; ++b)
        for (std::int64_t o = 0; o < d.out_channels; ++o)
            for (std::int64_t i = 0; i < oh; ++i)
                for (std::int64_t j = 0; j < ow; ++j) {
                    const double g = dy[static_cast<std::size_t>(
                        ((b * d.out_channels + o) * oh + i) * ow + j)];
                    if (g == 0.0) continue;
                    for (std::int64_t c = 0; c < d.in_channels; ++c)
                        for (std::int64_t r = 0; r < d.kernel_h; ++r)
                            for (std::int64_t s = 0; s < d.kernel_w; ++s) {
                                const std::int64_t hi = i * d.stride - d.pad + r;
                                const std::int64_t wi = j * d.stride - d.pad + s;
                                if (hi < 0 || hi >= d.height || wi < 0 || wi >= d.width) continue;
                                dx[static_cast<std::size_t>(
                                    ((b * d.in_channels + c) * d.height + hi) * d.width + wi)] +=
                                    g * w[static_cast<std::size_t>(
                                            ((o * d.in_channels + c) * d.kernel_h + r) *
                                                d.kernel_w +
                                            s)];
                            }
                }
}

void add(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out) {
    out.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
}

void sub(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out) {
    out.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
}

void mul(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out) {
    out.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
}

void relu(const std::vector<double>& a, std::vector<double>& out) {
    out.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void scale_by_const(const std::vector<double>& a, double c, std::vector<double>& out) {
    out.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
}

void relu_grad(const std::vector<double>& d, const std::vector<double>& z,
               std::vector<double>& out) {
    out.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = z[i] > 0.0 ? d[i] : 0.0;
}

void bias_add(const std::vector<double>& x, const std::vector<double>& bias,
              std::vector<double>& out, std::int64_t rows, std::int64_t cols) {
    out.resize(x.size());
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(i * cols + j)] =
                x[static_cast<std::size_t>(i * cols + j)] + bias[static_cast<std::size_t>(j)];
}

void bias_add_nchw(const std::vector<double>& x, const std::vector<double>& bias,
                   std::vector<double>& out, std::int64_t batch, std::int64_t channels,
                   std::int64_t hw) {
    out.resize(x.size());
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < channels; ++c)
            for (std::int64_t i = 0; i < hw; ++i)
                out[static_cast<std::size_t>((b * channels + c) * hw + i)] =
                    x[static_cast<std::size_t>((b * channels + c) * hw + i)] +
                    bias[static_cast<std::size_t>(c)];
}

void col_sum(const std::vector<double>& x, std::vector<double>& out, std::int64_t rows,
             std::int64_t cols) {
    out.assign(static_cast<std::size_t>(cols), 0.0);
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(i * cols + j)];
}

void channel_sum_nchw(const std::vector<double>& x, std::vector<double>& out, std::int64_t batch,
                      std::int64_t channels, std::int64_t hw) {
    out.assign(static_cast<std::size_t>(channels), 0.0);
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < channels; ++c)
            for (std::int64_t i = 0; i < hw; ++i)
                out[static_cast<std::size_t>(c)] +=
                    x[static_cast<std::size_t>((b * channels + c) * hw + i)];
}

void maxpool(const std::vector<double>& x, std::vector<double>& y, std::vector<std::int64_t>& argmax,
             std::int64_t batch, std::int64_t channels, std::int64_t h, std::int64_t w, int k) {
    const std::int64_t oh = h / k, ow = w / k;
    y.resize(static_cast<std::size_t>(batch * channels * oh * ow));
    argmax.resize(y.size());
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t c = 0; c < channels; ++c)
            for (std::int64_t i = 0; i < oh; ++i)
                for (std::int64_t j = 0; j < ow; ++j) {
                    std::int64_t best = ((b * channels + c) * h + i * k) * w + j * k;
                    double bestv = x[static_cast<std::size_t>(best)];
                    for (std::int64_t r = 0; r < k; ++r)
                        for (std::int64_t s = 0; s < k; ++s) {
                            const std::int64_t idx =
                                ((b * channels + c) * h + i * k + r) * w + j * k + s;
                            if (x[static_cast<std::size_t>(idx)] > bestv) {
                                bestv = x[static_cast<std::size_t>(idx)];
                                best = idx;
                            }
                        }
                    const std::int64_t oidx = ((b * channels + c) * oh + i) * ow + j;
                    y[static_cast<std::size_t>(oidx)] = bestv;
                    argmax[static_cast<std::size_t>(oidx)] = best;
                }
}

void maxpool_grad(const std::vector<double>& dy, const std::vector<std::int64_t>& argmax,
                  std::vector<double>& dx, std::int64_t input_size) {
    dx.assign(static_cast<std::size_t>(input_size), 0.0);
    for (std::size_t i = 0; i < dy.size(); ++i)
        dx[static_cast<std::size_t>(argmax[i])] += dy[i];
}

void sgd(const std::vector<double>& w, const std::vector<double>& dw, double lr,
         std::vector<double>& out) {
    out.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] - lr * dw[i];
}

}  // namespace realops

namespace kernels {

namespace {

void require_mode(KernelMode mode) {
    if (mode == KernelMode::ReferenceReal)
        throw std::invalid_argument(
            "flex kernels accept WriteAndStats or StatsOnly; ReferenceReal selects the realops "
            "path");
}

// Requantization tail shared by every kernel: stats always, write only in
// WriteAndStats mode (and only through an initialized slot).
KernelOutput finish(const std::vector<double>& real_result,
                    const std::vector<std::int64_t>& shape, FlexTensor& out, StatsSlot& slot,
                    KernelMode mode, const FlexFormat& fmt, Rounding& rounding) {
    auto q = quantize_tensor(real_result, slot.state, fmt, rounding);
    KernelOutput ko{q.gamma, q.overflowed, false};
    if (mode == KernelMode::WriteAndStats) {
        if (!slot.initialized)
            throw UninitializedSlot("kernel write through an uninitialized slot");
        out.mantissas = std::move(q.mantissas);
        out.shape = shape;
        out.state = slot.state;
        out.gamma = q.gamma;
        ko.wrote_output = true;
    }
    return ko;
}

void require_dims(const FlexTensor& t, int ndim, const char* what) {
    if (t.ndim() != ndim)
        throw ShapeMismatch(std::string(what) + ": expected " + std::to_string(ndim) +
                            "-d tensor");
}

realops::Conv2dDims conv_dims(const FlexTensor& x, const FlexTensor& w, std::int64_t stride,
                              std::int64_t pad) {
    require_dims(x, 4, "conv2d input");
    require_dims(w, 4, "conv2d weight");
    realops::Conv2dDims d{x.shape[0], x.shape[1], x.shape[2], x.shape[3],
                          w.shape[0], w.shape[2], w.shape[3], stride,    pad};
    if (w.shape[1] != d.in_channels)
        throw ShapeMismatch("conv2d: weight channels do not match input");
    if (!d.valid()) throw ShapeMismatch("conv2d: kernel does not fit padded input");
    return d;
}

}  // namespace

KernelOutput matmul(const FlexTensor& a, const FlexTensor& b, FlexTensor& out, StatsSlot& out_slot,
                    KernelMode mode, const FlexFormat& fmt, Rounding& rounding, bool trans_a,
                    bool trans_b) {
    require_mode(mode);
    require_dims(a, 2, "matmul lhs");
    require_dims(b, 2, "matmul rhs");
    const std::int64_t m = trans_a ? a.shape[1] : a.shape[0];
    const std::int64_t k = trans_a ? a.shape[0] : a.shape[1];
    const std::int64_t kb = trans_b ? b.shape[1] : b.shape[0];
    const std::int64_t n = trans_b ? b.shape[0] : b.shape[1];
    if (k != kb) throw ShapeMismatch("matmul: inner dimensions disagree");
    std::vector<double> c;
    realops::matmul(to_reals(a), to_reals(b), c, m, k, n, trans_a, trans_b);
    return finish(c, {m, n}, out, out_slot, mode, fmt, rounding);
}

KernelOutput conv2d(const FlexTensor& x, const FlexTensor& w, FlexTensor& out,
                    StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                    Rounding& rounding, std::int64_t stride, std::int64_t pad) {
    require_mode(mode);
    const auto d = conv_dims(x, w, stride, pad);
    std::vector<double> y;
    realops::conv2d(to_reals(x), to_reals(w), y, d);
    return finish(y, {d.batch, d.out_channels, d.out_h(), d.out_w()}, out, out_slot, mode, fmt,
                  rounding);
}

KernelOutput conv2d_grad_w(const FlexTensor& x, const FlexTensor& dy, FlexTensor& out,
                           StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                           Rounding& rounding, std::int64_t stride, std::int64_t pad) {
    require_mode(mode);
    require_dims(x, 4, "conv2d_grad_w input");
    require_dims(dy, 4, "conv2d_grad_w delta");
    realops::Conv2dDims d{x.shape[0], x.shape[1], x.shape[2], x.shape[3],
                          dy.shape[1], 0,          0,          stride,    pad};
    // kernel size is implied by the delta's spatial extent
    d.kernel_h = x.shape[2] + 2 * pad - (dy.shape[2] - 1) * stride;
    d.kernel_w = x.shape[3] + 2 * pad - (dy.shape[3] - 1) * stride;
    if (!d.valid() || d.out_h() != dy.shape[2] || d.out_w() != dy.shape[3])
        throw ShapeMismatch("conv2d_grad_w: delta shape inconsistent with input");
    std::vector<double> dw;
    realops::conv2d_grad_w(to_reals(x), to_reals(dy), dw, d);
    return finish(dw, {d.out_channels, d.in_channels, d.kernel_h, d.kernel_w}, out, out_slot,
                  mode, fmt, rounding);
}

KernelOutput conv2d_grad_x(const FlexTensor& dy, const FlexTensor& w, FlexTensor& out,
                           StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                           Rounding& rounding, std::int64_t stride, std::int64_t pad) {
    require_mode(mode);
    require_dims(dy, 4, "conv2d_grad_x delta");
    require_dims(w, 4, "conv2d_grad_x weight");
    realops::Conv2dDims d{dy.shape[0], w.shape[1],
                          (dy.shape[2] - 1) * stride + w.shape[2] - 2 * pad,
                          (dy.shape[3] - 1) * stride + w.shape[3] - 2 * pad,
                          w.shape[0],  w.shape[2], w.shape[3], stride, pad};
    if (dy.shape[1] != d.out_channels || !d.valid())
        throw ShapeMismatch("conv2d_grad_x: delta channels do not match weight");
    std::vector<double> dx;
    realops::conv2d_grad_x(to_reals(dy), to_reals(w), dx, d);
    return finish(dx, {d.batch, d.in_channels, d.height, d.width}, out, out_slot, mode, fmt,
                  rounding);
}

KernelOutput elementwise(EwOp op, const FlexTensor& a, const FlexTensor* b, double scalar,
                         FlexTensor& out, StatsSlot& out_slot, KernelMode mode,
                         const FlexFormat& fmt, Rounding& rounding) {
    require_mode(mode);
    const bool binary = op == EwOp::Add || op == EwOp::Sub || op == EwOp::Mul;
    if (binary) {
        if (b == nullptr) throw ShapeMismatch("elementwise: binary op needs two inputs");
        if (a.shape != b->shape) throw ShapeMismatch("elementwise: shapes disagree");
    }
    const auto ar = to_reals(a);
    std::vector<double> r;
    switch (op) {
        case EwOp::Add: realops::add(ar, to_reals(*b), r); break;
        case EwOp::Sub: realops::sub(ar, to_reals(*b), r); break;
        case EwOp::Mul: realops::mul(ar, to_reals(*b), r); break;
        case EwOp::Relu: realops::relu(ar, r); break;
        case EwOp::ScaleByConst: realops::scale_by_const(ar, scalar, r); break;
    }
    return finish(r, a.shape, out, out_slot, mode, fmt, rounding);
}

KernelOutput relu_grad(const FlexTensor& d, const FlexTensor& z, FlexTensor& out,
                       StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                       Rounding& rounding) {
    require_mode(mode);
    if (d.shape != z.shape) throw ShapeMismatch("relu_grad: shapes disagree");
    std::vector<double> r;
    realops::relu_grad(to_reals(d), to_reals(z), r);
    return finish(r, d.shape, out, out_slot, mode, fmt, rounding);
}

KernelOutput bias_add(const FlexTensor& x, const FlexTensor& bias, FlexTensor& out,
                      StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                      Rounding& rounding) {
    require_mode(mode);
    require_dims(bias, 1, "bias");
    std::vector<double> r;
    if (x.ndim() == 2) {
        if (bias.shape[0] != x.shape[1]) throw ShapeMismatch("bias_add: bias length != columns");
        realops::bias_add(to_reals(x), to_reals(bias), r, x.shape[0], x.shape[1]);
    } else if (x.ndim() == 4) {
        if (bias.shape[0] != x.shape[1]) throw ShapeMismatch("bias_add: bias length != channels");
        realops::bias_add_nchw(to_reals(x), to_reals(bias), r, x.shape[0], x.shape[1],
                               x.shape[2] * x.shape[3]);
    } else {
        throw ShapeMismatch("bias_add: input must be 2-d or 4-d");
    }
    return finish(r, x.shape, out, out_slot, mode, fmt, rounding);
}

KernelOutput col_sum(const FlexTensor& x, FlexTensor& out, StatsSlot& out_slot, KernelMode mode,
                     const FlexFormat& fmt, Rounding& rounding) {
    require_mode(mode);
    std::vector<double> r;
    if (x.ndim() == 2) {
        realops::col_sum(to_reals(x), r, x.shape[0], x.shape[1]);
        return finish(r, {x.shape[1]}, out, out_slot, mode, fmt, rounding);
    }
    if (x.ndim() == 4) {
        realops::channel_sum_nchw(to_reals(x), r, x.shape[0], x.shape[1],
                                  x.shape[2] * x.shape[3]);
        return finish(r, {x.shape[1]}, out, out_slot, mode, fmt, rounding);
    }
    throw ShapeMismatch("col_sum: input must be 2-d or 4-d");
}

KernelOutput maxpool(const FlexTensor& x, int k, FlexTensor& out, std::vector<std::int64_t>& argmax,
                     StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                     Rounding& rounding) {
    require_mode(mode);
    require_dims(x, 4, "maxpool input");
    if (k < 1 || x.shape[2] % k != 0 || x.shape[3] % k != 0)
        throw ShapeMismatch("maxpool: window must divide spatial dims");
    std::vector<double> y;
    realops::maxpool(to_reals(x), y, argmax, x.shape[0], x.shape[1], x.shape[2], x.shape[3], k);
    return finish(y, {x.shape[0], x.shape[1], x.shape[2] / k, x.shape[3] / k}, out, out_slot,
                  mode, fmt, rounding);
}

KernelOutput maxpool_grad(const FlexTensor& dy, const std::vector<std::int64_t>& argmax,
                          const std::vector<std::int64_t>& input_shape, FlexTensor& out,
                          StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                          Rounding& rounding) {
    require_mode(mode);
    if (argmax.size() != dy.mantissas.size())
        throw ShapeMismatch("maxpool_grad: argmax does not match delta");
    std::vector<double> dx;
    realops::maxpool_grad(to_reals(dy), argmax, dx, shape_product(input_shape));
    return finish(dx, input_shape, out, out_slot, mode, fmt, rounding);
}

KernelOutput sgd_update(const FlexTensor& w, const FlexTensor& dw, double lr, FlexTensor& out,
                        StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                        Rounding& rounding) {
    require_mode(mode);
    if (w.shape != dw.shape) throw ShapeMismatch("sgd_update: shapes disagree");
    std::vector<double> r;
    realops::sgd(to_reals(w), to_reals(dw), lr, r);
    return finish(r, w.shape, out, out_slot, mode, fmt, rounding);
}

KernelOutput quantize_write(std::span<const double> values,
                            const std::vector<std::int64_t>& shape, FlexTensor& out,
                            StatsSlot& out_slot, KernelMode mode, const FlexFormat& fmt,
                            Rounding& rounding) {
    require_mode(mode);
    if (shape_product(shape) != static_cast<std::int64_t>(values.size()))
        throw ShapeMismatch("quantize_write: shape does not match element count");
    const std::vector<double> r(values.begin(), values.end());
    return finish(r, shape, out, out_slot, mode, fmt, rounding);
}

std::vector<std::int64_t> fixed_point_mul_check(const FlexTensor& a, const FlexTensor& b,
                                                int e_out) {
    if (a.shape != b.shape) throw ShapeMismatch("fixed_point_mul_check: shapes disagree");
    if (e_out != a.state.exponent + b.state.exponent)
        throw ExponentMismatch("fixed_point_mul_check: e_out must equal e_a + e_b");
    std::vector<std::int64_t> out(a.mantissas.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::int64_t>(a.mantissas[i]) *
                 static_cast<std::int64_t>(b.mantissas[i]);
    return out;
}

}  // namespace kernels

}  // namespace flexsim
