#include "flexsim/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace flexsim::nn {

namespace {

template <class... Ts>
struct overload : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overload(Ts...) -> overload<Ts...>;

std::vector<std::int64_t> batched(int batch, const std::vector<std::int64_t>& per_sample) {
    std::vector<std::int64_t> s{batch};
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
}

FlexTensor as_shape(const FlexTensor& t, const std::vector<std::int64_t>& shape) {
    return t.shape == shape ? t : reshape(t, shape);
}

}  // namespace

ModelSpec ModelSpec::mlp(int in, int hidden, int classes) {
    ModelSpec s;
    s.input_shape = {in};
    s.layers = {Affine{in, hidden}, ReLU{}, Affine{hidden, classes}, SoftmaxCrossEntropy{}};
    return s;
}

ModelSpec ModelSpec::convnet(int channels, int height, int width, int filters, int classes) {
    ModelSpec s;
    s.input_shape = {channels, height, width};
    const int ph = height / 2, pw = width / 2;
    s.layers = {Conv2d{channels, filters, 3, 3, 1, 1}, ReLU{}, MaxPool{2},
                Affine{filters * ph * pw, classes}, SoftmaxCrossEntropy{}};
    return s;
}

LossOut softmax_cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels,
                              int batch, int classes) {
    LossOut out;
    out.dlogits.resize(static_cast<std::size_t>(batch) * classes);
    double total = 0.0;
    int correct = 0;
    for (int i = 0; i < batch; ++i) {
        const double* row = &logits[static_cast<std::size_t>(i) * classes];
        double rowmax = row[0];
        int arg = 0;
        for (int c = 1; c < classes; ++c)
            if (row[c] > rowmax) {
                rowmax = row[c];
                arg = c;
            }
        double sumexp = 0.0;
        for (int c = 0; c < classes; ++c) sumexp += std::exp(row[c] - rowmax);
        const double logsum = rowmax + std::log(sumexp);
        const int y = labels[static_cast<std::size_t>(i)];
        total += logsum - row[y];
        if (arg == y) ++correct;
        for (int c = 0; c < classes; ++c)
            out.dlogits[static_cast<std::size_t>(i) * classes + c] =
                std::exp(row[c] - logsum) - (c == y ? 1.0 : 0.0);
    }
    out.loss = total / batch;
    out.accuracy = static_cast<double>(correct) / batch;
    return out;
}

Model::Model(const ModelSpec& spec, const TrainConfig& cfg)
    : flex_(!is_reference_format(cfg.format)),
      fmt_(flex_ ? parse_format(cfg.format) : FlexFormat(16, 5)),
      cfg_(cfg),
      batch_(cfg.batch_size),
      registry_(fmt_, cfg.autoflex),
      rounding_(cfg.rounding, cfg.rounding_seed) {
    if (cfg.iterations < 1) throw InvalidSpec("iterations must be >= 1");
    if (cfg.batch_size < 1) throw InvalidSpec("batch size must be >= 1");
    trace_.enabled = cfg.trace;
    registry_.set_trace(&trace_);
    build(spec);
}

void Model::build(const ModelSpec& spec) {
    if (spec.input_shape.empty()) throw InvalidSpec("empty input shape");
    for (auto d : spec.input_shape)
        if (d < 1) throw InvalidSpec("input dimensions must be positive");
    if (spec.layers.empty()) throw InvalidSpec("model has no layers");

    in_flat_ = shape_product(spec.input_shape);
    input_.key = {"input", "fprop"};
    input_.shape = batched(batch_, spec.input_shape);
    registry_.slot(input_.key);

    std::mt19937_64 rng(cfg_.seed);
    auto make_param = [&](const std::string& id, const std::string& grad_id,
                          std::vector<std::int64_t> shape, double bound) {
        ParamState p;
        p.value.key = {id, "weights"};
        p.value.shape = shape;
        p.grad.key = {grad_id, "update"};
        p.grad.shape = std::move(shape);
        const auto n = static_cast<std::size_t>(shape_product(p.value.shape));
        p.init.resize(n, 0.0);
        if (bound > 0.0) {
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : p.init) v = dist(rng);
        }
        if (!flex_) p.value.real = p.init;
        registry_.slot(p.value.key);
        registry_.slot(p.grad.key);
        return p;
    };
    auto make_site = [&](const std::string& id, const std::string& use,
                         std::vector<std::int64_t> shape) {
        Site s;
        s.key = {id, use};
        s.shape = std::move(shape);
        registry_.slot(s.key);
        return s;
    };

    std::vector<std::int64_t> cur = spec.input_shape;  // per-sample shape
    int loss_count = 0;
    int idx = 0;
    for (const auto& layer : spec.layers) {
        if (loss_count > 0) throw InvalidSpec("loss layer must be the last layer");
        const std::string tag = std::to_string(idx);
        std::visit(
            overload{
                [&](const Affine& a) {
                    const std::int64_t flat = shape_product(cur);
                    if (flat != a.in)
                        throw InvalidSpec("affine layer " + tag + " expects " +
                                          std::to_string(a.in) + " inputs, got " +
                                          std::to_string(flat));
                    if (a.out < 1) throw InvalidSpec("affine layer " + tag + ": bad width");
                    AffineState L;
                    L.spec = a;
                    L.in_flat = flat;
                    L.in_shape = batched(batch_, cur);
                    const std::string name = "fc" + tag;
                    L.W = make_param(name + ".W", name + ".dW", {a.in, a.out},
                                     std::sqrt(6.0 / (a.in + a.out)));
                    L.b = make_param(name + ".b", name + ".db", {a.out}, 0.0);
                    L.mm = make_site(name + ".mm", "fprop", {batch_, a.out});
                    L.z = make_site(name + ".z", "fprop", {batch_, a.out});
                    L.din = make_site(name + ".dx", "bprop", {batch_, flat});
                    layers_.emplace_back(std::move(L));
                    cur = {a.out};
                },
                [&](const Conv2d& c) {
                    if (cur.size() != 3)
                        throw InvalidSpec("conv layer " + tag + " needs a (c,h,w) input");
                    if (cur[0] != c.in_channels)
                        throw InvalidSpec("conv layer " + tag + ": channel mismatch");
                    ConvState L;
                    L.spec = c;
                    L.dims = realops::Conv2dDims{batch_, cur[0],     cur[1],     cur[2],
                                                 c.out_channels, c.kernel_h, c.kernel_w,
                                                 c.stride,   c.pad};
                    if (!L.dims.valid() || L.dims.out_h() < 1 || L.dims.out_w() < 1)
                        throw InvalidSpec("conv layer " + tag + ": kernel does not fit input");
                    const int fan_in = c.in_channels * c.kernel_h * c.kernel_w;
                    const int fan_out = c.out_channels * c.kernel_h * c.kernel_w;
                    const std::string name = "conv" + tag;
                    L.W = make_param(name + ".W", name + ".dW",
                                     {c.out_channels, c.in_channels, c.kernel_h, c.kernel_w},
                                     std::sqrt(6.0 / (fan_in + fan_out)));
                    L.b = make_param(name + ".b", name + ".db", {c.out_channels}, 0.0);
                    const std::vector<std::int64_t> oshape{batch_, c.out_channels,
                                                           L.dims.out_h(), L.dims.out_w()};
                    L.mm = make_site(name + ".mm", "fprop", oshape);
                    L.z = make_site(name + ".z", "fprop", oshape);
                    L.din = make_site(name + ".dx", "bprop", batched(batch_, cur));
                    cur = {c.out_channels, L.dims.out_h(), L.dims.out_w()};
                    layers_.emplace_back(std::move(L));
                },
                [&](const ReLU&) {
                    ReluState L;
                    const std::string name = "relu" + tag;
                    L.out = make_site(name + ".out", "fprop", batched(batch_, cur));
                    L.din = make_site(name + ".dx", "bprop", batched(batch_, cur));
                    layers_.emplace_back(std::move(L));
                },
                [&](const MaxPool& p) {
                    if (cur.size() != 3)
                        throw InvalidSpec("maxpool layer " + tag + " needs a (c,h,w) input");
                    if (p.k < 1 || cur[1] % p.k != 0 || cur[2] % p.k != 0)
                        throw InvalidSpec("maxpool layer " + tag +
                                          ": window must divide spatial dims");
                    PoolState L;
                    L.k = p.k;
                    L.in_shape = batched(batch_, cur);
                    cur = {cur[0], cur[1] / p.k, cur[2] / p.k};
                    L.out_shape = batched(batch_, cur);
                    const std::string name = "pool" + tag;
                    L.out = make_site(name + ".out", "fprop", L.out_shape);
                    L.din = make_site(name + ".dx", "bprop", L.in_shape);
                    layers_.emplace_back(std::move(L));
                },
                [&](const SoftmaxCrossEntropy&) {
                    if (cur.size() != 1)
                        throw InvalidSpec("loss layer needs a flat (classes) input");
                    classes_ = static_cast<int>(cur[0]);
                    ++loss_count;
                    layers_.emplace_back(LossState{});
                },
            },
            layer);
        ++idx;
    }
    if (loss_count != 1) throw InvalidSpec("model needs exactly one loss layer, last");

    dlogits_.key = {"dlogits", "bprop"};
    dlogits_.shape = {batch_, classes_};
    registry_.slot(dlogits_.key);
}

KernelOutput Model::run_write(Site& site, Phase phase, RunMode mode,
                              const std::function<KernelOutput(KernelMode)>& op) {
    StatsSlot& slot = registry_.slot(site.key);
    if (mode == RunMode::Init) {
        if (!slot.initialized) {
            registry_.set_context(0, Phase::Init);
            const auto outcome = registry_.initialize(site.key, [&](const ExponentState&) {
                return op(KernelMode::StatsOnly).gamma;
            });
            if (outcome.escaped)
                init_warnings_.push_back("init escape on " + site.key.tensor_id + "/" +
                                         site.key.use_id + "; accepted exponent " +
                                         std::to_string(slot.state.exponent));
        }
        return op(KernelMode::WriteAndStats);
    }
    if (mode == RunMode::Eval) return op(KernelMode::WriteAndStats);
    registry_.set_context(iteration_, phase);
    const KernelOutput out = op(KernelMode::WriteAndStats);
    ++kernel_invocations_;
    registry_.adjust(site.key, out.gamma);
    return out;
}

void Model::init_param_scale(ParamState& p) {
    StatsSlot& slot = registry_.slot(p.value.key);
    if (!slot.initialized) {
        const auto outcome = registry_.initialize(p.value.key, [&](const ExponentState& st) {
            return quantize_tensor(p.init, st, fmt_).gamma;
        });
        if (outcome.escaped)
            init_warnings_.push_back("init escape on " + p.value.key.tensor_id +
                                     "/weights; accepted exponent " +
                                     std::to_string(slot.state.exponent));
    }
    p.value.flex =
        from_reals(p.init, p.value.shape, slot.state, fmt_, rounding_, p.value.key.tensor_id);
}

void Model::initialize(const Batch& batch) {
    if (!flex_) {
        initialized_ = true;
        return;
    }
    registry_.set_context(0, Phase::Init);
    for (auto& layer : layers_)
        std::visit(overload{
                       [&](AffineState& L) {
                           init_param_scale(L.W);
                           init_param_scale(L.b);
                       },
                       [&](ConvState& L) {
                           init_param_scale(L.W);
                           init_param_scale(L.b);
                       },
                       [&](auto&) {},
                   },
                   layer);
    forward(batch, RunMode::Init);
    const LossOut lo = loss_from_logits(batch);
    write_dlogits(lo.dlogits, RunMode::Init);
    backward(RunMode::Init);
    initialized_ = true;
}

void Model::forward(const Batch& batch, RunMode mode) {
    if (static_cast<std::int64_t>(batch.x.size()) != batch_ * in_flat_)
        throw ShapeMismatch("batch does not match model input size");
    if (flex_) {
        run_write(input_, Phase::Fprop, mode, [&](KernelMode km) {
            return kernels::quantize_write(batch.x, input_.shape, input_.flex,
                                           registry_.slot(input_.key), km, fmt_, rounding_);
        });
    } else {
        input_.real = batch.x;
    }
    const Site* cur = &input_;
    for (auto& layer : layers_)
        std::visit(overload{
                       [&](AffineState& L) {
                           affine_forward(L, *cur, mode);
                           cur = &L.z;
                       },
                       [&](ConvState& L) {
                           conv_forward(L, *cur, mode);
                           cur = &L.z;
                       },
                       [&](ReluState& L) {
                           relu_forward(L, *cur, mode);
                           cur = &L.out;
                       },
                       [&](PoolState& L) {
                           pool_forward(L, *cur, mode);
                           cur = &L.out;
                       },
                       [&](LossState&) { logits_ = const_cast<Site*>(cur); },
                   },
                   layer);
}

void Model::affine_forward(AffineState& L, const Site& in, RunMode mode) {
    L.input = &in;
    if (!flex_) {
        realops::matmul(in.real, L.W.value.real, L.mm.real, batch_, L.in_flat, L.spec.out);
        realops::bias_add(L.mm.real, L.b.value.real, L.z.real, batch_, L.spec.out);
        return;
    }
    const FlexTensor a2 = as_shape(in.flex, {batch_, L.in_flat});
    run_write(L.mm, Phase::Fprop, mode, [&](KernelMode km) {
        return kernels::matmul(a2, L.W.value.flex, L.mm.flex, registry_.slot(L.mm.key), km, fmt_,
                               rounding_);
    });
    run_write(L.z, Phase::Fprop, mode, [&](KernelMode km) {
        return kernels::bias_add(L.mm.flex, L.b.value.flex, L.z.flex, registry_.slot(L.z.key), km,
                                 fmt_, rounding_);
    });
}

void Model::conv_forward(ConvState& L, const Site& in, RunMode mode) {
    L.input = &in;
    if (!flex_) {
        realops::conv2d(in.real, L.W.value.real, L.mm.real, L.dims);
        realops::bias_add_nchw(L.mm.real, L.b.value.real, L.z.real, L.dims.batch,
                               L.dims.out_channels, L.dims.out_h() * L.dims.out_w());
        return;
    }
    run_write(L.mm, Phase::Fprop, mode, [&](KernelMode km) {
        return kernels::conv2d(in.flex, L.W.value.flex, L.mm.flex, registry_.slot(L.mm.key), km,
                               fmt_, rounding_, L.spec.stride, L.spec.pad);
    });
    run_write(L.z, Phase::Fprop, mode, [&](KernelMode km) {
        return kernels::bias_add(L.mm.flex, L.b.value.flex, L.z.flex, registry_.slot(L.z.key), km,
                                 fmt_, rounding_);
    });
}

void Model::relu_forward(ReluState& L, const Site& in, RunMode mode) {
    L.input = &in;
    if (!flex_) {
        realops::relu(in.real, L.out.real);
        return;
    }
    run_write(L.out, Phase::Fprop, mode, [&](KernelMode km) {
        return kernels::elementwise(kernels::EwOp::Relu, in.flex, nullptr, 0.0, L.out.flex,
                                    registry_.slot(L.out.key), km, fmt_, rounding_);
    });
}

void Model::pool_forward(PoolState& L, const Site& in, RunMode mode) {
    L.input = &in;
    if (!flex_) {
        realops::maxpool(in.real, L.out.real, L.argmax, L.in_shape[0], L.in_shape[1],
                         L.in_shape[2], L.in_shape[3], L.k);
        return;
    }
    run_write(L.out, Phase::Fprop, mode, [&](KernelMode km) {
        return kernels::maxpool(in.flex, L.k, L.out.flex, L.argmax, registry_.slot(L.out.key), km,
                                fmt_, rounding_);
    });
}

LossOut Model::loss_from_logits(const Batch& batch) {
    // the loss interior stays in reals in both arms; in flex mode the logits
    // entering it are the last quantized tensor
    const std::vector<double> logits = flex_ ? to_reals(logits_->flex) : logits_->real;
    return softmax_cross_entropy(logits, batch.y, batch_, classes_);
}

void Model::write_dlogits(const std::vector<double>& dlogits, RunMode mode) {
    if (!flex_) {
        dlogits_.real = dlogits;
        return;
    }
    run_write(dlogits_, Phase::Bprop, mode, [&](KernelMode km) {
        return kernels::quantize_write(dlogits, dlogits_.shape, dlogits_.flex,
                                       registry_.slot(dlogits_.key), km, fmt_, rounding_);
    });
}

void Model::backward(RunMode mode) {
    const Site* delta = &dlogits_;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        const bool first = (std::next(it) == layers_.rend());
        std::visit(overload{
                       [&](AffineState& L) { delta = affine_backward(L, *delta, !first, mode); },
                       [&](ConvState& L) { delta = conv_backward(L, *delta, !first, mode); },
                       [&](ReluState& L) { delta = relu_backward(L, *delta, mode); },
                       [&](PoolState& L) { delta = pool_backward(L, *delta, mode); },
                       [&](LossState&) {},
                   },
                   *it);
    }
}

const Site* Model::affine_backward(AffineState& L, const Site& delta, bool need_din,
                                   RunMode mode) {
    if (!flex_) {
        realops::matmul(L.input->real, delta.real, L.W.grad.real, L.in_flat, batch_, L.spec.out,
                        true, false);
        realops::col_sum(delta.real, L.b.grad.real, batch_, L.spec.out);
        if (need_din)
            realops::matmul(delta.real, L.W.value.real, L.din.real, batch_, L.spec.out, L.in_flat,
                            false, true);
        return need_din ? &L.din : nullptr;
    }
    const FlexTensor a2 = as_shape(L.input->flex, {batch_, L.in_flat});
    const FlexTensor d2 = as_shape(delta.flex, {batch_, L.spec.out});
    run_write(L.W.grad, Phase::Bprop, mode, [&](KernelMode km) {
        return kernels::matmul(a2, d2, L.W.grad.flex, registry_.slot(L.W.grad.key), km, fmt_,
                               rounding_, true, false);
    });
    run_write(L.b.grad, Phase::Bprop, mode, [&](KernelMode km) {
        return kernels::col_sum(d2, L.b.grad.flex, registry_.slot(L.b.grad.key), km, fmt_,
                                rounding_);
    });
    if (!need_din) return nullptr;
    run_write(L.din, Phase::Bprop, mode, [&](KernelMode km) {
        return kernels::matmul(d2, L.W.value.flex, L.din.flex, registry_.slot(L.din.key), km,
                               fmt_, rounding_, false, true);
    });
    return &L.din;
}

const Site* Model::conv_backward(ConvState& L, const Site& delta, bool need_din, RunMode mode) {
    const auto& d = L.dims;
    const std::vector<std::int64_t> dshape{d.batch, d.out_channels, d.out_h(), d.out_w()};
    if (!flex_) {
        realops::conv2d_grad_w(L.input->real, delta.real, L.W.grad.real, d);
        realops::channel_sum_nchw(delta.real, L.b.grad.real, d.batch, d.out_channels,
                                  d.out_h() * d.out_w());
        if (need_din) realops::conv2d_grad_x(delta.real, L.W.value.real, L.din.real, d);
        return need_din ? &L.din : nullptr;
    }
    const FlexTensor d4 = as_shape(delta.flex, dshape);
    run_write(L.W.grad, Phase::Bprop, mode, [&](KernelMode km) {
        return kernels::conv2d_grad_w(L.input->flex, d4, L.W.grad.flex,
                                      registry_.slot(L.W.grad.key), km, fmt_, rounding_,
                                      L.spec.stride, L.spec.pad);
    });
    run_write(L.b.grad, Phase::Bprop, mode, [&](KernelMode km) {
        return kernels::col_sum(d4, L.b.grad.flex, registry_.slot(L.b.grad.key), km, fmt_,
                                rounding_);
    });
    if (!need_din) return nullptr;
    run_write(L.din, Phase::Bprop, mode, [&](KernelMode km) {
        return kernels::conv2d_grad_x(d4, L.W.value.flex, L.din.flex, registry_.slot(L.din.key),
                                      km, fmt_, rounding_, L.spec.stride, L.spec.pad);
    });
    return &L.din;
}

const Site* Model::relu_backward(ReluState& L, const Site& delta, RunMode mode) {
    if (!flex_) {
        realops::relu_grad(delta.real, L.input->real, L.din.real);
        return &L.din;
    }
    const FlexTensor dd = as_shape(delta.flex, L.input->flex.shape);
    run_write(L.din, Phase::Bprop, mode, [&](KernelMode km) {
        return kernels::relu_grad(dd, L.input->flex, L.din.flex, registry_.slot(L.din.key), km,
                                  fmt_, rounding_);
    });
    return &L.din;
}

const Site* Model::pool_backward(PoolState& L, const Site& delta, RunMode mode) {
    if (!flex_) {
        realops::maxpool_grad(delta.real, L.argmax, L.din.real, shape_product(L.in_shape));
        return &L.din;
    }
    const FlexTensor d4 = as_shape(delta.flex, L.out_shape);
    run_write(L.din, Phase::Bprop, mode, [&](KernelMode km) {
        return kernels::maxpool_grad(d4, L.argmax, L.in_shape, L.din.flex,
                                     registry_.slot(L.din.key), km, fmt_, rounding_);
    });
    return &L.din;
}

void Model::update(RunMode mode) {
    // the unscaled loss gradient flows through the deltas; the 1/batch factor
    // folds into the step size so gradient tensors use the full mantissa range
    const double lr_eff = cfg_.lr / batch_;
    auto apply = [&](ParamState& p) {
        if (!flex_) {
            realops::sgd(p.value.real, p.grad.real, lr_eff, p.value.real);
            return;
        }
        run_write(p.value, Phase::Bprop, mode, [&](KernelMode km) {
            return kernels::sgd_update(p.value.flex, p.grad.flex, lr_eff, p.value.flex,
                                       registry_.slot(p.value.key), km, fmt_, rounding_);
        });
    };
    for (auto& layer : layers_)
        std::visit(overload{
                       [&](AffineState& L) {
                           apply(L.W);
                           apply(L.b);
                       },
                       [&](ConvState& L) {
                           apply(L.W);
                           apply(L.b);
                       },
                       [&](auto&) {},
                   },
                   layer);
}

std::pair<double, double> Model::step(const Batch& batch, int iteration) {
    iteration_ = iteration;
    forward(batch, RunMode::Train);
    const LossOut lo = loss_from_logits(batch);
    write_dlogits(lo.dlogits, RunMode::Train);
    backward(RunMode::Train);
    update(RunMode::Train);
    return {lo.loss, lo.accuracy};
}

std::vector<double> Model::forward_logits(const Batch& batch) {
    forward(batch, RunMode::Eval);
    return flex_ ? to_reals(logits_->flex) : logits_->real;
}

Model build_model(const ModelSpec& spec, const TrainConfig& cfg) {
    return Model(spec, cfg);
}

void initialize_exponents(Model& model, const Batch& batch) {
    model.initialize(batch);
}

RunResult train(Model& model, const DataMatrix& data, const TrainConfig& cfg) {
    if (data.d != model.features())
        throw InvalidSpec("dataset features (" + std::to_string(data.d) +
                          ") do not match model input (" + std::to_string(model.features()) +
                          ")");
    if (data.classes > model.classes())
        throw InvalidSpec("dataset has more classes than model outputs");
    if (!model.initialized()) model.initialize(make_batch(data, 0, cfg.batch_size));

    RunResult res;
    res.loss.reserve(static_cast<std::size_t>(cfg.iterations));
    res.accuracy.reserve(static_cast<std::size_t>(cfg.iterations));
    for (int t = 1; t <= cfg.iterations; ++t) {
        const Batch b = make_batch(data, t - 1, cfg.batch_size);
        const auto [loss, acc] = model.step(b, t);
        res.loss.push_back(loss);
        res.accuracy.push_back(acc);
    }
    res.overflow_total = model.registry().total_overflows();
    res.window_clamp_total = model.registry().total_window_clamps();
    res.kernel_invocations = model.kernel_invocations();
    res.trace = std::move(model.trace_log().records);
    res.warnings = model.init_warnings();
    return res;
}

RunResult run_training(const ModelSpec& spec, const DataMatrix& data, const TrainConfig& cfg) {
    Model model(spec, cfg);
    return train(model, data, cfg);
}

std::vector<double> trailing_mean(const std::vector<double>& xs, int window) {
    std::vector<double> out(xs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        acc += xs[i];
        if (i >= static_cast<std::size_t>(window)) acc -= xs[i - window];
        out[i] = acc / static_cast<double>(std::min<std::size_t>(i + 1, window));
    }
    return out;
}

void export_curve(const RunResult& result, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open curve file '" + path + "' for writing");
    os << "iteration,loss,accuracy\n";
    char buf[96];
    for (std::size_t i = 0; i < result.loss.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i + 1, result.loss[i],
                      result.accuracy[i]);
        os << buf;
    }
    if (!os) throw IoError("failed writing curve file '" + path + "'");
}

Curve read_curve_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open curve file '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || line != "iteration,loss,accuracy")
        throw IoError("curve file '" + path + "': unexpected header");
    Curve c;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        if (!std::getline(ss, field, ',')) throw IoError("curve file: short row");
        if (!std::getline(ss, field, ',')) throw IoError("curve file: short row");
        c.loss.push_back(std::stod(field));
        if (!std::getline(ss, field, ',')) throw IoError("curve file: short row");
        c.accuracy.push_back(std::stod(field));
    }
    if (c.loss.empty()) throw IoError("curve file '" + path + "': no rows");
    return c;
}

}  // namespace flexsim::nn
