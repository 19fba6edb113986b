#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flexsim/autoflex.hpp"
#include "flexsim/dataset.hpp"
#include "flexsim/kernels.hpp"
#include "flexsim/tensor.hpp"
#include "flexsim/trace.hpp"

namespace flexsim::nn {

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

struct Affine {
    int in, out;
};
struct Conv2d {
    int in_channels, out_channels, kernel_h, kernel_w;
    int stride = 1, pad = 0;
};
struct ReLU {};
struct MaxPool {
    int k;
};
struct SoftmaxCrossEntropy {};

using LayerSpec = std::variant<Affine, Conv2d, ReLU, MaxPool, SoftmaxCrossEntropy>;

struct ModelSpec {
    std::vector<std::int64_t> input_shape;  // per-sample, e.g. {64} or {1, 8, 8}
    std::vector<LayerSpec> layers;

    static ModelSpec mlp(int in, int hidden, int classes);
    /// Conv(c->filters, 3x3, pad 1) -> ReLU -> MaxPool(2) -> Affine -> loss
    static ModelSpec convnet(int channels, int height, int width, int filters, int classes);
};

struct TrainConfig {
    std::string format = "flex16+5";  // flexN+M, or "reference" for the unquantized arm
    int iterations = 400;
    int batch_size = 32;
    double lr = 0.1;
    std::uint64_t seed = 1;
    AutoflexConfig autoflex{};
    RoundingMode rounding = RoundingMode::NearestEven;
    std::uint64_t rounding_seed = 0;
    bool trace = false;
};

inline bool is_reference_format(const std::string& f) { return f == "reference"; }

// ---------------------------------------------------------------------------
// Runtime state
// ---------------------------------------------------------------------------

/// One registered tensor: a (tensor_id, use_id) slot key plus storage for
/// whichever arm is active.
struct Site {
    TensorUseKey key;
    std::vector<std::int64_t> shape;
    FlexTensor flex;
    std::vector<double> real;
};

struct ParamState {
    Site value;                // use "weights"; written by init and sgd_update
    Site grad;                 // use "update"
    std::vector<double> init;  // seed-derived initial values, shared by both arms
};

struct AffineState {
    Affine spec;
    std::int64_t in_flat = 0;
    std::vector<std::int64_t> in_shape;
    ParamState W, b;
    Site mm, z, din;
    const Site* input = nullptr;
};

struct ConvState {
    Conv2d spec;
    realops::Conv2dDims dims{};
    ParamState W, b;
    Site mm, z, din;
    const Site* input = nullptr;
};

struct ReluState {
    Site out, din;
    const Site* input = nullptr;
};

struct PoolState {
    int k = 2;
    std::vector<std::int64_t> in_shape, out_shape;
    Site out, din;
    std::vector<std::int64_t> argmax;
    const Site* input = nullptr;
};

struct LossState {};

using LayerState = std::variant<AffineState, ConvState, ReluState, PoolState, LossState>;

struct LossOut {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<double> dlogits;  // softmax - onehot, unscaled (lr folds in 1/batch)
};

LossOut softmax_cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels,
                              int batch, int classes);

enum class RunMode { Init, Train, Eval };

/// A feed-forward model instantiated for one training arm. All state is
/// owned here; the training loop mutates it serially.
class Model {
  public:
    Model(const ModelSpec& spec, const TrainConfig& cfg);

    bool is_flex() const { return flex_; }
    bool initialized() const { return initialized_; }
    const FlexFormat& format() const { return fmt_; }
    SlotRegistry& registry() { return registry_; }
    TraceLog& trace_log() { return trace_; }
    int batch_size() const { return batch_; }
    int classes() const { return classes_; }
    std::int64_t features() const { return in_flat_; }
    std::int64_t kernel_invocations() const { return kernel_invocations_; }
    const std::vector<std::string>& init_warnings() const { return init_warnings_; }

    std::vector<LayerState>& layers() { return layers_; }
    Site& input_site() { return input_; }
    Site& dlogits_site() { return dlogits_; }

    /// Exponent initialization: Algorithm-1 loops of stats-only kernel calls
    /// over every registered slot, materializing each tensor only after its
    /// scale settles. No-op in reference mode.
    void initialize(const Batch& batch);

    /// One training iteration: forward, loss, backward, parameter update.
    /// In flex mode every kernel write is followed by a scale adjustment.
    std::pair<double, double> step(const Batch& batch, int iteration);

    /// Forward pass only; returns the real-valued logits.
    std::vector<double> forward_logits(const Batch& batch);

  private:
    void build(const ModelSpec& spec);
    void forward(const Batch& batch, RunMode mode);
    void backward(RunMode mode);
    void update(RunMode mode);
    LossOut loss_from_logits(const Batch& batch);
    void write_dlogits(const std::vector<double>& dlogits, RunMode mode);
    KernelOutput run_write(Site& site, Phase phase, RunMode mode,
                           const std::function<KernelOutput(KernelMode)>& op);
    void init_param_scale(ParamState& p);
    void affine_forward(AffineState& L, const Site& in, RunMode mode);
    void conv_forward(ConvState& L, const Site& in, RunMode mode);
    void relu_forward(ReluState& L, const Site& in, RunMode mode);
    void pool_forward(PoolState& L, const Site& in, RunMode mode);
    const Site* affine_backward(AffineState& L, const Site& delta, bool need_din, RunMode mode);
    const Site* conv_backward(ConvState& L, const Site& delta, bool need_din, RunMode mode);
    const Site* relu_backward(ReluState& L, const Site& delta, RunMode mode);
    const Site* pool_backward(PoolState& L, const Site& delta, RunMode mode);

    bool flex_ = false;
    FlexFormat fmt_{16, 5};
    TrainConfig cfg_;
    int batch_ = 0;
    int classes_ = 0;
    std::int64_t in_flat_ = 0;
    SlotRegistry registry_;
    Rounding rounding_;
    TraceLog trace_;
    Site input_, dlogits_;
    std::vector<LayerState> layers_;
    Site* logits_ = nullptr;
    bool initialized_ = false;
    int iteration_ = 0;
    std::int64_t kernel_invocations_ = 0;
    std::vector<std::string> init_warnings_;
};

Model build_model(const ModelSpec& spec, const TrainConfig& cfg);
void initialize_exponents(Model& model, const Batch& batch);

struct RunResult {
    std::vector<double> loss;
    std::vector<double> accuracy;
    std::int64_t overflow_total = 0;
    std::int64_t window_clamp_total = 0;
    std::int64_t kernel_invocations = 0;
    std::vector<TraceRecord> trace;
    std::vector<std::string> warnings;
};

RunResult train(Model& model, const DataMatrix& data, const TrainConfig& cfg);

/// build + initialize + train in one call.
RunResult run_training(const ModelSpec& spec, const DataMatrix& data, const TrainConfig& cfg);

/// Trailing moving average; entry t averages the last `window` points up to t.
std::vector<double> trailing_mean(const std::vector<double>& xs, int window);

// curve CSV: iteration,loss,accuracy
void export_curve(const RunResult& result, const std::string& path);
struct Curve {
    std::vector<double> loss, accuracy;
};
Curve read_curve_csv(const std::string& path);

}  // namespace flexsim::nn
