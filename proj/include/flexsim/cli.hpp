#pragma once

#include <iosfwd>
#include <set>
#include <string>

#include "flexsim/autoflex.hpp"
#include "flexsim/nn.hpp"

namespace flexsim::cli {

// Stable exit-code contract
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kUsageError = 2;
inline constexpr int kThresholdFail = 3;

struct TrainOptions {
    std::string format = "flex16+5";  // flexN+M or "reference"
    std::string model = "mlp";        // mlp | convnet
    int iters = 400;
    int batch = 32;
    double lr = 0.1;
    std::uint64_t seed = 1;
    std::string out;
    bool trace = false;
    std::string data;  // optional CSV dataset; synthetic blobs otherwise
    AutoflexConfig autoflex{};
};

/// Trains one arm and writes curve.csv, optional trace.csv and the resolved
/// config into the output directory. The FLEXSIM_TRACE=1 environment variable
/// forces tracing on.
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);

/// Applies a line-oriented key=value config file to any option the caller did
/// not set explicitly (precedence: defaults < config file < flags). Unknown
/// keys or unparsable values return kUsageError.
int apply_train_config(const std::string& path, const std::set<std::string>& explicit_flags,
                       TrainOptions& opt, std::ostream& err);

struct CompareOptions {
    std::string run_a;
    std::string run_b;  // baseline
    double tol = 0.02;
    int smooth_window = 25;
};

/// Compares two run directories on their smoothed learning curves. Exit 0 if
/// the final smoothed loss of run_a is within tol relative of run_b.
int cmd_compare(const CompareOptions& opt, std::ostream& out, std::ostream& err);

struct ReplayOptions {
    std::string stream_file;  // one real max-value per line
    std::string format = "flex16+5";
    AutoflexConfig autoflex{};
    std::string out_csv;  // empty: CSV to stdout, summary to stderr
};

struct ReplayStep {
    std::int64_t gamma = 0;
    double kappa = 1.0;
    double chi = 0.0;
    bool overflow = false;
};

struct ReplayResult {
    int init_calls = 0;
    std::vector<ReplayStep> steps;
    std::int64_t overflows = 0;
};

/// Pure replay engine: scale init on the first value, then one adjustment per
/// stream value. Each step records the state the value was quantized under.
ReplayResult replay_stream(const std::vector<double>& values, const FlexFormat& fmt,
                           const AutoflexConfig& cfg);

int cmd_autoflex_replay(const ReplayOptions& opt, std::ostream& out, std::ostream& err);

struct QuantizeOptions {
    std::string input_file;  // whitespace- or comma-separated reals
    std::string format = "flex16+5";
};

/// Picks a scale for the input vector by trial-and-error initialization and
/// prints the chosen exponent, gamma, bit utilization and the tensor dump.
int cmd_quantize(const QuantizeOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace flexsim::cli
