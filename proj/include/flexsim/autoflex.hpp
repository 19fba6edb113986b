#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>

#include "flexsim/format.hpp"
#include "flexsim/tensor.hpp"
#include "flexsim/trace.hpp"

namespace flexsim {

/// Scale-adjustment hyperparameters: chi = alpha * (max(f) + beta*std(f) + gamma*kappa)
/// over a moving window of length `window`. gamma is in mantissa-LSB units
/// (it multiplies kappa), so the default contributes 100 quantization steps
/// of slack.
struct AutoflexConfig {
    double alpha = 2.0;
    double beta = 3.0;
    double gamma = 100.0;
    int window = 16;
};

void validate(const AutoflexConfig& cfg);  // alpha >= 1, beta,gamma >= 0, window >= 1

/// Per-(tensor, use) exponent-management state.
struct StatsSlot {
    std::deque<double> history;  // phi values, oldest front, capacity = cfg.window
    ExponentState state;         // current kappa / exponent
    bool initialized = false;
    int init_calls = 0;                 // stats-only calls consumed by initialization
    std::int64_t overflow_count = 0;    // overflows seen by adjust_scale (survives resets)
    std::int64_t window_clamps = 0;     // times the exponent hit the M-bit window edge
    double last_chi = 0.0;              // most recent prediction
};

struct InitStep {
    double kappa;
    bool initialized;
};

/// One trial-and-error initialization step. gamma is the max-abs mantissa a
/// stats-only kernel call reported at the slot's current scale. Three branches:
/// overflow -> big scale jump up; underutilization -> jump straight to the
/// target exponent (reliable only when enough bits were seen); otherwise done.
InitStep init_step(StatsSlot& slot, std::int64_t gamma, const FlexFormat& fmt);

/// One predictive scale adjustment after a kernel call that reported gamma.
/// On overflow the history is cleared and gamma doubled before the phi append.
/// Returns the new kappa. Throws UninitializedSlot if init never ran.
double adjust_scale(StatsSlot& slot, std::int64_t gamma, const AutoflexConfig& cfg,
                    const FlexFormat& fmt);

/// chi = alpha * (max(f) + beta*std(f) + gamma*kappa), population std.
/// Throws EmptyHistory on an empty window.
double predict_chi(const std::deque<double>& history, double kappa, const AutoflexConfig& cfg);

/// Clears the statistics window; scale, initialized flag and overflow count survive.
void reset_stats(StatsSlot& slot);

struct InitOutcome {
    int calls = 0;
    bool escaped = false;  // hit the call cap and accepted the current scale
};

/// Runs init_step in a loop, pulling gamma from stats_gamma (a stats-only
/// kernel call at the slot's current scale). All-zero tensors never satisfy
/// the reliability bound, so after max_calls the current scale is accepted
/// as-is and the slot marked initialized.
InitOutcome initialize_scale(StatsSlot& slot, const FlexFormat& fmt,
                             const std::function<std::int64_t(const ExponentState&)>& stats_gamma,
                             int max_calls = 8);

/// Keyed slot store with the trace-emission hook. Every init_step and
/// adjust_scale routed through the registry appends a TraceRecord when
/// tracing is enabled; iteration/phase context comes from the caller.
class SlotRegistry {
  public:
    SlotRegistry(FlexFormat fmt, AutoflexConfig cfg) : fmt_(fmt), cfg_(cfg) { validate(cfg_); }

    const FlexFormat& format() const { return fmt_; }
    const AutoflexConfig& config() const { return cfg_; }

    StatsSlot& slot(const TensorUseKey& key);  // creates at kappa = 1 if missing
    const StatsSlot* find(const TensorUseKey& key) const;

    void set_trace(TraceLog* log) { trace_ = log; }
    void set_context(int iteration, Phase phase) {
        iteration_ = iteration;
        phase_ = phase;
    }

    InitStep init_step(const TensorUseKey& key, std::int64_t gamma);
    double adjust(const TensorUseKey& key, std::int64_t gamma);
    InitOutcome initialize(const TensorUseKey& key,
                           const std::function<std::int64_t(const ExponentState&)>& stats_gamma,
                           int max_calls = 8);

    std::int64_t total_overflows() const;
    std::int64_t total_window_clamps() const;

    using Map = std::unordered_map<TensorUseKey, StatsSlot, TensorUseKeyHash>;
    const Map& slots() const { return slots_; }

  private:
    void emit(const TensorUseKey& key, const StatsSlot& before, std::int64_t gamma, double chi,
              bool overflow);

    FlexFormat fmt_;
    AutoflexConfig cfg_;
    Map slots_;
    TraceLog* trace_ = nullptr;
    int iteration_ = 0;
    Phase phase_ = Phase::Init;
};

}  // namespace flexsim
