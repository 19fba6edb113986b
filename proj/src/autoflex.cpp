#include "flexsim/autoflex.hpp"

#include <algorithm>
#include <cmath>

namespace flexsim {

void validate(const AutoflexConfig& cfg) {
    if (cfg.alpha < 1.0) throw FlexError("autoflex: alpha must be >= 1");
    if (cfg.beta < 0.0) throw FlexError("autoflex: beta must be >= 0");
    if (cfg.gamma < 0.0) throw FlexError("autoflex: gamma must be >= 0");
    if (cfg.window < 1) throw FlexError("autoflex: window must be >= 1");
}

namespace {

// kappa *= 2^k with window clamping, done on the exponent so the scale stays
// an exact power of two.
void scale_up_by(StatsSlot& slot, int k, const FlexFormat& fmt) {
    const int e = slot.state.exponent - k;
    const int clamped = clamp_exponent(e, fmt);
    if (clamped != e) ++slot.window_clamps;
    slot.state = ExponentState::from_exponent(clamped);
}

}  // namespace

InitStep init_step(StatsSlot& slot, std::int64_t gamma, const FlexFormat& fmt) {
    const int n = fmt.mantissa_bits;
    const std::int64_t threshold = fmt.overflow_threshold();
    const int big_jump = (n - 1) / 2;
    ++slot.init_calls;

    if (gamma >= threshold) {
        // overflow: coarsen aggressively and retry
        scale_up_by(slot, big_jump, fmt);
    } else if (gamma < (std::int64_t{1} << (n - 2))) {
        // underutilized: jump straight to the target exponent
        scale_up_by(slot, ceil_log2(std::max<std::int64_t>(gamma, 1)) - (n - 2), fmt);
        // the jump is only trustworthy if enough mantissa bits were observed
        if (gamma > (std::int64_t{1} << (big_jump - 2))) slot.initialized = true;
    } else {
        slot.initialized = true;
    }
    return {slot.state.scale, slot.initialized};
}

double adjust_scale(StatsSlot& slot, std::int64_t gamma, const AutoflexConfig& cfg,
                    const FlexFormat& fmt) {
    if (!slot.initialized)
        throw UninitializedSlot("adjust_scale: slot was never initialized");
    validate(cfg);

    std::int64_t g = gamma;
    if (g >= fmt.overflow_threshold()) {
        // overflow: drop the (saturated, unreliable) history and pretend the
        // value was twice as large, buying one extra bit of range
        slot.history.clear();
        ++slot.overflow_count;
        g *= 2;
    }
    slot.history.push_back(static_cast<double>(g) * slot.state.scale);
    while (static_cast<int>(slot.history.size()) > cfg.window) slot.history.pop_front();

    const double chi = predict_chi(slot.history, slot.state.scale, cfg);
    slot.last_chi = chi;
    if (std::isfinite(chi) && chi > 0.0) {
        const int e = fmt.mantissa_bits - 1 - ceil_log2(chi);
        const int clamped = clamp_exponent(e, fmt);
        if (clamped != e) ++slot.window_clamps;
        slot.state = ExponentState::from_exponent(clamped);
    }
    // chi == 0 happens only with gamma == 0 and an all-zero window: no signal,
    // keep the current scale
    return slot.state.scale;
}

double predict_chi(const std::deque<double>& history, double kappa, const AutoflexConfig& cfg) {
    if (history.empty()) throw EmptyHistory("predict_chi: empty statistics window");
    double maxv = history.front();
    double mean = 0.0;
    for (double v : history) {
        maxv = std::max(maxv, v);
        mean += v;
    }
    mean /= static_cast<double>(history.size());
    double var = 0.0;
    for (double v : history) var += (v - mean) * (v - mean);
    var /= static_cast<double>(history.size());  // population std: count, not count-1
    return cfg.alpha * (maxv + cfg.beta * std::sqrt(var) + cfg.gamma * kappa);
}

void reset_stats(StatsSlot& slot) {
    slot.history.clear();
}

InitOutcome initialize_scale(StatsSlot& slot, const FlexFormat& fmt,
                             const std::function<std::int64_t(const ExponentState&)>& stats_gamma,
                             int max_calls) {
    InitOutcome out;
    while (!slot.initialized && out.calls < max_calls) {
        const std::int64_t gamma = stats_gamma(slot.state);
        init_step(slot, gamma, fmt);
        ++out.calls;
    }
    if (!slot.initialized) {
        // zero-tensor escape: an all-zero buffer can never satisfy the
        // reliability bound, accept whatever scale we reached
        slot.initialized = true;
        out.escaped = true;
    }
    return out;
}

StatsSlot& SlotRegistry::slot(const TensorUseKey& key) {
    return slots_[key];  // default state: kappa = 1, uninitialized
}

const StatsSlot* SlotRegistry::find(const TensorUseKey& key) const {
    auto it = slots_.find(key);
    return it == slots_.end() ? nullptr : &it->second;
}

void SlotRegistry::emit(const TensorUseKey& key, const StatsSlot& before, std::int64_t gamma,
                        double chi, bool overflow) {
    if (!trace_ || !trace_->enabled) return;
    TraceRecord r;
    r.iteration = iteration_;
    r.tensor_id = key.tensor_id;
    r.use_id = key.use_id;
    r.phase = phase_;
    r.gamma = gamma;  // raw kernel value, before any overflow doubling
    r.exponent = before.state.exponent;
    r.kappa = before.state.scale;
    r.phi = static_cast<double>(gamma) * before.state.scale;
    r.chi = chi;
    r.overflow = overflow;
    trace_->records.push_back(std::move(r));
}

InitStep SlotRegistry::init_step(const TensorUseKey& key, std::int64_t gamma) {
    StatsSlot& s = slot(key);
    const StatsSlot before = s;
    const auto step = flexsim::init_step(s, gamma, fmt_);
    emit(key, before, gamma, 0.0, gamma >= fmt_.overflow_threshold());
    return step;
}

double SlotRegistry::adjust(const TensorUseKey& key, std::int64_t gamma) {
    StatsSlot& s = slot(key);
    const StatsSlot before = s;
    const double kappa = adjust_scale(s, gamma, cfg_, fmt_);
    emit(key, before, gamma, s.last_chi, gamma >= fmt_.overflow_threshold());
    return kappa;
}

InitOutcome SlotRegistry::initialize(
    const TensorUseKey& key,
    const std::function<std::int64_t(const ExponentState&)>& stats_gamma, int max_calls) {
    StatsSlot& s = slot(key);
    InitOutcome out;
    while (!s.initialized && out.calls < max_calls) {
        const std::int64_t gamma = stats_gamma(s.state);
        init_step(key, gamma);
        ++out.calls;
    }
    if (!s.initialized) {
        s.initialized = true;
        out.escaped = true;
    }
    return out;
}

std::int64_t SlotRegistry::total_overflows() const {
    std::int64_t n = 0;
    for (const auto& [k, s] : slots_) n += s.overflow_count;
    return n;
}

std::int64_t SlotRegistry::total_window_clamps() const {
    std::int64_t n = 0;
    for (const auto& [k, s] : slots_) n += s.window_clamps;
    return n;
}

}  // namespace flexsim
