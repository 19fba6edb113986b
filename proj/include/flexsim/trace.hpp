#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace flexsim {

enum class Phase { Init, Fprop, Bprop };

std::string_view phase_name(Phase p);

/// One row of the exponent-evolution log: the state a slot was in when a
/// kernel reported gamma, and the prediction made from it. phi is always
/// gamma * kappa with the raw (pre-doubling) gamma.
struct TraceRecord {
    int iteration = 0;
    std::string tensor_id;
    std::string use_id;
    Phase phase = Phase::Init;
    std::int64_t gamma = 0;
    int exponent = 0;
    double kappa = 1.0;
    double phi = 0.0;
    double chi = 0.0;  // 0 during init, where no prediction exists
    bool overflow = false;
};

struct TraceLog {
    bool enabled = false;
    std::vector<TraceRecord> records;
};

// CSV column order is a stable external contract:
// iteration,tensor_id,use_id,phase,gamma,exponent,kappa,phi,chi,overflow
void write_trace_csv(std::ostream& os, std::span<const TraceRecord> records);
void export_trace(std::span<const TraceRecord> records, const std::string& path);
std::vector<TraceRecord> read_trace_csv(std::istream& is);

}  // namespace flexsim
