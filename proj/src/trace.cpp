#include "flexsim/trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "flexsim/errors.hpp"

namespace flexsim {

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::Init: return "init";
        case Phase::Fprop: return "fprop";
        case Phase::Bprop: return "bprop";
    }
    return "?";
}

namespace {

Phase phase_from_name(const std::string& s) {
    if (s == "init") return Phase::Init;
    if (s == "fprop") return Phase::Fprop;
    if (s == "bprop") return Phase::Bprop;
    throw IoError("trace csv: unknown phase '" + s + "'");
}

// %.17g round-trips doubles exactly
std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_trace_csv(std::ostream& os, std::span<const TraceRecord> records) {
    os << "iteration,tensor_id,use_id,phase,gamma,exponent,kappa,phi,chi,overflow\n";
    for (const auto& r : records) {
        os << r.iteration << ',' << r.tensor_id << ',' << r.use_id << ',' << phase_name(r.phase)
           << ',' << r.gamma << ',' << r.exponent << ',' << fmt_double(r.kappa) << ','
           << fmt_double(r.phi) << ',' << fmt_double(r.chi) << ',' << (r.overflow ? 1 : 0)
           << '\n';
    }
}

void export_trace(std::span<const TraceRecord> records, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open trace file '" + path + "' for writing");
    write_trace_csv(os, records);
    if (!os) throw IoError("failed writing trace file '" + path + "'");
}

std::vector<TraceRecord> read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("trace csv: empty file");
    if (line != "iteration,tensor_id,use_id,phase,gamma,exponent,kappa,phi,chi,overflow")
        throw IoError("trace csv: unexpected header");
    std::vector<TraceRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        TraceRecord r;
        auto next = [&]() {
            if (!std::getline(ss, field, ',')) throw IoError("trace csv: short row");
            return field;
        };
        r.iteration = std::stoi(next());
        r.tensor_id = next();
        r.use_id = next();
        r.phase = phase_from_name(next());
        r.gamma = std::stoll(next());
        r.exponent = std::stoi(next());
        r.kappa = std::stod(next());
        r.phi = std::stod(next());
        r.chi = std::stod(next());
        r.overflow = std::stoi(next()) != 0;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace flexsim
