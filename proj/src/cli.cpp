#include "flexsim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "flexsim/dataset.hpp"

namespace flexsim::cli {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool trace_forced_by_env() {
    const char* v = std::getenv("FLEXSIM_TRACE");
    return v != nullptr && std::string(v) == "1";
}

std::vector<double> read_real_vector(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::vector<double> values;
    std::string tok;
    while (is >> tok) {
        // commas are separators too
        std::replace(tok.begin(), tok.end(), ',', ' ');
        std::istringstream ss(tok);
        std::string part;
        while (ss >> part) {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(part, &used);
            } catch (const std::exception&) {
                throw IoError("bad value '" + part + "' in '" + path + "'");
            }
            if (used != part.size()) throw IoError("bad value '" + part + "' in '" + path + "'");
            values.push_back(v);
        }
    }
    return values;
}

}  // namespace

int apply_train_config(const std::string& path, const std::set<std::string>& explicit_flags,
                       TrainOptions& opt, std::ostream& err) {
    std::ifstream is(path);
    if (!is) {
        err << "error: cannot open config file '" << path << "'\n";
        return kUsageError;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            err << "error: " << path << ":" << lineno << ": expected key=value\n";
            return kUsageError;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (explicit_flags.count(key)) continue;  // flags win over the file
        try {
            if (key == "format") opt.format = value;
            else if (key == "model") opt.model = value;
            else if (key == "iters") opt.iters = std::stoi(value);
            else if (key == "batch") opt.batch = std::stoi(value);
            else if (key == "lr") opt.lr = std::stod(value);
            else if (key == "seed") opt.seed = std::stoull(value);
            else if (key == "out") opt.out = value;
            else if (key == "trace") opt.trace = std::stoi(value) != 0;
            else if (key == "data") opt.data = value;
            else if (key == "alpha") opt.autoflex.alpha = std::stod(value);
            else if (key == "beta") opt.autoflex.beta = std::stod(value);
            else if (key == "gamma") opt.autoflex.gamma = std::stod(value);
            else if (key == "window") opt.autoflex.window = std::stoi(value);
            else {
                err << "error: " << path << ":" << lineno << ": unknown key '" << key << "'\n";
                return kUsageError;
            }
        } catch (const std::exception&) {
            err << "error: " << path << ":" << lineno << ": bad value for '" << key << "'\n";
            return kUsageError;
        }
    }
    return kOk;
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
    nn::TrainConfig cfg;
    cfg.format = opt.format;
    if (!nn::is_reference_format(opt.format)) {
        try {
            (void)parse_format(opt.format);
        } catch (const FormatError& e) {
            err << "error: " << e.what() << "\n";
            return kUsageError;
        }
    }
    if (opt.model != "mlp" && opt.model != "convnet") {
        err << "error: unknown model '" << opt.model << "' (expected mlp or convnet)\n";
        return kUsageError;
    }
    if (opt.iters < 1 || opt.batch < 1 || opt.out.empty()) {
        err << "error: need --iters >= 1, --batch >= 1 and a non-empty --out\n";
        return kUsageError;
    }
    cfg.iterations = opt.iters;
    cfg.batch_size = opt.batch;
    cfg.lr = opt.lr;
    cfg.seed = opt.seed;
    cfg.autoflex = opt.autoflex;
    cfg.trace = opt.trace || trace_forced_by_env();

    try {
        const DataMatrix data =
            opt.data.empty() ? make_blobs(10, 64, 10000, opt.seed) : load_csv_dataset(opt.data);

        nn::ModelSpec spec;
        if (opt.model == "mlp") {
            spec = nn::ModelSpec::mlp(data.d, 128, data.classes);
        } else {
            const int side = static_cast<int>(std::lround(std::sqrt(double(data.d))));
            if (side * side != data.d) {
                err << "error: convnet needs a square feature count, got "
                    << std::to_string(data.d) << "\n";
                return kUsageError;
            }
            spec = nn::ModelSpec::convnet(1, side, side, 4, data.classes);
        }

        const auto result = nn::run_training(spec, data, cfg);
        for (const auto& w : result.warnings) err << "warning: " << w << "\n";

        namespace fs = std::filesystem;
        fs::create_directories(opt.out);
        nn::export_curve(result, (fs::path(opt.out) / "curve.csv").string());
        if (cfg.trace) export_trace(result.trace, (fs::path(opt.out) / "trace.csv").string());

        std::ofstream cfg_os(fs::path(opt.out) / "config.txt");
        cfg_os << "format=" << cfg.format << "\n"
               << "model=" << opt.model << "\n"
               << "iters=" << cfg.iterations << "\n"
               << "batch=" << cfg.batch_size << "\n"
               << "lr=" << fmt_double(cfg.lr) << "\n"
               << "seed=" << cfg.seed << "\n"
               << "trace=" << (cfg.trace ? 1 : 0) << "\n"
               << "data=" << opt.data << "\n"
               << "alpha=" << fmt_double(cfg.autoflex.alpha) << "\n"
               << "beta=" << fmt_double(cfg.autoflex.beta) << "\n"
               << "gamma=" << fmt_double(cfg.autoflex.gamma) << "\n"
               << "window=" << cfg.autoflex.window << "\n";
        if (!cfg_os) throw IoError("failed writing resolved config");

        out << "iterations " << result.loss.size() << "\n";
        out << "final_loss " << fmt_double(result.loss.back()) << "\n";
        out << "final_accuracy " << fmt_double(result.accuracy.back()) << "\n";
        out << "overflows " << result.overflow_total << "\n";
        out << "kernel_invocations " << result.kernel_invocations << "\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

int cmd_compare(const CompareOptions& opt, std::ostream& out, std::ostream& err) {
    namespace fs = std::filesystem;
    nn::Curve a, b;
    try {
        a = nn::read_curve_csv((fs::path(opt.run_a) / "curve.csv").string());
        b = nn::read_curve_csv((fs::path(opt.run_b) / "curve.csv").string());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }
    if (a.loss.size() != b.loss.size()) {
        err << "error: curves have different lengths (" << a.loss.size() << " vs "
            << b.loss.size() << ")\n";
        return kUsageError;
    }

    const auto sa = nn::trailing_mean(a.loss, opt.smooth_window);
    const auto sb = nn::trailing_mean(b.loss, opt.smooth_window);
    const auto aa = nn::trailing_mean(a.accuracy, opt.smooth_window);
    const auto ab = nn::trailing_mean(b.accuracy, opt.smooth_window);

    double max_gap = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i)
        max_gap = std::max(max_gap, std::fabs(sa[i] - sb[i]));
    const double fa = sa.back(), fb = sb.back();
    const double rel = std::fabs(fa - fb) / (std::fabs(fb) > 0 ? std::fabs(fb) : 1.0);
    const double acc_diff = std::fabs(aa.back() - ab.back());

    out << "final_smoothed_loss_a " << fmt_double(fa) << "\n";
    out << "final_smoothed_loss_b " << fmt_double(fb) << "\n";
    out << "final_loss_rel_diff " << fmt_double(rel) << "\n";
    out << "max_smoothed_loss_gap " << fmt_double(max_gap) << "\n";
    out << "final_smoothed_accuracy_a " << fmt_double(aa.back()) << "\n";
    out << "final_smoothed_accuracy_b " << fmt_double(ab.back()) << "\n";
    out << "final_accuracy_diff " << fmt_double(acc_diff) << "\n";
    out << "tolerance " << fmt_double(opt.tol) << "\n";

    // NaN-safe: any non-comparable value fails
    const bool pass = rel <= opt.tol;
    out << "result " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? kOk : kThresholdFail;
}

ReplayResult replay_stream(const std::vector<double>& values, const FlexFormat& fmt,
                           const AutoflexConfig& cfg) {
    if (values.empty()) throw IoError("replay: empty stream");
    ReplayResult res;
    StatsSlot slot;
    // a stats-only kernel call on a tensor whose max-abs value is v
    auto stats = [&](const ExponentState& st) {
        return std::abs(
            static_cast<std::int64_t>(quantize_value(values.front(), st, fmt).mantissa));
    };
    const auto outcome = initialize_scale(slot, fmt, stats);
    res.init_calls = outcome.calls;

    for (double v : values) {
        ReplayStep step;
        step.kappa = slot.state.scale;
        const auto q = quantize_value(v, slot.state, fmt);
        step.gamma = std::abs(static_cast<std::int64_t>(q.mantissa));
        step.overflow = q.overflowed;
        if (step.overflow) ++res.overflows;
        adjust_scale(slot, step.gamma, cfg, fmt);
        step.chi = slot.last_chi;
        res.steps.push_back(step);
    }
    return res;
}

int cmd_autoflex_replay(const ReplayOptions& opt, std::ostream& out, std::ostream& err) {
    std::vector<double> values;
    FlexFormat fmt{16, 5};
    try {
        fmt = parse_format(opt.format);
        values = read_real_vector(opt.stream_file);
        if (values.empty()) throw IoError("stream '" + opt.stream_file + "' has no values");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }
    try {
        const auto res = replay_stream(values, fmt, opt.autoflex);

        std::ofstream file;
        const bool to_file = !opt.out_csv.empty();
        if (to_file) {
            file.open(opt.out_csv);
            if (!file) throw IoError("cannot open '" + opt.out_csv + "' for writing");
        }
        std::ostream& csv = to_file ? static_cast<std::ostream&>(file) : out;
        csv << "gamma,kappa,chi,overflow\n";
        for (const auto& s : res.steps)
            csv << s.gamma << ',' << fmt_double(s.kappa) << ',' << fmt_double(s.chi) << ','
                << (s.overflow ? 1 : 0) << '\n';

        std::ostream& summary = to_file ? out : err;
        summary << "steps " << res.steps.size() << "\n";
        summary << "init_calls " << res.init_calls << "\n";
        summary << "overflows " << res.overflows << "\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

int cmd_quantize(const QuantizeOptions& opt, std::ostream& out, std::ostream& err) {
    std::vector<double> values;
    FlexFormat fmt{16, 5};
    try {
        fmt = parse_format(opt.format);
        values = read_real_vector(opt.input_file);
        if (values.empty()) throw IoError("input '" + opt.input_file + "' has no values");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }
    try {
        StatsSlot slot;
        const auto outcome = initialize_scale(slot, fmt, [&](const ExponentState& st) {
            return quantize_tensor(values, st, fmt).gamma;
        });
        if (outcome.escaped)
            err << "warning: scale search did not settle (all-zero or window-limited input); "
                   "accepted exponent "
                << slot.state.exponent << "\n";

        const FlexTensor t = from_reals(
            values, {static_cast<std::int64_t>(values.size())}, slot.state, fmt, "quantize");
        const int used_bits =
            t.gamma > 0 ? ceil_log2(t.gamma + 1) : 0;  // significant bits of gamma
        out << "exponent " << slot.state.exponent << "\n";
        out << "kappa " << fmt_double(slot.state.scale) << "\n";
        out << "gamma " << t.gamma << "\n";
        out << "utilization_bits " << used_bits << "/" << (fmt.mantissa_bits - 1) << "\n";
        out << "init_calls " << outcome.calls << "\n";
        write_dump(out, t, fmt);
        return kOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

}  // namespace flexsim::cli
