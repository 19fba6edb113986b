#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flexsim/autoflex.hpp"
#include "flexsim/cli.hpp"
#include "flexsim/dataset.hpp"
#include "flexsim/format.hpp"
#include "flexsim/kernels.hpp"
#include "flexsim/nn.hpp"
#include "flexsim/tensor.hpp"

namespace py = pybind11;
using namespace flexsim;

namespace {

// keyword-driven training entry point for quick experiments from python
py::dict train_run(const std::string& format, const std::string& model, int iters, int batch,
                   double lr, std::uint64_t seed, bool trace) {
    const DataMatrix data = make_blobs(10, 64, 10000, seed);
    nn::ModelSpec spec;
    if (model == "mlp")
        spec = nn::ModelSpec::mlp(data.d, 128, data.classes);
    else if (model == "convnet")
        spec = nn::ModelSpec::convnet(1, 8, 8, 4, data.classes);
    else
        throw std::invalid_argument("model must be 'mlp' or 'convnet'");
    nn::TrainConfig cfg;
    cfg.format = format;
    cfg.iterations = iters;
    cfg.batch_size = batch;
    cfg.lr = lr;
    cfg.seed = seed;
    cfg.trace = trace;
    const auto res = nn::run_training(spec, data, cfg);

    py::dict out;
    out["loss"] = res.loss;
    out["accuracy"] = res.accuracy;
    out["overflows"] = res.overflow_total;
    out["kernel_invocations"] = res.kernel_invocations;
    if (trace) {
        py::list rows;
        for (const auto& r : res.trace) {
            py::dict row;
            row["iteration"] = r.iteration;
            row["tensor_id"] = r.tensor_id;
            row["use_id"] = r.use_id;
            row["phase"] = std::string(phase_name(r.phase));
            row["gamma"] = r.gamma;
            row["exponent"] = r.exponent;
            row["kappa"] = r.kappa;
            row["phi"] = r.phi;
            row["chi"] = r.chi;
            row["overflow"] = r.overflow;
            rows.append(std::move(row));
        }
        out["trace"] = std::move(rows);
    }
    return out;
}

py::dict replay(const std::vector<double>& values, const std::string& format, double alpha,
                double beta, double gamma, int window) {
    const AutoflexConfig cfg{alpha, beta, gamma, window};
    const auto res = cli::replay_stream(values, parse_format(format), cfg);
    py::dict out;
    std::vector<std::int64_t> gammas;
    std::vector<double> kappas, chis;
    std::vector<bool> overflows;
    for (const auto& s : res.steps) {
        gammas.push_back(s.gamma);
        kappas.push_back(s.kappa);
        chis.push_back(s.chi);
        overflows.push_back(s.overflow);
    }
    out["gamma"] = gammas;
    out["kappa"] = kappas;
    out["chi"] = chis;
    out["overflow"] = overflows;
    out["init_calls"] = res.init_calls;
    out["overflows"] = res.overflows;
    return out;
}

}  // namespace

PYBIND11_MODULE(flexsim, m) {
    m.doc() = "Shared-exponent (flexN+M) tensor format simulator with predictive "
              "exponent management";

    py::register_exception<FlexError>(m, "FlexError");

    py::class_<FlexFormat>(m, "FlexFormat")
        .def(py::init<int, int>(), py::arg("mantissa_bits"), py::arg("exponent_bits"))
        .def_readonly("mantissa_bits", &FlexFormat::mantissa_bits)
        .def_readonly("exponent_bits", &FlexFormat::exponent_bits)
        .def("mantissa_max", &FlexFormat::mantissa_max)
        .def("exponent_min", &FlexFormat::exponent_min)
        .def("exponent_max", &FlexFormat::exponent_max)
        .def("__str__", &FlexFormat::str)
        .def("__repr__", [](const FlexFormat& f) { return "FlexFormat('" + f.str() + "')"; });

    py::class_<ExponentState>(m, "ExponentState")
        .def_readonly("exponent", &ExponentState::exponent)
        .def_readonly("scale", &ExponentState::scale)
        .def_static("from_exponent", &ExponentState::from_exponent, py::arg("exponent"));

    m.def("parse_format", &parse_format, py::arg("s"), "Parse a flexN+M format string");
    m.def("scale_from_exponent", &scale_from_exponent, py::arg("exponent"), py::arg("fmt"));

    m.def(
        "quantize_value",
        [](double x, const ExponentState& st, const FlexFormat& fmt) {
            const auto q = quantize_value(x, st, fmt);
            return py::make_tuple(q.mantissa, q.overflowed);
        },
        py::arg("x"), py::arg("state"), py::arg("fmt"),
        "Returns (mantissa, overflowed) under nearest-even rounding");
    m.def(
        "quantize_tensor",
        [](const std::vector<double>& xs, const ExponentState& st, const FlexFormat& fmt) {
            const auto q = quantize_tensor(xs, st, fmt);
            return py::make_tuple(q.mantissas, q.gamma, q.overflowed);
        },
        py::arg("xs"), py::arg("state"), py::arg("fmt"),
        "Returns (mantissas, gamma, overflowed)");
    m.def(
        "dequantize_tensor",
        [](const std::vector<std::int32_t>& ms, const ExponentState& st) {
            return dequantize_tensor(ms, st);
        },
        py::arg("mantissas"), py::arg("state"));
    m.def(
        "representable_range",
        [](const ExponentState& st, const FlexFormat& fmt) {
            const auto r = representable_range(st, fmt);
            return py::make_tuple(r.min_real, r.max_real, r.epsilon);
        },
        py::arg("state"), py::arg("fmt"), "Returns (min_real, max_real, epsilon)");

    py::class_<AutoflexConfig>(m, "AutoflexConfig")
        .def(py::init([](double alpha, double beta, double gamma, int window) {
                 AutoflexConfig c{alpha, beta, gamma, window};
                 validate(c);
                 return c;
             }),
             py::arg("alpha") = 2.0, py::arg("beta") = 3.0, py::arg("gamma") = 100.0,
             py::arg("window") = 16)
        .def_readwrite("alpha", &AutoflexConfig::alpha)
        .def_readwrite("beta", &AutoflexConfig::beta)
        .def_readwrite("gamma", &AutoflexConfig::gamma)
        .def_readwrite("window", &AutoflexConfig::window);

    py::class_<StatsSlot>(m, "StatsSlot")
        .def(py::init<>())
        .def_property_readonly("history",
                               [](const StatsSlot& s) {
                                   return std::vector<double>(s.history.begin(),
                                                              s.history.end());
                               })
        .def_property_readonly("exponent",
                               [](const StatsSlot& s) { return s.state.exponent; })
        .def_property_readonly("kappa", [](const StatsSlot& s) { return s.state.scale; })
        .def_readonly("initialized", &StatsSlot::initialized)
        .def_readonly("overflow_count", &StatsSlot::overflow_count)
        .def_readonly("last_chi", &StatsSlot::last_chi);

    m.def(
        "init_step",
        [](StatsSlot& slot, std::int64_t gamma, const FlexFormat& fmt) {
            const auto r = init_step(slot, gamma, fmt);
            return py::make_tuple(r.kappa, r.initialized);
        },
        py::arg("slot"), py::arg("gamma"), py::arg("fmt"),
        "One trial-and-error initialization step; returns (kappa, initialized)");
    m.def("adjust_scale", &adjust_scale, py::arg("slot"), py::arg("gamma"), py::arg("cfg"),
          py::arg("fmt"), "One predictive scale adjustment; returns the new kappa");
    m.def(
        "predict_chi",
        [](const std::vector<double>& hist, double kappa, const AutoflexConfig& cfg) {
            return predict_chi(std::deque<double>(hist.begin(), hist.end()), kappa, cfg);
        },
        py::arg("history"), py::arg("kappa"), py::arg("cfg"));
    m.def("reset_stats", &reset_stats, py::arg("slot"));

    m.def(
        "fixed_point_mul_check",
        [](const std::vector<std::int32_t>& ma, int ea, const std::vector<std::int32_t>& mb,
           int eb, int e_out) {
            FlexTensor a, b;
            a.mantissas = ma;
            a.shape = {static_cast<std::int64_t>(ma.size())};
            a.state = ExponentState::from_exponent(ea);
            b.mantissas = mb;
            b.shape = {static_cast<std::int64_t>(mb.size())};
            b.state = ExponentState::from_exponent(eb);
            return kernels::fixed_point_mul_check(a, b, e_out);
        },
        py::arg("mantissas_a"), py::arg("exponent_a"), py::arg("mantissas_b"),
        py::arg("exponent_b"), py::arg("e_out"),
        "Integer-only elementwise product; requires e_out == exponent_a + exponent_b");

    m.def("replay_stream", &replay, py::arg("values"), py::arg("format") = "flex16+5",
          py::arg("alpha") = 2.0, py::arg("beta") = 3.0, py::arg("gamma") = 100.0,
          py::arg("window") = 16,
          "Replay scale initialization and adjustment over a recorded max-value stream");

    m.def("train_run", &train_run, py::arg("format") = "flex16+5", py::arg("model") = "mlp",
          py::arg("iters") = 400, py::arg("batch") = 32, py::arg("lr") = 0.1,
          py::arg("seed") = 1, py::arg("trace") = false,
          "Train on the synthetic blob dataset; returns curves and overflow counts");
}
