#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "normgrad/gdnp.hpp"
#include "normgrad/harness.hpp"
#include "normgrad/losses.hpp"
#include "normgrad/mlp.hpp"
#include "normgrad/probe.hpp"
#include "normgrad/rayleigh.hpp"

namespace py = pybind11;
using namespace normgrad;

namespace {

LossSpec loss_from_name(const std::string& name) {
    if (name == "softplus") return LossSpec::softplus();
    if (name == "sigmoid") return LossSpec::sigmoid();
    if (name == "quadratic") return LossSpec::quadratic();
    if (name == "linear") return LossSpec::linear();
    if (name == "tanh") return LossSpec::tanh_act();
    throw py::value_error("unknown loss: " + name);
}

ProbeLoss probe_loss_from_name(const std::string& name) {
    if (name == "quadratic") return ProbeLoss::quadratic;
    if (name == "softplus") return ProbeLoss::softplus;
    if (name == "cross_entropy") return ProbeLoss::cross_entropy;
    throw py::value_error("unknown probe loss: " + name);
}

GdnpConfig gdnp_config(int t_d, int t_s, double bracket_lo, double bracket_hi, int g_inner_steps,
                       double lr_g, int renorm_every) {
    GdnpConfig c;
    c.t_d = t_d;
    c.t_s = t_s;
    c.bracket_lo = bracket_lo;
    c.bracket_hi = bracket_hi;
    c.g_inner_steps = g_inner_steps;
    c.lr_g = lr_g;
    c.renorm_every = renorm_every;
    return c;
}

py::dict halfspace_trace_dict(const std::vector<HalfspaceTraceRecord>& trace) {
    py::list t, objective, grad_norm_sinv, g, s_t, rho_col, sin2;
    for (const auto& r : trace) {
        t.append(r.t);
        objective.append(r.objective);
        grad_norm_sinv.append(r.grad_tilde_norm_sinv);
        g.append(r.g);
        s_t.append(r.s_t);
        rho_col.append(r.rho);
        sin2.append(r.sin2);
    }
    py::dict d;
    d["t"] = t;
    d["objective"] = objective;
    d["grad_norm_sinv_sq"] = grad_norm_sinv;
    d["g"] = g;
    d["s_t"] = s_t;
    d["rho"] = rho_col;
    d["sin2"] = sin2;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Length-direction decoupled gradient methods";

    py::class_<SpdModel, std::shared_ptr<SpdModel>>(m, "Model")
        .def(py::init([](const Eigen::VectorXd& u, const Eigen::MatrixXd& sigma) {
                 return std::make_shared<SpdModel>(u, SpdMatrix(sigma));
             }),
             py::arg("u"), py::arg("sigma"))
        .def_property_readonly("u", [](const SpdModel& m_) { return m_.u; })
        .def_property_readonly("sigma", [](const SpdModel& m_) { return m_.sigma.entries(); })
        .def_property_readonly("lambda1", [](const SpdModel& m_) { return m_.lambda1; })
        .def_property_readonly("mu", [](const SpdModel& m_) { return m_.sigma.mu(); })
        .def_property_readonly("L", [](const SpdModel& m_) { return m_.sigma.big_l(); })
        .def("dim", &SpdModel::dim);

    m.def(
        "synth_model",
        [](int d, double mu, double big_l, std::uint64_t seed) {
            return std::make_shared<SpdModel>(synth_model(d, mu, big_l, seed));
        },
        py::arg("d"), py::arg("mu"), py::arg("L"), py::arg("seed"));

    m.def(
        "rho", [](const Eigen::VectorXd& w, const SpdModel& mdl) { return rho(w, mdl); },
        py::arg("w"), py::arg("model"));
    m.def(
        "grad_rho",
        [](const Eigen::VectorXd& w, const SpdModel& mdl) { return grad_rho(w, mdl); },
        py::arg("w"), py::arg("model"));
    m.def(
        "optimal_scale",
        [](const Eigen::VectorXd& w, const SpdModel& mdl) { return optimal_scale(w, mdl); },
        py::arg("w"), py::arg("model"));
    m.def(
        "dominant_direction", [](const SpdModel& mdl) { return dominant_direction(mdl); },
        py::arg("model"));

    m.def(
        "solve_ols",
        [](const SpdModel& mdl, const Eigen::VectorXd& w0, int steps) {
            const OlsSolveResult res = solve_ols_gdnp(mdl, w0, steps);
            py::list rho_col, sin2, grad_norm, eta;
            for (const auto& r : res.trace) {
                rho_col.append(r.rho);
                sin2.append(r.sin2);
                grad_norm.append(r.grad_norm_sinv);
                eta.append(r.eta);
            }
            py::dict d;
            d["w"] = res.w;
            d["g"] = res.g;
            d["w_tilde"] = res.w_tilde;
            d["rho"] = rho_col;
            d["sin2"] = sin2;
            d["grad_norm_sinv"] = grad_norm;
            d["eta"] = eta;
            return d;
        },
        py::arg("model"), py::arg("w0"), py::arg("steps"));

    py::class_<HalfspaceProblem>(m, "HalfspaceProblem")
        .def_static(
            "analytic",
            [](const std::string& loss, std::shared_ptr<SpdModel> mdl, int nodes) {
                return HalfspaceProblem::analytic(loss_from_name(loss), mdl,
                                                  ExpectationEngine::gauss_hermite(nodes));
            },
            py::arg("loss"), py::arg("model"), py::arg("nodes") = 64)
        .def_static(
            "empirical",
            [](const std::string& loss, const Eigen::MatrixXd& z, double ridge) {
                auto data = std::make_shared<EmpiricalDataset>();
                data->z = z;
                data->centered = true;
                return HalfspaceProblem::empirical(loss_from_name(loss), data, ridge);
            },
            py::arg("loss"), py::arg("z"), py::arg("ridge") = -1.0)
        .def("objective", &HalfspaceProblem::objective, py::arg("w_tilde"))
        .def("gradient", &HalfspaceProblem::gradient_tilde, py::arg("w_tilde"))
        .def_property_readonly("u", [](const HalfspaceProblem& p) { return p.u(); })
        .def_property_readonly("sigma",
                               [](const HalfspaceProblem& p) { return p.sigma().entries(); })
        .def_property_readonly("zeta", [](const HalfspaceProblem& p) { return p.zeta(); });

    m.def(
        "stein_coeffs",
        [](const std::string& loss, const Eigen::VectorXd& w_tilde, const SpdModel& mdl,
           int nodes) {
            const SteinCoeffs c = stein_coeffs(loss_from_name(loss), w_tilde, mdl,
                                               ExpectationEngine::gauss_hermite(nodes));
            return py::make_tuple(c.c1, c.c2);
        },
        py::arg("loss"), py::arg("w_tilde"), py::arg("model"), py::arg("nodes") = 64);

    m.def(
        "find_init",
        [](const HalfspaceProblem& p, std::uint64_t seed) { return find_init(p, seed); },
        py::arg("problem"), py::arg("seed"));

    m.def(
        "gdnp",
        [](const HalfspaceProblem& p, const Eigen::VectorXd& w0, double g0, int t_d, int t_s,
           double bracket_lo, double bracket_hi, int g_inner_steps, double lr_g,
           int renorm_every) {
            const GdnpResult res =
                gdnp_run(p,
                         gdnp_config(t_d, t_s, bracket_lo, bracket_hi, g_inner_steps, lr_g,
                                     renorm_every),
                         w0, g0);
            py::dict d = halfspace_trace_dict(res.trace);
            d["w"] = res.state.w;
            d["g_final"] = res.state.g;
            d["w_tilde"] = res.w_tilde;
            return d;
        },
        py::arg("problem"), py::arg("w0"), py::arg("g0") = 1.0, py::arg("t_d") = 100,
        py::arg("t_s") = 40, py::arg("bracket_lo") = -8.0, py::arg("bracket_hi") = 8.0,
        py::arg("g_inner_steps") = 0, py::arg("lr_g") = 0.0, py::arg("renorm_every") = 100);

    m.def(
        "gd",
        [](const HalfspaceProblem& p, const Eigen::VectorXd& w_tilde0, double stepsize,
           int steps) {
            const BaselineResult res = gd_run(p, w_tilde0, stepsize, steps);
            py::dict d = halfspace_trace_dict(res.trace);
            d["w_tilde"] = res.w_tilde;
            return d;
        },
        py::arg("problem"), py::arg("w_tilde0"), py::arg("stepsize"), py::arg("steps"));

    m.def(
        "train_mlp",
        [](const std::string& outer, const SpdModel& mdl, int units, int t_d, int t_s,
           int t_s_warm, int samples, std::uint64_t seed) {
            MlpGdnpConfig cfg;
            cfg.unit.t_d = t_d;
            cfg.unit.t_s = t_s;
            cfg.unit.t_s_warm = t_s_warm;
            cfg.samples = samples;
            cfg.seed = seed;
            const MlpTrainResult res = train_mlp_gdnp(loss_from_name(outer), mdl, units, cfg);
            py::list dirs, scales, grads;
            for (int i = 0; i < res.params.units(); ++i) {
                dirs.append(res.params.dirs[static_cast<std::size_t>(i)]);
                scales.append(res.params.scales(i));
                grads.append(res.unit_traces[static_cast<std::size_t>(i)].empty()
                                 ? 0.0
                                 : res.unit_traces[static_cast<std::size_t>(i)]
                                       .back()
                                       .grad_tilde_norm_sinv);
            }
            py::dict d;
            d["dirs"] = dirs;
            d["scales"] = scales;
            d["final_grad_norm_sinv_sq"] = grads;
            d["c"] = res.c;
            return d;
        },
        py::arg("outer"), py::arg("model"), py::arg("units"), py::arg("t_d") = 200,
        py::arg("t_s") = 40, py::arg("t_s_warm") = 12, py::arg("samples") = 200000,
        py::arg("seed") = 1);

    py::class_<ProbeData>(m, "ProbeData")
        .def_property_readonly("x", [](const ProbeData& d) { return d.x; })
        .def_property_readonly("targets", [](const ProbeData& d) { return d.targets; })
        .def_property_readonly("labels", [](const ProbeData& d) { return d.labels; });

    m.def(
        "make_probe_data",
        [](int n, int in_dim, int out_dim, const std::string& loss, std::uint64_t seed) {
            return make_probe_data(n, in_dim, out_dim, probe_loss_from_name(loss), seed);
        },
        py::arg("n"), py::arg("in_dim"), py::arg("out_dim"), py::arg("loss"), py::arg("seed"));

    py::class_<ProbeNet>(m, "ProbeNet")
        .def_static(
            "make",
            [](int in_dim, const std::vector<int>& hidden, int out_dim, bool bn,
               std::uint64_t seed) { return ProbeNet::make(in_dim, hidden, out_dim, bn, seed); },
            py::arg("in_dim"), py::arg("hidden"), py::arg("out_dim"), py::arg("bn"),
            py::arg("seed"))
        .def_property_readonly("weights", [](const ProbeNet& n) { return n.weights; })
        .def_property_readonly("bn", [](const ProbeNet& n) { return n.bn; });

    m.def(
        "probe_loss",
        [](const ProbeNet& net, const std::string& loss, const ProbeData& data) {
            return probe_loss(net, probe_loss_from_name(loss), data);
        },
        py::arg("net"), py::arg("loss"), py::arg("data"));

    m.def(
        "cross_dependency",
        [](const ProbeNet& net, int layer_i, int layer_j, const std::string& loss,
           const ProbeData& data) {
            return cross_dependency(net, layer_i, layer_j, probe_loss_from_name(loss), data);
        },
        py::arg("net"), py::arg("layer_i"), py::arg("layer_j"), py::arg("loss"), py::arg("data"));

    m.def(
        "train_probe",
        [](ProbeNet& net, const std::string& loss, const ProbeData& data, int steps, double lr,
           double lr_g_multiplier) {
            ProbeTrainConfig cfg;
            cfg.steps = steps;
            cfg.lr = lr;
            cfg.lr_g_multiplier = lr_g_multiplier;
            const auto recs = train_probe(net, probe_loss_from_name(loss), data, cfg);
            py::list loss_col, grad_col;
            for (const auto& r : recs) {
                loss_col.append(r.loss);
                grad_col.append(r.grad_norm);
            }
            py::dict d;
            d["loss"] = loss_col;
            d["grad_norm"] = grad_col;
            return d;
        },
        py::arg("net"), py::arg("loss"), py::arg("data"), py::arg("steps") = 200,
        py::arg("lr") = 0.05, py::arg("lr_g_multiplier") = 10.0);

    m.def(
        "run_experiment_config",
        [](const std::string& experiment, const std::string& config_path) {
            const ExperimentConfig cfg = load_config(config_path, experiment);
            const ExperimentOutputs outs = run_experiment(cfg);
            return py::make_tuple(outs.trace_path, outs.summary_path);
        },
        py::arg("experiment"), py::arg("config_path"));
}
