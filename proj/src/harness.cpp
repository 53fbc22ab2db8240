#include "normgrad/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "normgrad/mlp.hpp"
#include "normgrad/probe.hpp"
#include "normgrad/rayleigh.hpp"
#include "normgrad/rng.hpp"

namespace normgrad {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is separated from the value by whitespace,
// so bare # inside values (paths) survives.
std::string strip_comment(const std::string& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((s[i] == '#' || s[i] == ';') &&
            (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t')) {
            return s.substr(0, i);
        }
    }
    return s;
}

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                                t0)
        .count();
}

}  // namespace

IniDoc IniDoc::parse_text(const std::string& text) {
    IniDoc doc;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
            }
            doc.data_[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        if (section.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": key outside any [section]");
        }
        doc.data_[section][key] = value;
    }
    return doc;
}

IniDoc IniDoc::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

bool IniDoc::has(const std::string& sec, const std::string& key) const {
    auto it = data_.find(sec);
    return it != data_.end() && it->second.count(key) > 0;
}

std::string IniDoc::get(const std::string& sec, const std::string& key,
                        const std::string& fallback) const {
    auto it = data_.find(sec);
    if (it == data_.end()) return fallback;
    auto jt = it->second.find(key);
    return jt == it->second.end() ? fallback : jt->second;
}

double IniDoc::get_num(const std::string& sec, const std::string& key, double fallback) const {
    if (!has(sec, key)) return fallback;
    const std::string v = get(sec, key);
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config [" + sec + "] " + key + ": not a number: " + v);
    }
}

long IniDoc::get_int(const std::string& sec, const std::string& key, long fallback) const {
    if (!has(sec, key)) return fallback;
    const std::string v = get(sec, key);
    try {
        std::size_t pos = 0;
        long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config [" + sec + "] " + key + ": not an integer: " + v);
    }
}

std::vector<std::string> IniDoc::get_list(const std::string& sec, const std::string& key) const {
    std::vector<std::string> out;
    std::string v = get(sec, key);
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            cur = trim(cur);
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
    return out;
}

LossSpec parse_loss(const std::string& name) {
    if (name == "softplus") return LossSpec::softplus();
    if (name == "sigmoid") return LossSpec::sigmoid();
    if (name == "quadratic") return LossSpec::quadratic();
    throw ConfigError("unknown loss: " + name + " (expected softplus, sigmoid or quadratic)");
}

namespace {

ProbeLoss parse_probe_loss(const std::string& name) {
    if (name == "quadratic") return ProbeLoss::quadratic;
    if (name == "softplus") return ProbeLoss::softplus;
    if (name == "cross_entropy") return ProbeLoss::cross_entropy;
    throw ConfigError("unknown probe loss: " + name +
                      " (expected quadratic, softplus or cross_entropy)");
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> k = {
        {"experiment", {"kind", "loss", "iters", "out", "methods", "seeds"}},
        {"source", {"kind", "d", "mu", "L", "seed", "nodes", "path", "ridge"}},
        {"gdnp", {"t_s", "bracket_lo", "bracket_hi", "g_inner_steps", "lr_g", "renorm_every"}},
        {"gd", {"stepsize"}},
        {"agd", {"stepsize", "momentum"}},
        {"bn", {"stepsize", "lr_g"}},
        {"wn", {"stepsize", "lr_g"}},
        {"mlp", {"units", "samples", "t_s_warm"}},
        {"probe",
         {"depth", "width", "in_dim", "out_dim", "n", "lr", "lr_g_multiplier", "dep_every",
          "pairs"}},
    };
    return k;
}

void validate_keys(const IniDoc& ini) {
    const auto& allowed = allowed_keys();
    for (const auto& [sec, kv] : ini.sections()) {
        auto it = allowed.find(sec);
        if (it == allowed.end()) throw ConfigError("unknown config section [" + sec + "]");
        for (const auto& [key, _] : kv) {
            if (!it->second.count(key)) {
                throw ConfigError("unknown config key [" + sec + "] " + key);
            }
        }
    }
}

const std::set<std::string>& methods_for(const std::string& experiment) {
    static const std::map<std::string, std::set<std::string>> m = {
        {"ols", {"gdnp"}},
        {"halfspace", {"gdnp", "gd", "agd", "bn", "wn"}},
        {"mlp", {"gdnp"}},
        {"crossdep", {"gd", "bn"}},
    };
    auto it = m.find(experiment);
    if (it == m.end()) {
        throw ConfigError("unknown experiment: " + experiment +
                          " (expected ols, halfspace, mlp or crossdep)");
    }
    return it->second;
}

std::vector<std::string> default_methods(const std::string& experiment) {
    if (experiment == "halfspace") return {"gdnp", "gd"};
    if (experiment == "crossdep") return {"bn", "gd"};
    return {"gdnp"};
}

std::vector<std::uint64_t> default_seeds(const std::string& experiment) {
    if (experiment == "mlp") return {1};
    int n = experiment == "crossdep" ? 5 : 10;
    std::vector<std::uint64_t> s(n);
    for (int i = 0; i < n; ++i) s[i] = static_cast<std::uint64_t>(i + 1);
    return s;
}

}  // namespace

ExperimentConfig config_from_ini(const IniDoc& ini, const std::string& experiment) {
    validate_keys(ini);
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    methods_for(experiment);  // rejects unknown experiment names

    const std::string ini_kind = ini.get("experiment", "kind");
    if (!ini_kind.empty() && ini_kind != experiment) {
        throw ConfigError("config kind '" + ini_kind + "' does not match requested experiment '" +
                          experiment + "'");
    }

    cfg.loss = ini.get("experiment", "loss",
                       experiment == "crossdep" ? "quadratic" : "softplus");
    cfg.iters = static_cast<int>(ini.get_int("experiment", "iters", 100));
    if (cfg.iters < 0) throw ConfigError("iters must be >= 0");
    cfg.out = ini.get("experiment", "out");

    cfg.methods = ini.get_list("experiment", "methods");
    if (cfg.methods.empty()) cfg.methods = default_methods(experiment);
    const auto& allowed = methods_for(experiment);
    for (const auto& m : cfg.methods) {
        if (!allowed.count(m)) {
            throw ConfigError("method '" + m + "' is not available for experiment '" + experiment +
                              "'");
        }
    }

    for (const auto& s : ini.get_list("experiment", "seeds")) {
        try {
            cfg.seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
            throw ConfigError("bad seed value: " + s);
        }
    }
    if (cfg.seeds.empty()) cfg.seeds = default_seeds(experiment);

    cfg.source = ini.get("source", "kind", "gaussian");
    if (cfg.source != "gaussian" && cfg.source != "libsvm") {
        throw ConfigError("unknown source kind: " + cfg.source);
    }
    cfg.d = static_cast<int>(ini.get_int("source", "d", 20));
    cfg.mu = ini.get_num("source", "mu", 1.0);
    cfg.big_l = ini.get_num("source", "L", 10.0);
    cfg.source_seed = static_cast<std::uint64_t>(ini.get_int("source", "seed", 7));
    cfg.quad_nodes = static_cast<int>(ini.get_int("source", "nodes", 64));
    cfg.libsvm_path = ini.get("source", "path");
    cfg.ridge = ini.get_num("source", "ridge", -1.0);
    if (cfg.source == "libsvm" && cfg.libsvm_path.empty()) {
        throw ConfigError("source kind libsvm requires [source] path");
    }
    if (cfg.quad_nodes < 2) throw ConfigError("[source] nodes must be >= 2");

    cfg.gdnp.t_s = static_cast<int>(ini.get_int("gdnp", "t_s", 40));
    cfg.gdnp.bracket_lo = ini.get_num("gdnp", "bracket_lo", -8.0);
    cfg.gdnp.bracket_hi = ini.get_num("gdnp", "bracket_hi", 8.0);
    cfg.gdnp.g_inner_steps = static_cast<int>(ini.get_int("gdnp", "g_inner_steps", 0));
    cfg.gdnp.lr_g = ini.get_num("gdnp", "lr_g", 0.0);
    cfg.gdnp.renorm_every = static_cast<int>(ini.get_int("gdnp", "renorm_every", 100));
    if (!(cfg.gdnp.bracket_lo < cfg.gdnp.bracket_hi)) {
        throw ConfigError("[gdnp] bracket_lo must be below bracket_hi");
    }
    if (cfg.gdnp.t_s < 1) throw ConfigError("[gdnp] t_s must be >= 1");

    for (const char* m : {"gd", "agd", "bn", "wn"}) {
        MethodSettings ms;
        ms.stepsize = ini.get_num(m, "stepsize", 0.0);
        ms.lr_g = ini.get_num(m, "lr_g", 0.0);
        ms.momentum = ini.get_num(m, "momentum", -1.0);
        cfg.method_settings[m] = ms;
    }

    cfg.mlp_units = static_cast<int>(ini.get_int("mlp", "units", 4));
    cfg.mlp_samples = static_cast<int>(ini.get_int("mlp", "samples", 200000));
    cfg.mlp_t_s_warm = static_cast<int>(ini.get_int("mlp", "t_s_warm", 12));
    if (cfg.mlp_units < 1) throw ConfigError("[mlp] units must be >= 1");
    if (cfg.mlp_samples < 1) throw ConfigError("[mlp] samples must be >= 1");

    cfg.probe.depth = static_cast<int>(ini.get_int("probe", "depth", 4));
    cfg.probe.width = static_cast<int>(ini.get_int("probe", "width", 16));
    cfg.probe.in_dim = static_cast<int>(ini.get_int("probe", "in_dim", 8));
    cfg.probe.out_dim = static_cast<int>(ini.get_int("probe", "out_dim", 3));
    cfg.probe.n = static_cast<int>(ini.get_int("probe", "n", 128));
    cfg.probe.lr = ini.get_num("probe", "lr", 0.05);
    cfg.probe.lr_g_multiplier = ini.get_num("probe", "lr_g_multiplier", 10.0);
    cfg.probe.dep_every = static_cast<int>(ini.get_int("probe", "dep_every", 0));
    for (const auto& pr : ini.get_list("probe", "pairs")) {
        auto colon = pr.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("[probe] pairs entries must look like i:j, got " + pr);
        }
        try {
            int i = std::stoi(pr.substr(0, colon));
            int j = std::stoi(pr.substr(colon + 1));
            cfg.probe.dep_pairs.emplace_back(i, j);
        } catch (const std::exception&) {
            throw ConfigError("[probe] bad pair: " + pr);
        }
    }
    if (cfg.probe.depth < 1 || cfg.probe.width < 1 || cfg.probe.in_dim < 1 ||
        cfg.probe.out_dim < 1 || cfg.probe.n < 1) {
        throw ConfigError("[probe] sizes must be positive");
    }
    for (auto [i, j] : cfg.probe.dep_pairs) {
        if (i < 0 || j < 0 || i > cfg.probe.depth || j > cfg.probe.depth) {
            throw ConfigError("[probe] pair layer index out of range");
        }
    }
    if (cfg.probe.dep_every > 0 && cfg.probe.dep_pairs.empty()) {
        throw ConfigError("[probe] dep_every needs a nonempty pairs list");
    }

    if (experiment == "halfspace" || experiment == "mlp") {
        parse_loss(cfg.loss);
    } else if (experiment == "crossdep") {
        parse_probe_loss(cfg.loss);
    }
    if (experiment != "halfspace" && cfg.source == "libsvm") {
        throw ConfigError("source kind libsvm is only available for the halfspace experiment");
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::string& experiment) {
    return config_from_ini(IniDoc::parse_file(path), experiment);
}

SpdModel synth_model(int d, double mu, double big_l, std::uint64_t seed) {
    if (d < 2) throw ConfigError("synth_model: d must be >= 2");
    if (!(mu > 0.0) || !(big_l >= mu)) throw ConfigError("synth_model: need 0 < mu <= L");
    Eigen::MatrixXd sigma;
    if (mu == big_l) {
        sigma = mu * Eigen::MatrixXd::Identity(d, d);
    } else {
        Rng rng(seed, "synth_model");
        Eigen::MatrixXd a(d, d);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) a(r, c) = rng.normal();
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        Eigen::MatrixXd q = qr.householderQ();
        Eigen::VectorXd lam(d);
        for (int i = 0; i < d; ++i) {
            lam(i) = mu + (big_l - mu) * static_cast<double>(i) / static_cast<double>(d - 1);
        }
        sigma = q * lam.asDiagonal() * q.transpose();
        sigma = (0.5 * (sigma + sigma.transpose())).eval();
    }
    SpdMatrix s(sigma);

    Rng urng(seed, "synth_model_u");
    Eigen::VectorXd u(d);
    for (int i = 0; i < d; ++i) u(i) = urng.normal();
    u.normalize();
    // Shrink until the implied covariance sigma - u u' is safely positive
    // definite (u' sigma^{-1} u < 1 with margin).
    int halvings = 0;
    while (s.inv_quad(u) >= 0.99) {
        u *= 0.5;
        if (++halvings > 200) throw std::logic_error("synth_model: u shrink loop stuck");
    }
    return SpdModel(std::move(u), std::move(s));
}

std::string default_out_dir() {
    const char* env = std::getenv("NORMGRAD_OUT_DIR");
    return env && *env ? env : ".";
}

namespace {

std::string summary_path_for(const std::string& trace_path) {
    const std::string suffix = ".csv";
    if (trace_path.size() > suffix.size() &&
        trace_path.compare(trace_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
        return trace_path.substr(0, trace_path.size() - suffix.size()) + ".summary.csv";
    }
    return trace_path + ".summary.csv";
}

void ensure_parent_dir(const std::string& path) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

void run_ols(const ExperimentConfig& cfg, TraceFile& tf) {
    if (cfg.source != "gaussian") throw ConfigError("ols requires the gaussian source");
    const SpdModel model = synth_model(cfg.d, cfg.mu, cfg.big_l, cfg.source_seed);
    const Eigen::VectorXd v1 = dominant_direction(model);
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
        const auto t0 = std::chrono::steady_clock::now();
        const Eigen::VectorXd w0 = find_init(model, cfg.seeds[si]);
        const OlsSolveResult res = solve_ols_gdnp(model, w0, cfg.iters, cfg.gdnp.renorm_every);
        const std::int64_t wall = elapsed_ns(t0);
        for (const auto& rec : res.trace) {
            TraceRow row;
            row.method = "gdnp";
            row.run_id = static_cast<int>(si);
            row.iter = rec.t;
            row.objective = rec.rho + model.lambda1;
            row.grad_norm = rec.grad_norm_sinv;
            row.rho = rec.rho;
            row.sin2 = rec.sin2;
            row.g = optimal_scale(res.iterates[static_cast<std::size_t>(rec.t)], model);
            row.stepsize = rec.eta;
            row.wall_ns = wall;
            tf.add(std::move(row));
        }
        // The per-step records describe pre-step states; close with the
        // final iterate so the trace covers all iters+1 visited points.
        TraceRow last;
        last.method = "gdnp";
        last.run_id = static_cast<int>(si);
        last.iter = cfg.iters;
        const Eigen::VectorXd& wf = res.w;
        const double rho_f = rho(wf, model);
        last.objective = rho_f + model.lambda1;
        last.grad_norm = std::sqrt(model.sigma.inv_quad(grad_rho(wf, model)));
        last.rho = rho_f;
        last.sin2 = sin2_s_angle(wf, v1, model.sigma);
        last.g = res.g;
        last.stepsize = rho_f == 0.0 ? 0.0 : rayleigh_stepsize(wf, model);
        last.wall_ns = wall;
        tf.add(std::move(last));
    }
}

HalfspaceProblem build_halfspace(const ExperimentConfig& cfg) {
    const LossSpec loss = parse_loss(cfg.loss);
    if (cfg.source == "gaussian") {
        auto model = std::make_shared<SpdModel>(synth_model(cfg.d, cfg.mu, cfg.big_l,
                                                            cfg.source_seed));
        return HalfspaceProblem::analytic(loss, std::move(model),
                                          ExpectationEngine::gauss_hermite(cfg.quad_nodes));
    }
    const LabeledData raw = load_libsvm(cfg.libsvm_path);
    auto data = std::make_shared<EmpiricalDataset>(center_and_fold(raw.x, raw.y));
    return HalfspaceProblem::empirical(loss, std::move(data), cfg.ridge);
}

void add_halfspace_rows(TraceFile& tf, const std::string& method, int run_id,
                        const std::vector<HalfspaceTraceRecord>& trace, std::int64_t wall) {
    for (const auto& rec : trace) {
        TraceRow row;
        row.method = method;
        row.run_id = run_id;
        row.iter = rec.t;
        row.objective = rec.objective;
        row.grad_norm = std::sqrt(rec.grad_tilde_norm_sinv);
        row.rho = rec.rho;
        row.sin2 = rec.sin2;
        row.g = rec.g;
        row.stepsize = rec.s_t;
        row.wall_ns = wall;
        tf.add(std::move(row));
    }
}

void run_halfspace(const ExperimentConfig& cfg, TraceFile& tf) {
    const HalfspaceProblem p = build_halfspace(cfg);
    const double default_lr = 1.0 / p.zeta();
    const double default_lr_g = 1.0 / p.loss().curvature_bound();
    for (const auto& method : cfg.methods) {
        const MethodSettings ms = cfg.method_settings.count(method)
                                      ? cfg.method_settings.at(method)
                                      : MethodSettings{};
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            const auto t0 = std::chrono::steady_clock::now();
            const Eigen::VectorXd w0 = find_init(p, cfg.seeds[si]);
            std::vector<HalfspaceTraceRecord> trace;
            if (method == "gdnp") {
                GdnpConfig gc = cfg.gdnp;
                gc.t_d = cfg.iters;
                trace = gdnp_run(p, gc, w0).trace;
            } else if (method == "gd") {
                const Eigen::VectorXd wt0 = w0 / s_norm(w0, p.sigma());
                const double lr = ms.stepsize > 0.0 ? ms.stepsize : default_lr;
                trace = gd_run(p, wt0, lr, cfg.iters).trace;
            } else if (method == "agd") {
                const Eigen::VectorXd wt0 = w0 / s_norm(w0, p.sigma());
                const double lr = ms.stepsize > 0.0 ? ms.stepsize : default_lr;
                trace = agd_run(p, wt0, lr, cfg.iters, ms.momentum).trace;
            } else {
                const double lr_w = ms.stepsize > 0.0 ? ms.stepsize : default_lr;
                const double lr_g = ms.lr_g > 0.0 ? ms.lr_g : default_lr_g;
                NormState st0{w0, 1.0};
                trace = method == "bn" ? bn_gd_run(p, st0, lr_w, lr_g, cfg.iters).trace
                                       : wn_gd_run(p, st0, lr_w, lr_g, cfg.iters).trace;
            }
            add_halfspace_rows(tf, method, static_cast<int>(si), trace, elapsed_ns(t0));
        }
    }
}

void run_mlp(const ExperimentConfig& cfg, TraceFile& tf) {
    if (cfg.source != "gaussian") throw ConfigError("mlp requires the gaussian source");
    const LossSpec outer = parse_loss(cfg.loss);
    const SpdModel model = synth_model(cfg.d, cfg.mu, cfg.big_l, cfg.source_seed);
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
        MlpGdnpConfig mc;
        mc.unit.t_d = cfg.iters;
        mc.unit.t_s = cfg.gdnp.t_s;
        mc.unit.t_s_warm = cfg.mlp_t_s_warm;
        mc.unit.bracket_lo = cfg.gdnp.bracket_lo;
        mc.unit.bracket_hi = cfg.gdnp.bracket_hi;
        mc.unit.renorm_every = cfg.gdnp.renorm_every;
        mc.samples = cfg.mlp_samples;
        mc.seed = cfg.seeds[si];
        const auto t0 = std::chrono::steady_clock::now();
        const MlpTrainResult res = train_mlp_gdnp(outer, model, cfg.mlp_units, mc);
        const std::int64_t wall = elapsed_ns(t0);
        long offset = 0;
        for (const auto& unit_trace : res.unit_traces) {
            long max_t = -1;
            for (const auto& rec : unit_trace) {
                TraceRow row;
                row.method = "gdnp";
                row.run_id = static_cast<int>(si);
                row.iter = offset + rec.t;
                row.objective = rec.objective;
                row.grad_norm = std::sqrt(rec.grad_tilde_norm_sinv);
                row.rho = 0.0;
                row.sin2 = 0.0;
                row.g = rec.g;
                row.stepsize = rec.s_t;
                row.wall_ns = wall;
                tf.add(std::move(row));
                max_t = std::max(max_t, static_cast<long>(rec.t));
            }
            offset += max_t + 1;
        }
    }
}

void run_crossdep(const ExperimentConfig& cfg, const std::string& path) {
    const ProbeLoss loss = parse_probe_loss(cfg.loss);
    const ProbeData data = make_probe_data(cfg.probe.n, cfg.probe.in_dim, cfg.probe.out_dim, loss,
                                           cfg.source_seed);
    const std::vector<int> hidden(static_cast<std::size_t>(cfg.probe.depth), cfg.probe.width);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
    out << "method,run_id,iter,loss,grad_norm";
    for (auto [i, j] : cfg.probe.dep_pairs) out << ",dep_" << i << '_' << j;
    out << "\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << ',' << buf;
    };
    for (const auto& method : cfg.methods) {
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            ProbeNet net = ProbeNet::make(cfg.probe.in_dim, hidden, cfg.probe.out_dim,
                                          method == "bn", cfg.seeds[si]);
            ProbeTrainConfig tc;
            tc.steps = cfg.iters;
            tc.lr = cfg.probe.lr;
            tc.lr_g_multiplier = cfg.probe.lr_g_multiplier;
            tc.dep_every = cfg.probe.dep_every;
            tc.dep_pairs = cfg.probe.dep_pairs;
            const auto recs = train_probe(net, loss, data, tc);
            for (const auto& rec : recs) {
                out << method << ',' << si << ',' << rec.iter;
                put(rec.loss);
                put(rec.grad_norm);
                if (!rec.deps.empty()) {
                    for (double v : rec.deps) put(v);
                } else {
                    for (std::size_t k = 0; k < cfg.probe.dep_pairs.size(); ++k) out << ',';
                }
                out << "\n";
            }
        }
    }
    if (!out) throw std::runtime_error("failed writing trace file: " + path);
}

}  // namespace

ExperimentOutputs run_experiment(const ExperimentConfig& cfg) {
    const auto& allowed = methods_for(cfg.experiment);  // rejects unknown experiment names
    if (cfg.methods.empty()) throw ConfigError("no methods selected");
    for (const auto& m : cfg.methods) {
        if (!allowed.count(m)) {
            throw ConfigError("method '" + m + "' is not available for experiment '" +
                              cfg.experiment + "'");
        }
    }
    if (cfg.seeds.empty()) throw ConfigError("no seeds selected");
    std::string path = cfg.out;
    if (path.empty()) path = default_out_dir() + "/" + cfg.experiment + ".csv";
    ensure_parent_dir(path);

    ExperimentOutputs outs;
    outs.trace_path = path;
    if (cfg.experiment == "crossdep") {
        run_crossdep(cfg, path);
        return outs;
    }

    TraceFile tf;
    if (cfg.experiment == "ols") {
        run_ols(cfg, tf);
    } else if (cfg.experiment == "halfspace") {
        run_halfspace(cfg, tf);
    } else {
        run_mlp(cfg, tf);
    }
    tf.write(path);
    outs.summary_path = summary_path_for(path);
    tf.write_summary(outs.summary_path);
    return outs;
}

}  // namespace normgrad
