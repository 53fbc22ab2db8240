#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "normgrad/gdnp.hpp"
#include "normgrad/losses.hpp"
#include "normgrad/model.hpp"
#include "normgrad/trace.hpp"

namespace normgrad {

// Raised for malformed configs, unknown keys, contradictory settings and
// missing inputs; the CLI maps it to exit code 2. Everything else that
// escapes a run maps to exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat INI document: [section] headers, key = value lines, # or ; comments
// (full line, or trailing when preceded by whitespace). Later duplicates win.
class IniDoc {
public:
    static IniDoc parse_file(const std::string& path);
    static IniDoc parse_text(const std::string& text);

    bool has(const std::string& sec, const std::string& key) const;
    std::string get(const std::string& sec, const std::string& key,
                    const std::string& fallback = "") const;
    double get_num(const std::string& sec, const std::string& key, double fallback) const;
    long get_int(const std::string& sec, const std::string& key, long fallback) const;
    std::vector<std::string> get_list(const std::string& sec, const std::string& key) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return data_;
    }

private:
    std::map<std::string, std::map<std::string, std::string>> data_;
};

struct MethodSettings {
    double stepsize = 0.0;   // 0 picks the curvature-scaled default
    double lr_g = 0.0;       // bn / wn scale stepsize, 0 picks the default
    double momentum = -1.0;  // agd: negative keeps the convex schedule
};

struct ProbeSettings {
    int depth = 4;
    int width = 16;
    int in_dim = 8;
    int out_dim = 3;
    int n = 128;
    double lr = 0.05;
    double lr_g_multiplier = 10.0;
    int dep_every = 0;
    std::vector<std::pair<int, int>> dep_pairs;
};

struct ExperimentConfig {
    std::string experiment;  // ols | halfspace | mlp | crossdep
    std::string loss = "softplus";
    int iters = 100;
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds;
    std::string out;  // trace path; empty derives from the experiment name

    // source
    std::string source = "gaussian";  // gaussian | libsvm
    int d = 20;
    double mu = 1.0;
    double big_l = 10.0;
    std::uint64_t source_seed = 7;
    int quad_nodes = 64;
    std::string libsvm_path;
    double ridge = -1.0;  // empirical second-moment ridge, negative = default

    GdnpConfig gdnp;  // t_d is taken from iters at run time
    std::map<std::string, MethodSettings> method_settings;

    int mlp_units = 4;
    int mlp_samples = 200000;
    int mlp_t_s_warm = 12;

    ProbeSettings probe;
};

// Parses and validates; unknown sections or keys are ConfigError.
ExperimentConfig config_from_ini(const IniDoc& ini, const std::string& experiment);
ExperimentConfig load_config(const std::string& path, const std::string& experiment);

LossSpec parse_loss(const std::string& name);

// Covariance with extreme eigenvalues mu and big_l (a seeded random rotation
// of an interpolating spectrum; mu == big_l yields the exact multiple of the
// identity) and a seeded mean vector halved until the model constraint
// sigma - u u' stays positive definite.
SpdModel synth_model(int d, double mu, double big_l, std::uint64_t seed);

struct ExperimentOutputs {
    std::string trace_path;
    std::string summary_path;  // empty when the experiment writes no summary
};

// Runs every (method, seed) cell and writes the trace CSV (plus a quantile
// summary for the scalar-objective experiments). Throws ConfigError on bad
// settings and propagates solver failures.
ExperimentOutputs run_experiment(const ExperimentConfig& cfg);

// Default output directory: $NORMGRAD_OUT_DIR if set, else the working dir.
std::string default_out_dir();

}  // namespace normgrad
