// Experiment driver. Exit codes: 0 success, 1 solver/runtime failure,
// 2 configuration problem (bad file, unknown key, invalid combination).
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "normgrad/harness.hpp"

namespace {

struct CliArgs {
    std::string experiment;
    std::string config_path;
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds;
    std::string out;
};

int run(const CliArgs& args) {
    normgrad::ExperimentConfig cfg =
        args.config_path.empty()
            ? normgrad::config_from_ini(normgrad::IniDoc{}, args.experiment)
            : normgrad::load_config(args.config_path, args.experiment);
    if (!args.methods.empty()) cfg.methods = args.methods;
    if (!args.seeds.empty()) cfg.seeds = args.seeds;
    if (!args.out.empty()) cfg.out = args.out;
    const auto outs = normgrad::run_experiment(cfg);
    std::printf("wrote %s\n", outs.trace_path.c_str());
    if (!outs.summary_path.empty()) std::printf("wrote %s\n", outs.summary_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Decoupled length-direction gradient experiments.\n"
        "Traces land in --out, else $NORMGRAD_OUT_DIR/<experiment>.csv, else ./<experiment>.csv."};
    app.require_subcommand(1);

    CliArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "INI config file");
        sub->add_option("--method", args.methods,
                        "Methods to run (repeatable; replaces the configured list)");
        sub->add_option("--seed", args.seeds,
                        "Run seeds (repeatable; replaces the configured list)");
        sub->add_option("--out", args.out, "Trace CSV path");
    };
    add_common(app.add_subcommand("ols", "Least-squares quotient descent (method: gdnp)"));
    add_common(app.add_subcommand(
        "halfspace", "Halfspace learning (methods: gdnp, gd, agd, bn, wn; gaussian or libsvm)"));
    add_common(app.add_subcommand("mlp", "One-hidden-layer tanh network, unit-wise gdnp"));
    add_common(app.add_subcommand(
        "crossdep", "Deep probe cross-layer dependency measurements (methods: gd, bn)"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    args.experiment = app.get_subcommands().front()->get_name();

    try {
        return run(args);
    } catch (const normgrad::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
