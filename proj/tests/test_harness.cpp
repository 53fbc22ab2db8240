#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "normgrad/harness.hpp"
#include "normgrad/rayleigh.hpp"
#include "normgrad/trace.hpp"
#include "testutil.hpp"

using namespace normgrad;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("normgrad_harness_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

ExperimentConfig parse_cfg(const std::string& text, const std::string& experiment) {
    return config_from_ini(IniDoc::parse_text(text), experiment);
}

}  // namespace

TEST_CASE("ini parser handles sections, comments and duplicates") {
    const std::string text =
        "# full line comment\n"
        "[alpha]\n"
        "key = 1\n"
        "key = 2\n"
        "path = /tmp/a#b  ; trailing comment\n"
        "list = x, y ,z,,\n"
        "; another comment\n"
        "[beta]\n"
        "num = 2.5\n"
        "count = 42\n";
    const IniDoc doc = IniDoc::parse_text(text);

    CHECK(doc.has("alpha", "key"));
    CHECK_FALSE(doc.has("alpha", "missing"));
    CHECK_FALSE(doc.has("gamma", "key"));
    CHECK(doc.get("alpha", "key") == "2");  // later duplicate wins
    CHECK(doc.get("alpha", "path") == "/tmp/a#b");
    CHECK(doc.get("alpha", "missing", "dflt") == "dflt");
    CHECK(doc.get_num("beta", "num", 0.0) == 2.5);
    CHECK(doc.get_int("beta", "count", 0) == 42);
    CHECK(doc.get_num("beta", "missing", -1.5) == -1.5);
    CHECK(doc.get_list("alpha", "list") == std::vector<std::string>{"x", "y", "z"});
    CHECK(doc.get_list("alpha", "missing").empty());

    CHECK_THROWS_AS(IniDoc::parse_text("[a]\nno equals sign\n"), ConfigError);
    CHECK_THROWS_AS(IniDoc::parse_text("key = 1\n"), ConfigError);
    CHECK_THROWS_AS(IniDoc::parse_text("[unterminated\n"), ConfigError);
    CHECK_THROWS_AS(IniDoc::parse_text("[]\n"), ConfigError);
    CHECK_THROWS_AS(IniDoc::parse_text("[a]\n= 1\n"), ConfigError);
}

TEST_CASE("ini numeric accessors reject junk") {
    const IniDoc doc = IniDoc::parse_text("[a]\nx = 1.5x\ny = 3.5\n");
    CHECK_THROWS_AS(doc.get_num("a", "x", 0.0), ConfigError);
    CHECK_THROWS_AS(doc.get_int("a", "y", 0), ConfigError);  // fractional is not an int
    CHECK(doc.get_num("a", "y", 0.0) == 3.5);
}

TEST_CASE("ini file loading reports missing files") {
    TempDir tmp;
    CHECK_THROWS_AS(IniDoc::parse_file(tmp.file("absent.ini")), ConfigError);
    {
        std::ofstream out(tmp.file("ok.ini"));
        out << "[experiment]\niters = 7\n";
    }
    const IniDoc doc = IniDoc::parse_file(tmp.file("ok.ini"));
    CHECK(doc.get_int("experiment", "iters", 0) == 7);
}

TEST_CASE("experiment defaults depend on the experiment") {
    const ExperimentConfig ols = parse_cfg("", "ols");
    CHECK(ols.experiment == "ols");
    CHECK(ols.loss == "softplus");
    CHECK(ols.iters == 100);
    CHECK(ols.methods == std::vector<std::string>{"gdnp"});
    REQUIRE(ols.seeds.size() == 10);
    CHECK(ols.seeds.front() == 1);
    CHECK(ols.seeds.back() == 10);
    CHECK(ols.d == 20);
    CHECK(ols.mu == 1.0);
    CHECK(ols.big_l == 10.0);
    CHECK(ols.gdnp.t_s == 40);
    CHECK(ols.gdnp.bracket_lo == -8.0);
    CHECK(ols.gdnp.bracket_hi == 8.0);
    CHECK(ols.gdnp.renorm_every == 100);

    const ExperimentConfig hs = parse_cfg("", "halfspace");
    CHECK(hs.methods == std::vector<std::string>{"gdnp", "gd"});
    CHECK(hs.seeds.size() == 10);

    const ExperimentConfig cd = parse_cfg("", "crossdep");
    CHECK(cd.methods == std::vector<std::string>{"bn", "gd"});
    CHECK(cd.seeds.size() == 5);
    CHECK(cd.loss == "quadratic");

    const ExperimentConfig mlp = parse_cfg("", "mlp");
    CHECK(mlp.methods == std::vector<std::string>{"gdnp"});
    CHECK(mlp.seeds == std::vector<std::uint64_t>{1});
    CHECK(mlp.mlp_units == 4);
    CHECK(mlp.mlp_samples == 200000);
    CHECK(mlp.mlp_t_s_warm == 12);

    CHECK_THROWS_AS(parse_cfg("", "bogus"), ConfigError);
}

TEST_CASE("config overrides reach every section") {
    const std::string text =
        "[experiment]\n"
        "kind = halfspace\n"
        "loss = sigmoid\n"
        "iters = 50\n"
        "methods = gdnp, bn\n"
        "seeds = 3, 5\n"
        "out = custom.csv\n"
        "[source]\n"
        "d = 6\n"
        "mu = 2\n"
        "L = 8\n"
        "seed = 11\n"
        "nodes = 32\n"
        "ridge = 0.1\n"
        "[gdnp]\n"
        "t_s = 13\n"
        "bracket_lo = -2\n"
        "bracket_hi = 3\n"
        "g_inner_steps = 5\n"
        "lr_g = 0.5\n"
        "renorm_every = 7\n"
        "[bn]\n"
        "stepsize = 0.3\n"
        "lr_g = 0.9\n";
    const ExperimentConfig cfg = parse_cfg(text, "halfspace");
    CHECK(cfg.loss == "sigmoid");
    CHECK(cfg.iters == 50);
    CHECK(cfg.methods == std::vector<std::string>{"gdnp", "bn"});
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 5});
    CHECK(cfg.out == "custom.csv");
    CHECK(cfg.d == 6);
    CHECK(cfg.mu == 2.0);
    CHECK(cfg.big_l == 8.0);
    CHECK(cfg.source_seed == 11);
    CHECK(cfg.quad_nodes == 32);
    CHECK(cfg.ridge == 0.1);
    CHECK(cfg.gdnp.t_s == 13);
    CHECK(cfg.gdnp.bracket_lo == -2.0);
    CHECK(cfg.gdnp.bracket_hi == 3.0);
    CHECK(cfg.gdnp.g_inner_steps == 5);
    CHECK(cfg.gdnp.lr_g == 0.5);
    CHECK(cfg.gdnp.renorm_every == 7);
    CHECK(cfg.method_settings.at("bn").stepsize == 0.3);
    CHECK(cfg.method_settings.at("bn").lr_g == 0.9);
    CHECK(cfg.method_settings.at("gd").stepsize == 0.0);

    const std::string probe_text =
        "[experiment]\n"
        "iters = 30\n"
        "[probe]\n"
        "depth = 2\n"
        "width = 8\n"
        "in_dim = 4\n"
        "out_dim = 2\n"
        "n = 64\n"
        "lr = 0.01\n"
        "lr_g_multiplier = 5\n"
        "dep_every = 10\n"
        "pairs = 1:0, 2:1\n";
    const ExperimentConfig pc = parse_cfg(probe_text, "crossdep");
    CHECK(pc.probe.depth == 2);
    CHECK(pc.probe.width == 8);
    CHECK(pc.probe.in_dim == 4);
    CHECK(pc.probe.out_dim == 2);
    CHECK(pc.probe.n == 64);
    CHECK(pc.probe.lr == 0.01);
    CHECK(pc.probe.lr_g_multiplier == 5.0);
    CHECK(pc.probe.dep_every == 10);
    REQUIRE(pc.probe.dep_pairs.size() == 2);
    CHECK(pc.probe.dep_pairs[0] == std::pair<int, int>(1, 0));
    CHECK(pc.probe.dep_pairs[1] == std::pair<int, int>(2, 1));
}

TEST_CASE("config validation rejects contradictions") {
    // unknown section / key
    CHECK_THROWS_AS(parse_cfg("[bogus]\nx = 1\n", "ols"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[experiment]\nbogus = 1\n", "ols"), ConfigError);
    // kind mismatch
    CHECK_THROWS_AS(parse_cfg("[experiment]\nkind = ols\n", "halfspace"), ConfigError);
    // method not available for the experiment
    CHECK_THROWS_AS(parse_cfg("[experiment]\nmethods = gd\n", "ols"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[experiment]\nmethods = gdnp\n", "crossdep"), ConfigError);
    // bad values
    CHECK_THROWS_AS(parse_cfg("[experiment]\niters = -1\n", "ols"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[experiment]\nseeds = abc\n", "ols"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[experiment]\nloss = huber\n", "halfspace"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[experiment]\nloss = sigmoid\n", "crossdep"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[gdnp]\nbracket_lo = 2\nbracket_hi = 2\n", "ols"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[gdnp]\nt_s = 0\n", "ols"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[source]\nnodes = 1\n", "ols"), ConfigError);
    // libsvm wiring
    CHECK_THROWS_AS(parse_cfg("[source]\nkind = libsvm\n", "halfspace"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[source]\nkind = libsvm\npath = x\n", "ols"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[source]\nkind = csv\n", "ols"), ConfigError);
    // probe pairs
    CHECK_THROWS_AS(parse_cfg("[probe]\npairs = 12\n", "crossdep"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[probe]\npairs = 9:0\n", "crossdep"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[probe]\ndep_every = 5\n", "crossdep"), ConfigError);
    CHECK_THROWS_AS(parse_cfg("[mlp]\nunits = 0\n", "mlp"), ConfigError);
}

TEST_CASE("loss names resolve to the right catalog entries") {
    CHECK(parse_loss("softplus").curvature_bound() == 0.25);
    CHECK(parse_loss("quadratic").curvature_bound() == 2.0);
    CHECK(parse_loss("sigmoid").curvature_bound() > 0.0);
    CHECK_THROWS_AS(parse_loss("huber"), ConfigError);
}

TEST_CASE("synthetic model hits the requested spectrum and is reproducible") {
    const SpdModel m = synth_model(20, 1.0, 10.0, 7);
    CHECK(testutil::rel_err(m.sigma.mu(), 1.0) < 1e-9);
    CHECK(testutil::rel_err(m.sigma.big_l(), 10.0) < 1e-9);
    CHECK(m.lambda1 < 0.99);
    CHECK(m.lambda1 > 0.0);

    const SpdModel again = synth_model(20, 1.0, 10.0, 7);
    CHECK((m.u - again.u).norm() == 0.0);
    CHECK((m.sigma.entries() - again.sigma.entries()).norm() == 0.0);

    const SpdModel other = synth_model(20, 1.0, 10.0, 8);
    CHECK((m.sigma.entries() - other.sigma.entries()).norm() > 0.0);

    // Flat spectrum short-circuits to an exact multiple of the identity.
    const SpdModel flat = synth_model(4, 3.0, 3.0, 7);
    CHECK((flat.sigma.entries() - 3.0 * Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);

    CHECK_THROWS_AS(synth_model(1, 1.0, 2.0, 7), ConfigError);
    CHECK_THROWS_AS(synth_model(4, 0.0, 2.0, 7), ConfigError);
    CHECK_THROWS_AS(synth_model(4, 3.0, 2.0, 7), ConfigError);
}

TEST_CASE("trace files round-trip and enforce iter ordering") {
    TempDir tmp;
    TraceFile tf;
    TraceRow r;
    r.method = "gdnp";
    r.run_id = 0;
    r.iter = 0;
    r.objective = 1.0 / 3.0;
    r.grad_norm = 1e-17;
    r.rho = -0.375;
    r.sin2 = 0.9999999999999999;
    r.g = 2.5;
    r.stepsize = 0.0078125;
    r.wall_ns = 123456789;
    tf.add(r);
    r.iter = 3;
    r.objective = 2.0;
    tf.add(r);
    r.method = "gd";
    r.iter = 0;
    tf.add(r);

    const std::string path = tmp.file("trace.csv");
    tf.write(path);
    const TraceFile back = TraceFile::read(path);
    REQUIRE(back.rows().size() == 3);
    CHECK(back.rows()[0].method == "gdnp");
    CHECK(back.rows()[0].objective == 1.0 / 3.0);
    CHECK(back.rows()[0].grad_norm == 1e-17);
    CHECK(back.rows()[0].rho == -0.375);
    CHECK(back.rows()[0].sin2 == 0.9999999999999999);
    CHECK(back.rows()[0].g == 2.5);
    CHECK(back.rows()[0].stepsize == 0.0078125);
    CHECK(back.rows()[0].wall_ns == 123456789);
    CHECK(back.rows()[1].iter == 3);
    CHECK(back.rows()[2].method == "gd");

    TraceFile bad;
    r.method = "gdnp";
    r.iter = 5;
    bad.add(r);
    bad.add(r);  // same iter for the same (method, run) pair
    CHECK_THROWS_AS(bad.write(tmp.file("bad.csv")), std::logic_error);

    CHECK_THROWS_AS(TraceFile::read(tmp.file("absent.csv")), std::runtime_error);
    {
        std::ofstream out(tmp.file("hdr.csv"));
        out << "wrong,header\n";
    }
    CHECK_THROWS_AS(TraceFile::read(tmp.file("hdr.csv")), std::runtime_error);
}

TEST_CASE("summary quantiles interpolate across runs") {
    TempDir tmp;
    TraceFile tf;
    for (int run = 0; run < 4; ++run) {
        TraceRow r;
        r.method = "m";
        r.run_id = run;
        r.iter = 0;
        r.objective = static_cast<double>(run + 1);       // 1, 2, 3, 4
        r.grad_norm = static_cast<double>(4 - run);       // 4, 3, 2, 1
        tf.add(r);
    }
    const std::string path = tmp.file("sum.csv");
    tf.write_summary(path);

    std::ifstream in(path);
    std::string header, line;
    REQUIRE(std::getline(in, header));
    CHECK(header ==
          "method,iter,objective_q05,objective_q50,objective_q95,"
          "grad_norm_q05,grad_norm_q50,grad_norm_q95");
    REQUIRE(std::getline(in, line));
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    REQUIRE(fields.size() == 8);
    CHECK(fields[0] == "m");
    CHECK(fields[1] == "0");
    CHECK(testutil::rel_err(std::stod(fields[2]), 1.15) < 1e-12);
    CHECK(testutil::rel_err(std::stod(fields[3]), 2.5) < 1e-12);
    CHECK(testutil::rel_err(std::stod(fields[4]), 3.85) < 1e-12);
    CHECK(testutil::rel_err(std::stod(fields[5]), 1.15) < 1e-12);
    CHECK(testutil::rel_err(std::stod(fields[6]), 2.5) < 1e-12);
    CHECK(testutil::rel_err(std::stod(fields[7]), 3.85) < 1e-12);
}

TEST_CASE("wall clock column strips cleanly") {
    CHECK(strip_wall_column("a,b,c\n1,2,3\n") == "a,b\n1,2\n");
    CHECK(strip_wall_column("noseparator") == "noseparator\n");
    CHECK(strip_wall_column("") == "");
}

TEST_CASE("default output directory honors the environment") {
    const char* saved = std::getenv("NORMGRAD_OUT_DIR");
    const std::string saved_copy = saved ? saved : "";

    ::setenv("NORMGRAD_OUT_DIR", "/tmp/somewhere", 1);
    CHECK(default_out_dir() == "/tmp/somewhere");
    ::unsetenv("NORMGRAD_OUT_DIR");
    CHECK(default_out_dir() == ".");

    if (saved) ::setenv("NORMGRAD_OUT_DIR", saved_copy.c_str(), 1);
}

TEST_CASE("small ols experiment writes a deterministic trace") {
    TempDir tmp;
    ExperimentConfig cfg = parse_cfg("", "ols");
    cfg.d = 6;
    cfg.iters = 10;
    cfg.seeds = {1, 2};
    cfg.out = tmp.file("a.csv");

    const ExperimentOutputs outs = run_experiment(cfg);
    CHECK(outs.trace_path == cfg.out);
    CHECK(std::filesystem::exists(outs.trace_path));
    REQUIRE(!outs.summary_path.empty());
    CHECK(std::filesystem::exists(outs.summary_path));

    const TraceFile tf = TraceFile::read(outs.trace_path);
    // iters pre-step records plus the closing final state, per seed.
    REQUIRE(tf.rows().size() == 2 * 11);
    for (const auto& row : tf.rows()) {
        CHECK(row.method == "gdnp");
        CHECK(row.objective >= 0.0);
        CHECK(row.sin2 >= 0.0);
        CHECK(row.sin2 <= 1.0);
    }
    CHECK(tf.rows().front().iter == 0);
    CHECK(tf.rows()[10].iter == 10);
    CHECK(tf.rows()[10].sin2 < tf.rows().front().sin2);

    cfg.out = tmp.file("b.csv");
    run_experiment(cfg);
    CHECK(strip_wall_column(read_text_file(tmp.file("a.csv"))) ==
          strip_wall_column(read_text_file(tmp.file("b.csv"))));

    cfg.out = tmp.file("c.csv");
    cfg.source_seed = 8;
    run_experiment(cfg);
    CHECK(strip_wall_column(read_text_file(tmp.file("a.csv"))) !=
          strip_wall_column(read_text_file(tmp.file("c.csv"))));
}

TEST_CASE("small halfspace experiment covers every method and seed") {
    TempDir tmp;
    ExperimentConfig cfg = parse_cfg(
        "[experiment]\n"
        "iters = 5\n"
        "methods = gdnp, gd, agd, bn, wn\n"
        "seeds = 1, 2\n"
        "[source]\n"
        "d = 4\n"
        "mu = 1\n"
        "L = 4\n"
        "nodes = 32\n"
        "[gdnp]\n"
        "t_s = 12\n",
        "halfspace");
    cfg.out = tmp.file("hs.csv");

    const ExperimentOutputs outs = run_experiment(cfg);
    const TraceFile tf = TraceFile::read(outs.trace_path);
    std::map<std::pair<std::string, int>, long> last;
    std::map<std::pair<std::string, int>, int> count;
    for (const auto& row : tf.rows()) {
        const auto key = std::make_pair(row.method, row.run_id);
        if (count[key] > 0) CHECK(row.iter > last[key]);
        last[key] = row.iter;
        ++count[key];
    }
    REQUIRE(count.size() == 10);  // 5 methods x 2 seeds
    for (const auto& [key, n] : count) {
        CHECK(n >= 5);
    }

    // Requesting a method the experiment does not support fails fast.
    ExperimentConfig bad = cfg;
    bad.methods = {"nope"};
    bad.out = tmp.file("bad.csv");
    CHECK_THROWS_AS(run_experiment(bad), ConfigError);
}

TEST_CASE("crossdep experiment writes its own schema and reruns byte-identically") {
    TempDir tmp;
    ExperimentConfig cfg = parse_cfg(
        "[experiment]\n"
        "iters = 6\n"
        "seeds = 1\n"
        "[probe]\n"
        "depth = 2\n"
        "width = 4\n"
        "in_dim = 3\n"
        "out_dim = 2\n"
        "n = 24\n"
        "dep_every = 3\n"
        "pairs = 2:0\n",
        "crossdep");
    cfg.out = tmp.file("cd.csv");

    const ExperimentOutputs outs = run_experiment(cfg);
    CHECK(outs.summary_path.empty());
    const std::string text = read_text_file(outs.trace_path);
    CHECK(text.rfind("method,run_id,iter,loss,grad_norm,dep_2_0\n", 0) == 0);
    CHECK(text.find("\nbn,0,1,") != std::string::npos);
    CHECK(text.find("\ngd,0,1,") != std::string::npos);

    cfg.out = tmp.file("cd2.csv");
    run_experiment(cfg);
    CHECK(read_text_file(tmp.file("cd.csv")) == read_text_file(tmp.file("cd2.csv")));
}

TEST_CASE("empty out path falls back to the directory from the environment") {
    TempDir tmp;
    const char* saved = std::getenv("NORMGRAD_OUT_DIR");
    const std::string saved_copy = saved ? saved : "";
    ::setenv("NORMGRAD_OUT_DIR", tmp.path.string().c_str(), 1);

    ExperimentConfig cfg = parse_cfg("", "ols");
    cfg.d = 4;
    cfg.iters = 3;
    cfg.seeds = {1};
    const ExperimentOutputs outs = run_experiment(cfg);

    if (saved) {
        ::setenv("NORMGRAD_OUT_DIR", saved_copy.c_str(), 1);
    } else {
        ::unsetenv("NORMGRAD_OUT_DIR");
    }

    CHECK(outs.trace_path == tmp.path.string() + "/ols.csv");
    CHECK(std::filesystem::exists(outs.trace_path));
}
