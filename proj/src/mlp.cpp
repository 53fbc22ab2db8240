#include "normgrad/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "normgrad/gdnp.hpp"
#include "normgrad/rng.hpp"

namespace normgrad {
namespace {

double sigmoid_scalar(double s) {
    if (s >= 0.0) {
        return 1.0 / (1.0 + std::exp(-s));
    }
    const double e = std::exp(s);
    return e / (1.0 + e);
}

// First and second outer-loss derivatives over an array of network outputs,
// sharing the transcendental evaluations within each family.
void outer_d12(const LossSpec& outer, const Eigen::ArrayXd& f, Eigen::ArrayXd& lp,
               Eigen::ArrayXd& lpp) {
    switch (outer.kind) {
        case LossKind::softplus: {
            const Eigen::ArrayXd sg = f.unaryExpr([](double s) { return sigmoid_scalar(s); });
            lp = sg;
            lpp = sg * (1.0 - sg);
            return;
        }
        case LossKind::sigmoid: {
            const Eigen::ArrayXd sg = f.unaryExpr([](double s) { return sigmoid_scalar(s); });
            lp = sg * (1.0 - sg);
            lpp = lp * (1.0 - 2.0 * sg);
            return;
        }
        case LossKind::quadratic:
            lp = 2.0 * f;
            lpp = Eigen::ArrayXd::Constant(f.size(), 2.0);
            return;
        case LossKind::linear:
            lp = Eigen::ArrayXd::Ones(f.size());
            lpp = Eigen::ArrayXd::Zero(f.size());
            return;
        case LossKind::tanh_act: {
            const Eigen::ArrayXd t = f.tanh();
            lp = 1.0 - t.square();
            lpp = -2.0 * t * lp;
            return;
        }
    }
    throw std::logic_error("outer_d12: unhandled loss kind");
}

Eigen::MatrixXd projections(const MlpParams& p, const SpdMatrix& sigma,
                            const Eigen::MatrixXd& z) {
    Eigen::MatrixXd proj(z.rows(), p.units());
    for (int j = 0; j < p.units(); ++j) {
        proj.col(j) = z * p.unit_tilde(j, sigma);
    }
    return proj;
}

void check_unit_index(const MlpParams& p, int i, const char* where) {
    if (i < 0 || i >= p.units()) {
        throw std::out_of_range(std::string(where) + ": unit index out of range");
    }
}

}  // namespace

Eigen::VectorXd MlpParams::unit_tilde(int i, const SpdMatrix& sigma) const {
    const Eigen::VectorXd& w = dirs.at(static_cast<std::size_t>(i));
    if (w.squaredNorm() == 0.0) {
        return Eigen::VectorXd::Zero(w.size());
    }
    return scales(i) * w / s_norm(w, sigma);
}

MlpParams MlpParams::zeros(int dim, int units) {
    if (dim < 1 || units < 1) {
        throw std::invalid_argument("MlpParams::zeros: need positive sizes");
    }
    MlpParams p;
    p.dirs.assign(static_cast<std::size_t>(units), Eigen::VectorXd::Zero(dim));
    p.scales = Eigen::VectorXd::Ones(units);
    p.theta = Eigen::VectorXd::Constant(units, 1.0 / units);
    return p;
}

double mlp_forward(const MlpParams& p, const SpdMatrix& sigma, const Eigen::VectorXd& z) {
    if (z.size() != p.dim()) {
        throw std::invalid_argument("mlp_forward: dimension mismatch");
    }
    double acc = 0.0;
    for (int j = 0; j < p.units(); ++j) {
        acc += p.theta(j) * std::tanh(z.dot(p.unit_tilde(j, sigma)));
    }
    return acc;
}

double nn_objective(const MlpParams& p, const LossSpec& outer, const SpdMatrix& sigma,
                    const Eigen::MatrixXd& z) {
    const Eigen::VectorXd f = projections(p, sigma, z).array().tanh().matrix() * p.theta;
    double acc = 0.0;
    for (Eigen::Index s = 0; s < f.size(); ++s) {
        acc += phi_k(outer, 0, f(s));
    }
    return acc / static_cast<double>(f.size());
}

Eigen::VectorXd unit_gradient_tilde(const MlpParams& p, int i, const LossSpec& outer,
                                    const SpdMatrix& sigma, const Eigen::MatrixXd& z) {
    check_unit_index(p, i, "unit_gradient_tilde");
    const Eigen::MatrixXd proj = projections(p, sigma, z);
    const Eigen::ArrayXd t_i = proj.col(i).array().tanh();
    const Eigen::ArrayXd f = (proj.array().tanh().matrix() * p.theta).array();
    Eigen::ArrayXd lp, lpp;
    outer_d12(outer, f, lp, lpp);
    const Eigen::ArrayXd weights = lp * (1.0 - t_i.square());
    return p.theta(i) * (z.transpose() * weights.matrix()) / static_cast<double>(z.rows());
}

double nn_objective(const MlpParams& p, const LossSpec& outer, const SpdModel& m, int samples,
                    std::uint64_t seed) {
    return nn_objective(p, outer, m.sigma, sample_gaussian(m, samples, seed).z);
}

Eigen::VectorXd unit_gradient_tilde(const MlpParams& p, int i, const LossSpec& outer,
                                    const SpdModel& m, int samples, std::uint64_t seed) {
    return unit_gradient_tilde(p, i, outer, m.sigma, sample_gaussian(m, samples, seed).z);
}

UnitGradDecomp unit_decomp(const MlpParams& p, int i, const LossSpec& outer, const SpdModel& m,
                           const Eigen::MatrixXd& z, const Eigen::VectorXd& c_prev) {
    check_unit_index(p, i, "unit_decomp");
    const int units = p.units();
    const double n = static_cast<double>(z.rows());
    const Eigen::MatrixXd tanh_proj = projections(p, m.sigma, z).array().tanh().matrix();
    const Eigen::ArrayXd f = (tanh_proj * p.theta).array();
    Eigen::ArrayXd lp, lpp;
    outer_d12(outer, f, lp, lpp);

    const Eigen::ArrayXd phi1_i = 1.0 - tanh_proj.col(i).array().square();
    const Eigen::ArrayXd phi2_i = -2.0 * tanh_proj.col(i).array() * phi1_i;

    UnitGradDecomp dec;
    dec.beta = (lp * phi2_i).sum() / n;
    dec.gamma = Eigen::VectorXd::Zero(units);
    const Eigen::ArrayXd lpp_phi1_i = lpp * phi1_i;
    for (int j = 0; j < units; ++j) {
        const Eigen::ArrayXd phi1_j = 1.0 - tanh_proj.col(j).array().square();
        dec.gamma(j) = p.theta(j) * (lpp_phi1_i * phi1_j).sum() / n;
    }

    double alpha = (lp * phi1_i).sum() / n;
    alpha -= dec.beta * m.u.dot(p.unit_tilde(i, m.sigma));
    for (int j = 0; j < units; ++j) {
        alpha -= dec.gamma(j) * m.u.dot(p.unit_tilde(j, m.sigma));
    }
    dec.alpha = alpha;

    dec.xi = alpha;
    for (int j = 0; j < i; ++j) {
        dec.xi += dec.gamma(j) * c_prev(j);
    }

    // Structural premise: earlier units aligned with S^{-1}u (or inactive),
    // later units inactive.
    const Eigen::VectorXd aligned = m.sigma.solve(m.u);
    for (int j = 0; j < units && dec.premise_ok; ++j) {
        if (j == i || p.dirs[static_cast<std::size_t>(j)].squaredNorm() == 0.0) {
            continue;
        }
        if (j > i || sin2_s_angle(p.dirs[static_cast<std::size_t>(j)], aligned, m.sigma) > 1e-6) {
            dec.premise_ok = false;
        }
    }
    return dec;
}

Eigen::VectorXd reconstruct_unit_gradient(const MlpParams& p, int i, const UnitGradDecomp& dec,
                                          const SpdModel& m) {
    check_unit_index(p, i, "reconstruct_unit_gradient");
    Eigen::VectorXd g = dec.alpha * m.u + dec.beta * m.sigma.apply(p.unit_tilde(i, m.sigma));
    for (int j = 0; j < p.units(); ++j) {
        if (dec.gamma(j) != 0.0) {
            g += dec.gamma(j) * m.sigma.apply(p.unit_tilde(j, m.sigma));
        }
    }
    return p.theta(i) * g;
}

namespace {

// Incremental per-unit evaluator for the trainer: everything that does not
// involve the active unit is frozen, so a scale probe costs one pass over
// the active unit's projection column.
struct UnitEvaluator {
    const LossSpec& outer;
    const SpdModel& m;
    const Eigen::MatrixXd& z;
    const MlpParams& params;
    int i;
    const Eigen::VectorXd& c;

    Eigen::VectorXd f_rest;          // network output minus the active unit
    Eigen::MatrixXd phi1_prev;       // phi' columns of trained units j < i
    std::vector<Eigen::VectorXd> s_tilde_prev;  // S w~_j for j < i
    Eigen::VectorXd u_tilde_prev;    // u'w~_j for j < i

    // direction-dependent caches
    Eigen::VectorXd q;               // z * w / ||w||_S
    double wn = 0.0;                 // ||w||_S
    double uw = 0.0;                 // u'w
    Eigen::VectorXd k_prev;          // (S w~_j)'w / ||w||_S for j < i
    Eigen::VectorXd s_w;             // S w
    Eigen::VectorXd a_w_u;           // A_w u

    struct Scalars {
        double alpha = 0.0, beta = 0.0, gamma_self = 0.0, xi = 0.0, partial_g = 0.0;
        Eigen::VectorXd gamma_prev;
    };

    UnitEvaluator(const LossSpec& outer_in, const SpdModel& m_in, const Eigen::MatrixXd& z_in,
                  const MlpParams& params_in, int i_in, const Eigen::VectorXd& c_in,
                  const Eigen::VectorXd& f_all)
        : outer(outer_in), m(m_in), z(z_in), params(params_in), i(i_in), c(c_in) {
        f_rest = f_all;  // the active unit starts inactive, contributing zero
        phi1_prev.resize(z.rows(), i);
        s_tilde_prev.reserve(static_cast<std::size_t>(i));
        u_tilde_prev = Eigen::VectorXd::Zero(i);
        for (int j = 0; j < i; ++j) {
            const Eigen::VectorXd wt = params.unit_tilde(j, m.sigma);
            phi1_prev.col(j) = (1.0 - (z * wt).array().tanh().square()).matrix();
            s_tilde_prev.push_back(m.sigma.apply(wt));
            u_tilde_prev(j) = m.u.dot(wt);
        }
    }

    void refresh_direction() {
        const Eigen::VectorXd& w = params.dirs[static_cast<std::size_t>(i)];
        wn = s_norm(w, m.sigma);
        uw = m.u.dot(w);
        q = z * (w / wn);
        s_w = m.sigma.apply(w);
        a_w_u = a_w_apply(w, m.sigma, m.u);
        k_prev.resize(i);
        for (int j = 0; j < i; ++j) {
            k_prev(j) = s_tilde_prev[static_cast<std::size_t>(j)].dot(w) / wn;
        }
    }

    Scalars evaluate(double g) const {
        const double n = static_cast<double>(z.rows());
        const Eigen::ArrayXd t_i = (g * q.array()).tanh();
        const Eigen::ArrayXd f = f_rest.array() + params.theta(i) * t_i;
        Eigen::ArrayXd lp, lpp;
        outer_d12(outer, f, lp, lpp);
        const Eigen::ArrayXd phi1_i = 1.0 - t_i.square();

        Scalars s;
        const double e1 = (lp * phi1_i).sum() / n;
        s.beta = (lp * (-2.0 * t_i * phi1_i)).sum() / n;
        const Eigen::ArrayXd lpp_phi1_i = lpp * phi1_i;
        s.gamma_prev = Eigen::VectorXd::Zero(i);
        for (int j = 0; j < i; ++j) {
            s.gamma_prev(j) =
                params.theta(j) * (lpp_phi1_i * phi1_prev.col(j).array()).sum() / n;
        }
        s.gamma_self = params.theta(i) * (lpp_phi1_i * phi1_i).sum() / n;

        const double u_tilde_i = g * uw / wn;
        double alpha = e1 - s.beta * u_tilde_i - s.gamma_self * u_tilde_i;
        for (int j = 0; j < i; ++j) {
            alpha -= s.gamma_prev(j) * u_tilde_prev(j);
        }
        s.alpha = alpha;
        s.xi = alpha;
        double partial = alpha * uw / wn + (s.beta + s.gamma_self) * g;
        for (int j = 0; j < i; ++j) {
            s.xi += s.gamma_prev(j) * c(j);
            partial += s.gamma_prev(j) * k_prev(j);
        }
        s.partial_g = params.theta(i) * partial;
        return s;
    }
};

}  // namespace

MlpTrainResult train_mlp_gdnp(const LossSpec& outer, const SpdModel& m, int units,
                              const MlpGdnpConfig& cfg, const Eigen::VectorXd& theta) {
    if (units < 1) {
        throw std::invalid_argument("train_mlp_gdnp: need at least one unit");
    }
    if (cfg.samples < 1 || cfg.unit.t_d < 0 || cfg.unit.t_s < 1 || cfg.unit.t_s_warm < 1 ||
        !(cfg.unit.bracket_lo < cfg.unit.bracket_hi)) {
        throw std::invalid_argument("train_mlp_gdnp: invalid configuration");
    }
    MlpParams params = MlpParams::zeros(m.dim(), units);
    if (theta.size() != 0) {
        if (theta.size() != units) {
            throw std::invalid_argument("train_mlp_gdnp: theta size mismatch");
        }
        params.theta = theta;
    }

    MlpTrainResult out;
    out.c = Eigen::VectorXd::Zero(units);
    out.unit_traces.resize(static_cast<std::size_t>(units));

    const Eigen::MatrixXd z = sample_gaussian(m, cfg.samples, cfg.seed).z;
    const double big_l = m.sigma.big_l();
    const Eigen::VectorXd sinv_u = m.sigma.solve(m.u);
    const double sinv_u_sq = sinv_u.squaredNorm();
    Eigen::VectorXd f_all = Eigen::VectorXd::Zero(z.rows());

    for (int i = 0; i < units; ++i) {
        auto& trace = out.unit_traces[static_cast<std::size_t>(i)];
        if (params.theta(i) == 0.0) {
            continue;  // a frozen zero output weight silences the unit
        }

        double premise_residual = 0.0;
        for (int j = 0; j < i; ++j) {
            const UnitGradDecomp dj = unit_decomp(params, j, outer, m, z, out.c);
            premise_residual =
                std::max(premise_residual, reconstruct_unit_gradient(params, j, dj, m).norm());
        }

        params.dirs[static_cast<std::size_t>(i)] =
            find_init(m, cfg.seed + 7919u * static_cast<std::uint64_t>(i + 1));
        params.scales(i) = 1.0;

        UnitEvaluator ev(outer, m, z, params, i, out.c, f_all);
        ev.refresh_direction();
        Eigen::VectorXd& w = params.dirs[static_cast<std::size_t>(i)];
        double& g = params.scales(i);
        const double theta_i = params.theta(i);
        // A tanh unit's scale derivative vanishes at saturation on both
        // sides, and under a monotone outer loss it can stay one-signed for
        // every finite scale (the infimum sits at the saturated sign unit).
        // The search window therefore recenters on the current scale each
        // step: with an interior root the search bisects onto it, and with
        // a one-signed decaying derivative it exits at the downhill
        // endpoint, walking half a window per step toward saturation.
        bool first_scale = true;
        const double scale_width = cfg.unit.bracket_hi - cfg.unit.bracket_lo;
        auto scale_update = [&](int halvings) {
            const auto fn = [&](double cand) { return ev.evaluate(cand).partial_g; };
            const double lo = first_scale ? cfg.unit.bracket_lo : g - 0.5 * scale_width;
            const double hi = first_scale ? cfg.unit.bracket_hi : g + 0.5 * scale_width;
            first_scale = false;
            g = bisection(fn, lo, hi, halvings).g;
        };

        auto push_record = [&](int t, double xi, double s_t) {
            const UnitEvaluator::Scalars sc = ev.evaluate(g);
            MlpUnitTraceRecord rec;
            rec.t = t;
            rec.xi = xi;
            rec.g = g;
            rec.s_t = s_t;
            rec.premise_residual = premise_residual;
            const Eigen::ArrayXd t_i = (g * ev.q.array()).tanh();
            const Eigen::ArrayXd f = ev.f_rest.array() + theta_i * t_i;
            double obj = 0.0;
            for (Eigen::Index s = 0; s < f.size(); ++s) {
                obj += phi_k(outer, 0, f(s));
            }
            rec.objective = obj / static_cast<double>(f.size());
            Eigen::VectorXd grad =
                sc.alpha * m.u + (sc.beta + sc.gamma_self) * (g / ev.wn) * ev.s_w;
            for (int j = 0; j < i; ++j) {
                grad += sc.gamma_prev(j) * ev.s_tilde_prev[static_cast<std::size_t>(j)];
            }
            grad *= theta_i;
            rec.grad_tilde_norm_sinv = m.sigma.inv_quad(grad);
            trace.push_back(rec);
        };

        if (cfg.unit.t_d == 0) {
            scale_update(cfg.unit.t_s);
            push_record(0, ev.evaluate(g).xi, 0.0);
        }
        for (int t = 1; t <= cfg.unit.t_d; ++t) {
            const UnitEvaluator::Scalars sc = ev.evaluate(g);
            const double h = sc.xi * ev.uw;
            double s_t = 0.0;
            if (std::abs(h) >= kHZeroTol && g != 0.0) {
                s_t = -(ev.wn * ev.wn * ev.wn) / (big_l * theta_i * g * sc.xi * ev.uw);
                w -= s_t * (g * theta_i * sc.xi) * ev.a_w_u;
                if (cfg.unit.renorm_every > 0 && t % cfg.unit.renorm_every == 0) {
                    w /= w.norm();
                }
                ev.refresh_direction();
            }
            const bool last = t == cfg.unit.t_d;
            scale_update(last ? cfg.unit.t_s : cfg.unit.t_s_warm);
            push_record(t, sc.xi, s_t);
        }

        // fold the trained unit into the frozen network state
        const Eigen::VectorXd w_tilde_i = params.unit_tilde(i, m.sigma);
        f_all = ev.f_rest + theta_i * (z * w_tilde_i).array().tanh().matrix();
        out.c(i) = w_tilde_i.dot(sinv_u) / sinv_u_sq;
    }

    out.params = std::move(params);
    return out;
}

}  // namespace normgrad
