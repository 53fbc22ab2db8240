#include "normgrad/gdnp.hpp"

#include <cmath>
#include <stdexcept>

#include "normgrad/rng.hpp"

namespace normgrad {
namespace {

HalfspaceTraceRecord make_record(const HalfspaceProblem& p, int t,
                                 const Eigen::VectorXd& w_tilde, double dir_grad_norm, double g,
                                 double h_value, double s_t) {
    HalfspaceTraceRecord rec;
    rec.t = t;
    rec.objective = p.objective(w_tilde);
    const Eigen::VectorXd grad = p.gradient_tilde(w_tilde);
    rec.grad_tilde_norm_sinv = p.sigma().inv_quad(grad);
    rec.dir_grad_norm = dir_grad_norm;
    rec.g = g;
    rec.h_value = h_value;
    rec.s_t = s_t;
    if (w_tilde.squaredNorm() > 0.0) {
        const double uw = p.u().dot(w_tilde);
        rec.rho = -(uw * uw) / p.sigma().quad(w_tilde);
        rec.sin2 = sin2_s_angle(w_tilde, p.sigma().solve(p.u()), p.sigma());
    } else {
        rec.rho = 0.0;
        rec.sin2 = 1.0;
    }
    return rec;
}

}  // namespace

Eigen::VectorXd NormState::w_tilde(const SpdMatrix& sigma) const {
    return g * w / s_norm(w, sigma);
}

HalfspaceProblem HalfspaceProblem::analytic(LossSpec loss, std::shared_ptr<const SpdModel> model,
                                            ExpectationEngine engine) {
    if (!model) {
        throw std::invalid_argument("HalfspaceProblem: null model");
    }
    HalfspaceProblem p;
    p.loss_ = loss;
    p.model_ = std::move(model);
    p.engine_ = std::move(engine);
    return p;
}

HalfspaceProblem HalfspaceProblem::empirical(LossSpec loss,
                                             std::shared_ptr<const EmpiricalDataset> data,
                                             double ridge) {
    if (!data) {
        throw std::invalid_argument("HalfspaceProblem: null dataset");
    }
    HalfspaceProblem p;
    p.loss_ = loss;
    p.data_ = std::move(data);
    p.stats_ = std::make_shared<const ModelStats>(compute_stats(*p.data_, ridge));
    return p;
}

const Eigen::VectorXd& HalfspaceProblem::u() const {
    return is_analytic() ? model_->u : stats_->u_hat;
}

const SpdMatrix& HalfspaceProblem::sigma() const {
    return is_analytic() ? model_->sigma : stats_->sigma_hat;
}

double HalfspaceProblem::lambda1() const {
    return is_analytic() ? model_->lambda1 : sigma().inv_quad(u());
}

double HalfspaceProblem::zeta() const {
    return is_analytic() ? loss_.curvature_bound() * big_l() : stats_->zeta_sup;
}

const SpdModel& HalfspaceProblem::model() const {
    if (!is_analytic()) {
        throw std::logic_error("HalfspaceProblem: empirical problem has no analytic model");
    }
    return *model_;
}

const EmpiricalDataset& HalfspaceProblem::data() const {
    if (is_analytic()) {
        throw std::logic_error("HalfspaceProblem: analytic problem has no dataset");
    }
    return *data_;
}

double HalfspaceProblem::objective(const Eigen::VectorXd& w_tilde) const {
    return is_analytic() ? lh_objective(loss_, w_tilde, *model_, *engine_)
                         : lh_objective(loss_, w_tilde, *data_);
}

Eigen::VectorXd HalfspaceProblem::gradient_tilde(const Eigen::VectorXd& w_tilde) const {
    return is_analytic() ? lh_gradient_tilde(loss_, w_tilde, *model_, *engine_)
                         : lh_gradient_tilde(loss_, w_tilde, *data_);
}

SteinCoeffs HalfspaceProblem::coeffs(const Eigen::VectorXd& w_tilde) const {
    if (is_analytic()) {
        return stein_coeffs(loss_, w_tilde, *model_, *engine_);
    }
    const Eigen::VectorXd s = data_->z * w_tilde;
    double e1 = 0.0, e2 = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        e1 += phi_k(loss_, 1, s(i));
        e2 += phi_k(loss_, 2, s(i));
    }
    e1 /= static_cast<double>(s.size());
    e2 /= static_cast<double>(s.size());
    SteinCoeffs c;
    c.c2 = e2;
    c.c1 = e1 - e2 * u().dot(w_tilde);
    return c;
}

Eigen::VectorXd HalfspaceProblem::dir_gradient(const NormState& st) const {
    if (is_analytic()) {
        // The S w~ component of the gradient lies in A_w's kernel, so only
        // the u component survives; using that exactly keeps the direction
        // update loss independent.
        const SteinCoeffs c = coeffs(st.w_tilde(sigma()));
        return st.g * c.c1 * a_w_apply(st.w, sigma(), u());
    }
    return st.g * a_w_apply(st.w, sigma(), gradient_tilde(st.w_tilde(sigma())));
}

double HalfspaceProblem::partial_g(const Eigen::VectorXd& w, double g) const {
    const double wn = s_norm(w, sigma());
    const Eigen::VectorXd w_tilde = g * w / wn;
    if (is_analytic()) {
        const SteinCoeffs c = coeffs(w_tilde);
        return c.c1 * u().dot(w) / wn + c.c2 * g;
    }
    return gradient_tilde(w_tilde).dot(w) / wn;
}

double h_stop(const NormState& st, const HalfspaceProblem& p) {
    const SteinCoeffs c = p.coeffs(st.w_tilde(p.sigma()));
    return c.c1 * p.u().dot(st.w);
}

NormState directional_step(const NormState& st, const HalfspaceProblem& p, double* s_t_out,
                           double* h_out) {
    const double h = h_stop(st, p);
    if (h_out != nullptr) {
        *h_out = h;
    }
    if (s_t_out != nullptr) {
        *s_t_out = 0.0;
    }
    if (std::abs(h) < kHZeroTol || st.g == 0.0) {
        return st;
    }
    const double wn = s_norm(st.w, p.sigma());
    const double s_t = -(wn * wn * wn) / (p.big_l() * st.g * h);
    if (s_t_out != nullptr) {
        *s_t_out = s_t;
    }
    NormState next = st;
    next.w = st.w - s_t * p.dir_gradient(st);
    return next;
}

BisectionResult bisection(const std::function<double(double)>& partial_g, double a0, double b0,
                          int t_s) {
    if (!(a0 < b0)) {
        throw std::invalid_argument("bisection: need a0 < b0");
    }
    if (t_s < 1) {
        throw std::invalid_argument("bisection: need at least one halving");
    }
    double a = a0, b = b0;
    double fa = partial_g(a);
    double fb = partial_g(b);
    BisectionResult out;
    if (fa == 0.0) {
        out.g = a;
        out.bracket_width = b - a;
        return out;
    }
    if (fb == 0.0) {
        out.g = b;
        out.bracket_width = b - a;
        return out;
    }
    if (fa * fb > 0.0) {
        // No sign change across the bracket. The scale derivative of a
        // saturating loss can keep one sign everywhere and fade toward
        // zero at infinity, so a root is not guaranteed to exist at all.
        // Classify by the midpoint before hunting for one.
        const double center = 0.5 * (a + b);
        const double fc = partial_g(center);
        if (fc == 0.0) {
            out.g = center;
            out.bracket_width = b - a;
            return out;
        }
        if (fa * fc < 0.0) {
            b = center;
            fb = fc;
        } else if (fc * fb < 0.0) {
            a = center;
            fa = fc;
        } else if (std::abs(fc) > std::max(std::abs(fa), std::abs(fb))) {
            // Magnitude peaks inside and fades toward both ends: one-signed
            // with no root; descend toward the endpoint the sign selects.
            out.g = fa < 0.0 ? b : a;
            out.bracket_width = b - a;
            return out;
        } else if (std::abs(fc) < std::min(std::abs(fa), std::abs(fb))) {
            // Dip without a crossing: the midpoint is the closest the
            // bracket gets to stationarity.
            out.g = center;
            out.bracket_width = b - a;
            return out;
        } else {
            // Magnitude slides toward one end: either a root lies beyond
            // that end or the derivative just decays. Probe outward
            // geometrically; a sign flip brackets a real root, while the
            // magnitude collapsing hard twice in a row is taken as decay
            // and the search settles on the downhill endpoint.
            const bool rightward = std::abs(fb) < std::abs(fa);
            double prev = rightward ? b : a;
            double prev_f = rightward ? fb : fa;
            double step = b - a;
            bool bracketed = false;
            int decay_votes = 0;
            for (int k = 0; k < 60; ++k) {
                const double x = rightward ? center + step : center - step;
                const double fx = partial_g(x);
                ++out.expansions;
                step *= 2.0;
                if (fx == 0.0) {
                    out.g = x;
                    out.bracket_width = std::abs(x - prev);
                    return out;
                }
                if (prev_f * fx < 0.0) {
                    if (rightward) {
                        a = prev;
                        fa = prev_f;
                        b = x;
                    } else {
                        a = x;
                        fa = fx;
                        b = prev;
                    }
                    bracketed = true;
                    break;
                }
                decay_votes = std::abs(fx) < 0.4 * std::abs(prev_f) ? decay_votes + 1 : 0;
                if (decay_votes >= 2) {
                    out.g = rightward ? b : a;
                    out.bracket_width = b - a;
                    return out;
                }
                prev = x;
                prev_f = fx;
            }
            if (!bracketed) {
                throw std::runtime_error("bisection: no sign change after bracket expansion");
            }
        }
    }
    out.bracket_width = b - a;
    for (int k = 0; k < t_s; ++k) {
        const double mid = 0.5 * (a + b);
        const double fm = partial_g(mid);
        if (fm == 0.0) {
            a = mid;
            break;
        }
        if (fa * fm < 0.0) {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    out.g = a;
    return out;
}

GdnpResult gdnp_run(const HalfspaceProblem& p, const GdnpConfig& cfg, const Eigen::VectorXd& w0,
                    double g0) {
    if (cfg.t_d < 0 || cfg.t_s < 1) {
        throw std::invalid_argument("gdnp_run: need t_d >= 0 and t_s >= 1");
    }
    if (!(cfg.bracket_lo < cfg.bracket_hi)) {
        throw std::invalid_argument("gdnp_run: invalid scale bracket");
    }
    if (p.u().dot(w0) == 0.0) {
        throw std::domain_error("gdnp_run: start direction orthogonal to u, rho(w0) = 0");
    }

    GdnpResult out;
    NormState st{w0, g0};
    out.w_iterates.push_back(st.w);
    const double width = cfg.bracket_hi - cfg.bracket_lo;
    bool first_scale = true;

    double lr_g = cfg.lr_g;
    if (cfg.g_inner_steps > 0 && lr_g <= 0.0) {
        const double curv = p.loss().curvature_bound();
        if (curv <= 0.0) {
            throw std::invalid_argument("gdnp_run: lr_g required for a curvature-free loss");
        }
        // E[(z'w)^2]/||w||_S^2 = 1, so sup|phi''| bounds the scale curvature.
        lr_g = 1.0 / curv;
    }

    auto scale_update = [&](NormState& state) {
        if (cfg.g_inner_steps > 0) {
            for (int k = 0; k < cfg.g_inner_steps; ++k) {
                state.g -= lr_g * p.partial_g(state.w, state.g);
            }
            out.last_bracket_width = 0.0;
        } else {
            const auto fn = [&](double g) { return p.partial_g(state.w, g); };
            double a = cfg.bracket_lo, b = cfg.bracket_hi;
            if (!first_scale) {
                a = state.g - 0.5 * width;
                b = state.g + 0.5 * width;
            }
            const BisectionResult res = bisection(fn, a, b, cfg.t_s);
            state.g = res.g;
            out.last_bracket_width = res.bracket_width;
        }
        first_scale = false;
    };

    if (cfg.t_d == 0) {
        scale_update(st);
        out.trace.push_back(make_record(p, 0, st.w_tilde(p.sigma()),
                                        p.dir_gradient(st).norm(), st.g, h_stop(st, p), 0.0));
    }
    for (int t = 1; t <= cfg.t_d; ++t) {
        double h_used = 0.0, s_used = 0.0;
        st = directional_step(st, p, &s_used, &h_used);
        if (cfg.renorm_every > 0 && t % cfg.renorm_every == 0) {
            st.w /= st.w.norm();
        }
        scale_update(st);
        out.w_iterates.push_back(st.w);
        out.trace.push_back(make_record(p, t, st.w_tilde(p.sigma()), p.dir_gradient(st).norm(),
                                        st.g, h_used, s_used));
    }
    out.state = st;
    out.w_tilde = st.w_tilde(p.sigma());
    return out;
}

BaselineResult gd_run(const HalfspaceProblem& p, const Eigen::VectorXd& w_tilde0, double stepsize,
                      int steps) {
    if (stepsize <= 0.0) {
        throw std::invalid_argument("gd_run: stepsize must be positive");
    }
    BaselineResult out;
    Eigen::VectorXd w = w_tilde0;
    for (int t = 1; t <= steps; ++t) {
        const Eigen::VectorXd grad = p.gradient_tilde(w);
        w -= stepsize * grad;
        out.trace.push_back(make_record(p, t, w, grad.norm(), s_norm(w, p.sigma()), 0.0,
                                        stepsize));
    }
    out.w_tilde = w;
    return out;
}

double agd_momentum(int t, double beta_const) {
    if (beta_const >= 0.0) {
        return beta_const;
    }
    return (t - 2.0) / (t + 1.0);
}

BaselineResult agd_run(const HalfspaceProblem& p, const Eigen::VectorXd& w_tilde0, double stepsize,
                       int steps, double beta_const) {
    if (stepsize <= 0.0) {
        throw std::invalid_argument("agd_run: stepsize must be positive");
    }
    BaselineResult out;
    Eigen::VectorXd w = w_tilde0;
    Eigen::VectorXd w_prev = w_tilde0;
    for (int t = 1; t <= steps; ++t) {
        const double beta = agd_momentum(t, beta_const);
        const Eigen::VectorXd y = w + beta * (w - w_prev);
        const Eigen::VectorXd grad = p.gradient_tilde(y);
        w_prev = w;
        w = y - stepsize * grad;
        out.trace.push_back(make_record(p, t, w, grad.norm(), s_norm(w, p.sigma()), 0.0,
                                        stepsize));
    }
    out.w_tilde = w;
    return out;
}

namespace {

// Shared body of the BN and WN baselines: fixed-step simultaneous descent
// on (w, g) where the reconstruction norm comes from `metric`. Objective
// and trace quantities stay in solution coordinates.
BaselineResult reparam_gd_run(const HalfspaceProblem& p, const SpdMatrix& metric,
                              const NormState& st0, double lr_w, double lr_g, int steps) {
    if (lr_w <= 0.0 || lr_g <= 0.0) {
        throw std::invalid_argument("reparametrized gd: stepsizes must be positive");
    }
    BaselineResult out;
    NormState st = st0;
    for (int t = 1; t <= steps; ++t) {
        const double wn = s_norm(st.w, metric);
        const Eigen::VectorXd w_tilde = st.g * st.w / wn;
        const Eigen::VectorXd grad_tilde = p.gradient_tilde(w_tilde);
        const Eigen::VectorXd grad_w = st.g * a_w_apply(st.w, metric, grad_tilde);
        const double dg = grad_tilde.dot(st.w) / wn;
        st.w -= lr_w * grad_w;
        st.g -= lr_g * dg;
        const Eigen::VectorXd next_tilde = st.g * st.w / s_norm(st.w, metric);
        out.trace.push_back(make_record(p, t, next_tilde, grad_w.norm(), st.g, 0.0, lr_w));
    }
    out.w_tilde = st.g * st.w / s_norm(st.w, metric);
    return out;
}

}  // namespace

BaselineResult bn_gd_run(const HalfspaceProblem& p, const NormState& st0, double lr_w,
                         double lr_g, int steps) {
    return reparam_gd_run(p, p.sigma(), st0, lr_w, lr_g, steps);
}

BaselineResult wn_gd_run(const HalfspaceProblem& p, const NormState& st0, double lr_w,
                         double lr_g, int steps) {
    return reparam_gd_run(p, SpdMatrix::identity(static_cast<int>(st0.w.size())), st0, lr_w, lr_g,
                          steps);
}

Eigen::VectorXd find_init(const Eigen::VectorXd& u, const SpdMatrix& sigma, std::uint64_t seed) {
    Rng rng(seed, "find_init");
    const int d = sigma.dim();
    const Eigen::VectorXd v1 = sigma.solve(u);
    for (int attempt = 0; attempt < 100; ++attempt) {
        Eigen::VectorXd w(d);
        for (int i = 0; i < d; ++i) {
            w(i) = rng.normal();
        }
        const double n = w.norm();
        if (n == 0.0) {
            continue;
        }
        w /= n;
        // cos^2 above 1e-12 keeps |cos| above 1e-6, so rho(w0) != 0.
        const double cos2 = 1.0 - sin2_s_angle(w, v1, sigma);
        if (cos2 > 1e-12) {
            return w;
        }
    }
    throw std::runtime_error("find_init: no start with nonzero quotient after 100 draws");
}

Eigen::VectorXd find_init(const SpdModel& m, std::uint64_t seed) {
    return find_init(m.u, m.sigma, seed);
}

Eigen::VectorXd find_init(const HalfspaceProblem& p, std::uint64_t seed) {
    return find_init(p.u(), p.sigma(), seed);
}

}  // namespace normgrad
