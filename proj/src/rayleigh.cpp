#include "normgrad/rayleigh.hpp"

#include <cmath>
#include <stdexcept>

namespace normgrad {
namespace {

void require_nonzero(const Eigen::VectorXd& w, const char* where) {
    if (w.size() == 0 || w.squaredNorm() == 0.0) {
        throw std::invalid_argument(std::string(where) + ": zero direction");
    }
}

}  // namespace

double rho(const Eigen::VectorXd& w, const SpdModel& m) {
    require_nonzero(w, "rho");
    const double uw = m.u.dot(w);
    return -(uw * uw) / m.sigma.quad(w);
}

double optimal_scale(const Eigen::VectorXd& w, const SpdModel& m) {
    require_nonzero(w, "optimal_scale");
    return -m.u.dot(w) / s_norm(w, m.sigma);
}

Eigen::VectorXd grad_rho(const Eigen::VectorXd& w, const SpdModel& m) {
    require_nonzero(w, "grad_rho");
    const double q = m.sigma.quad(w);
    const double uw = m.u.dot(w);
    const double r = -(uw * uw) / q;
    return -2.0 * (m.u * uw + r * m.sigma.apply(w)) / q;
}

Eigen::VectorXd dominant_direction(const SpdModel& m) {
    Eigen::VectorXd v = -m.sigma.solve(m.u);
    return v / std::sqrt(m.lambda1);
}

double rayleigh_stepsize(const Eigen::VectorXd& w, const SpdModel& m) {
    const double r = rho(w, m);
    if (r == 0.0) {
        throw std::domain_error("rayleigh_stepsize: rho(w) = 0, degenerate start");
    }
    return m.sigma.quad(w) / (2.0 * m.sigma.big_l() * std::abs(r));
}

std::pair<Eigen::VectorXd, RayleighTraceRecord> rayleigh_step(const Eigen::VectorXd& w,
                                                              const SpdModel& m, int t) {
    const double r = rho(w, m);
    if (r == 0.0) {
        throw std::domain_error("rayleigh_step: rho(w) = 0, degenerate start");
    }
    const double eta = m.sigma.quad(w) / (2.0 * m.sigma.big_l() * std::abs(r));
    const Eigen::VectorXd grad = grad_rho(w, m);

    RayleighTraceRecord rec;
    rec.t = t;
    rec.rho = r;
    rec.sin2 = sin2_s_angle(w, dominant_direction(m), m.sigma);
    rec.grad_norm_sinv = std::sqrt(m.sigma.inv_quad(grad));
    rec.eta = eta;
    return {w - eta * grad, rec};
}

OlsSolveResult solve_ols_gdnp(const SpdModel& m, const Eigen::VectorXd& w0, int steps,
                              int renorm_every) {
    if (steps < 0) {
        throw std::invalid_argument("solve_ols_gdnp: negative step count");
    }
    if (rho(w0, m) == 0.0) {
        throw std::domain_error("solve_ols_gdnp: rho(w0) = 0, degenerate start");
    }
    OlsSolveResult out;
    Eigen::VectorXd w = w0;
    out.iterates.push_back(w);
    for (int t = 0; t < steps; ++t) {
        auto [w_next, rec] = rayleigh_step(w, m, t);
        w = std::move(w_next);
        if (renorm_every > 0 && (t + 1) % renorm_every == 0) {
            w /= w.norm();
        }
        out.trace.push_back(rec);
        out.iterates.push_back(w);
    }
    out.w = w;
    out.g = optimal_scale(w, m);
    out.w_tilde = out.g * w / s_norm(w, m.sigma);
    return out;
}

}  // namespace normgrad
