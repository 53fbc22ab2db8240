#pragma once

#include <vector>

#include "normgrad/model.hpp"
#include "normgrad/sgeom.hpp"

namespace normgrad {

struct RayleighTraceRecord {
    int t = 0;
    double rho = 0.0;        // quotient value, in [-lambda1, 0]
    double sin2 = 0.0;       // sin^2 of the S-angle to the dominant direction
    double grad_norm_sinv = 0.0;
    double eta = 0.0;
};

struct OlsSolveResult {
    Eigen::VectorXd w;
    double g = 0.0;
    Eigen::VectorXd w_tilde;
    std::vector<RayleighTraceRecord> trace;
    // Direction iterates including the start, for sequence-level comparisons.
    std::vector<Eigen::VectorXd> iterates;
};

// rho(w) = -(u'w)^2 / w'Sw. Minimizing it over directions solves the
// least-squares problem once the closed-form scale is applied.
double rho(const Eigen::VectorXd& w, const SpdModel& m);

// Closed-form scale minimizing the reparametrized objective at direction w.
double optimal_scale(const Eigen::VectorXd& w, const SpdModel& m);

Eigen::VectorXd grad_rho(const Eigen::VectorXd& w, const SpdModel& m);

// -S^{-1}u normalized to unit S-norm; the minimizing direction. Test and
// trace instrumentation only, the solvers never consult it.
Eigen::VectorXd dominant_direction(const SpdModel& m);

double rayleigh_stepsize(const Eigen::VectorXd& w, const SpdModel& m);

// One adaptive-stepsize descent step on rho. Requires rho(w) != 0.
std::pair<Eigen::VectorXd, RayleighTraceRecord> rayleigh_step(const Eigen::VectorXd& w,
                                                              const SpdModel& m, int t = 0);

// T descent steps on the quotient, then the closed-form scale. Iterates are
// renormalized to unit 2-norm every renorm_every steps (the objective is
// scale invariant, so this only guards against float drift).
OlsSolveResult solve_ols_gdnp(const SpdModel& m, const Eigen::VectorXd& w0, int steps,
                              int renorm_every = 100);

}  // namespace normgrad
