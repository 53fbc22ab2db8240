#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "normgrad/losses.hpp"
#include "normgrad/model.hpp"
#include "normgrad/sgeom.hpp"

namespace normgrad {

// Decoupled parameterization of a halfspace weight: direction w and length g,
// reconstructing w~ = g * w / ||w||_S. Invariant under positive rescaling
// of w.
struct NormState {
    Eigen::VectorXd w;
    double g = 1.0;

    Eigen::VectorXd w_tilde(const SpdMatrix& sigma) const;
};

struct GdnpConfig {
    int t_d = 100;           // directional iterations
    int t_s = 40;            // bisection halvings per scale update
    double bracket_lo = -8.0;
    double bracket_hi = 8.0;
    int g_inner_steps = 0;   // > 0 replaces bisection with plain gradient steps on g
    double lr_g = 0.0;       // 0 picks 1/sup|phi''|
    int renorm_every = 100;  // unit-2-norm renormalization cadence for w
};

struct HalfspaceTraceRecord {
    int t = 0;
    double objective = 0.0;
    double grad_tilde_norm_sinv = 0.0;  // squared S^{-1}-norm of the w~-gradient
    double dir_grad_norm = 0.0;
    double g = 0.0;
    double h_value = 0.0;
    double s_t = 0.0;
    double rho = 0.0;   // quotient value at the current direction
    double sin2 = 0.0;  // squared S-angle to the dominant direction
};

// One halfspace learning problem: a loss plus either the analytic Gaussian
// model (expectations through a quadrature engine) or an empirical dataset
// (sample means). All solvers speak to this interface only.
class HalfspaceProblem {
public:
    static HalfspaceProblem analytic(LossSpec loss, std::shared_ptr<const SpdModel> model,
                                     ExpectationEngine engine);
    static HalfspaceProblem empirical(LossSpec loss, std::shared_ptr<const EmpiricalDataset> data,
                                      double ridge = -1.0);

    bool is_analytic() const { return model_ != nullptr; }
    const LossSpec& loss() const { return loss_; }
    const Eigen::VectorXd& u() const;
    const SpdMatrix& sigma() const;
    double mu() const { return sigma().mu(); }
    double big_l() const { return sigma().big_l(); }
    // u'S^{-1}u, the squared S^{-1}-norm of the linear term.
    double lambda1() const;
    // Curvature scale for the scale-search residual bound: sup|phi''| * L on
    // the analytic path, the dataset estimate on the empirical path.
    double zeta() const;
    const SpdModel& model() const;
    const EmpiricalDataset& data() const;

    double objective(const Eigen::VectorXd& w_tilde) const;
    Eigen::VectorXd gradient_tilde(const Eigen::VectorXd& w_tilde) const;
    // Gradient-mean coefficients at w~: analytic via Stein's identity,
    // empirical via sample means of phi' and phi''.
    SteinCoeffs coeffs(const Eigen::VectorXd& w_tilde) const;

    // Gradient in the (w, g) parameterization.
    Eigen::VectorXd dir_gradient(const NormState& st) const;
    double partial_g(const Eigen::VectorXd& w, double g) const;

private:
    HalfspaceProblem() = default;

    LossSpec loss_;
    std::shared_ptr<const SpdModel> model_;
    std::optional<ExpectationEngine> engine_;
    std::shared_ptr<const EmpiricalDataset> data_;
    std::shared_ptr<const ModelStats> stats_;
};

// Stopping scalar h(w, g) = c1(w~) * (u'w). Zero exactly when the
// directional gradient vanishes; guards the directional step.
double h_stop(const NormState& st, const HalfspaceProblem& p);

// Adaptive directional step: s_t = -||w||_S^3 / (L g h), w <- w - s_t grad_w f.
// |h| below h_zero_tol leaves the state unchanged (converged direction).
NormState directional_step(const NormState& st, const HalfspaceProblem& p,
                           double* s_t_out = nullptr, double* h_out = nullptr);

inline constexpr double kHZeroTol = 1e-14;

struct BisectionResult {
    double g = 0.0;
    double bracket_width = 0.0;  // width actually searched, after any expansion
    int expansions = 0;
};

// Root bisection on [a0, b0], t_s halvings, returning the left endpoint.
// A bracket without a sign change is widened geometrically around its
// midpoint (up to 60 doublings) before giving up.
BisectionResult bisection(const std::function<double(double)>& partial_g, double a0, double b0,
                          int t_s);

struct GdnpResult {
    NormState state;
    Eigen::VectorXd w_tilde;
    std::vector<HalfspaceTraceRecord> trace;
    std::vector<Eigen::VectorXd> w_iterates;  // includes the start
    double last_bracket_width = 0.0;
};

// Decoupled descent: per outer iteration one adaptive directional step
// (skipped while h = 0) followed by a scale update, bisection on the scale
// derivative by default or cfg.g_inner_steps plain gradient steps on g.
// The first scale search uses the configured bracket verbatim; later ones
// recenter the same width on the current g. t_d = 0 performs a single scale
// update at the start direction.
GdnpResult gdnp_run(const HalfspaceProblem& p, const GdnpConfig& cfg, const Eigen::VectorXd& w0,
                    double g0 = 1.0);

struct BaselineResult {
    Eigen::VectorXd w_tilde;
    std::vector<HalfspaceTraceRecord> trace;
};

BaselineResult gd_run(const HalfspaceProblem& p, const Eigen::VectorXd& w_tilde0, double stepsize,
                      int steps);

// Momentum schedule: (t-2)/(t+1) for the convex setting when beta_const < 0,
// otherwise the supplied constant.
double agd_momentum(int t, double beta_const = -1.0);

BaselineResult agd_run(const HalfspaceProblem& p, const Eigen::VectorXd& w_tilde0, double stepsize,
                       int steps, double beta_const = -1.0);

// Fixed-step simultaneous descent on (w, g) under the S-reparameterization
// (bn) or the plain Euclidean one (wn).
BaselineResult bn_gd_run(const HalfspaceProblem& p, const NormState& st0, double lr_w, double lr_g,
                         int steps);
BaselineResult wn_gd_run(const HalfspaceProblem& p, const NormState& st0, double lr_w, double lr_g,
                         int steps);

// Seeded unit start with a guaranteed nonzero quotient.
Eigen::VectorXd find_init(const Eigen::VectorXd& u, const SpdMatrix& sigma, std::uint64_t seed);
Eigen::VectorXd find_init(const SpdModel& m, std::uint64_t seed);
Eigen::VectorXd find_init(const HalfspaceProblem& p, std::uint64_t seed);

}  // namespace normgrad
