#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "normgrad/model.hpp"
#include "normgrad/sgeom.hpp"

namespace normgrad {

// Scalar loss catalog. softplus, sigmoid and quadratic are the experiment
// losses; linear and tanh exist for composition tests and as the network
// activation. Derivatives are available up to order two.
enum class LossKind { softplus, sigmoid, quadratic, linear, tanh_act };

struct LossSpec {
    LossKind kind = LossKind::softplus;

    // Envelope constant for the linear-rate bounds; infinite for quadratic.
    double phi_bound() const;
    bool has_phi_bound() const;
    // sup |phi''|, used for curvature-scaled stepsizes and residual bounds.
    double curvature_bound() const;
    const char* name() const;

    static LossSpec softplus() { return {LossKind::softplus}; }
    static LossSpec sigmoid() { return {LossKind::sigmoid}; }
    static LossSpec quadratic() { return {LossKind::quadratic}; }
    static LossSpec linear() { return {LossKind::linear}; }
    static LossSpec tanh_act() { return {LossKind::tanh_act}; }
};

// k-th derivative of the loss at s, k in {0, 1, 2}.
double phi_k(const LossSpec& loss, int k, double s);

// E[phi^(k)(s)] for s ~ N(mean, var). The quadrature engine uses
// Gauss-Hermite nodes for concentrated inputs and switches to a composite
// fixed-width Gauss-Legendre rule in s-space once the standard deviation is
// comparable to the unit feature scale of the loss family, where a single
// Hermite rule stops converging. Monte Carlo mode exists as an audit path.
class ExpectationEngine {
public:
    static ExpectationEngine gauss_hermite(int nodes = 64);
    static ExpectationEngine monte_carlo(std::size_t samples, std::uint64_t seed);

    double expect_phi_k(const LossSpec& loss, int k, double mean, double var) const;
    bool is_quadrature() const { return mode_ == Mode::quadrature; }

private:
    enum class Mode { quadrature, monte_carlo };
    ExpectationEngine() = default;

    Mode mode_ = Mode::quadrature;
    std::shared_ptr<const std::vector<double>> gh_nodes_;
    std::shared_ptr<const std::vector<double>> gh_weights_;
    std::shared_ptr<const std::vector<double>> gl_nodes_;
    std::shared_ptr<const std::vector<double>> gl_weights_;
    std::size_t mc_samples_ = 0;
    std::uint64_t mc_seed_ = 0;
};

// Coefficients of the population gradient E[phi'(z'w~) z] = c1 u + c2 S w~
// under the Gaussian model: c1 = E[phi'] - E[phi''] (u'w~), c2 = E[phi''].
struct SteinCoeffs {
    double c1 = 0.0;
    double c2 = 0.0;
};

SteinCoeffs stein_coeffs(const LossSpec& loss, const Eigen::VectorXd& w_tilde,
                         const SpdModel& model, const ExpectationEngine& engine);

// E[phi(z'w~)], analytic model or sample mean.
double lh_objective(const LossSpec& loss, const Eigen::VectorXd& w_tilde, const SpdModel& model,
                    const ExpectationEngine& engine);
double lh_objective(const LossSpec& loss, const Eigen::VectorXd& w_tilde,
                    const EmpiricalDataset& data);

// Gradient in the solution coordinates. The analytic path assembles
// c1 u + c2 S w~; the empirical path averages phi'(z_i'w~) z_i directly.
Eigen::VectorXd lh_gradient_tilde(const LossSpec& loss, const Eigen::VectorXd& w_tilde,
                                  const SpdModel& model, const ExpectationEngine& engine);
Eigen::VectorXd lh_gradient_tilde(const LossSpec& loss, const Eigen::VectorXd& w_tilde,
                                  const EmpiricalDataset& data);

// (mean, var) of the scalar projection z'w~ under the model; var is clamped
// at zero within a small relative tolerance and rejected below it.
std::pair<double, double> projection_moments(const Eigen::VectorXd& w_tilde,
                                             const SpdModel& model);

}  // namespace normgrad
