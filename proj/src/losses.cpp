#include "normgrad/losses.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "normgrad/rng.hpp"

namespace normgrad {
namespace {

double stable_sigmoid(double s) {
    if (s >= 0.0) {
        return 1.0 / (1.0 + std::exp(-s));
    }
    const double e = std::exp(s);
    return e / (1.0 + e);
}

double stable_softplus(double s) {
    if (s > 0.0) {
        return s + std::log1p(std::exp(-s));
    }
    return std::log1p(std::exp(s));
}

// Golub-Welsch: eigen-decompose the Jacobi matrix of the recurrence. The
// nodes are the eigenvalues, the weights mu0 * v0^2 with v0 the first
// component of the normalized eigenvector.
void golub_welsch(const Eigen::VectorXd& offdiag, double mu0, std::vector<double>& nodes,
                  std::vector<double>& weights) {
    const int n = static_cast<int>(offdiag.size()) + 1;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        jacobi(i, i + 1) = offdiag(i);
        jacobi(i + 1, i) = offdiag(i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("quadrature rule construction failed");
    }
    nodes.resize(n);
    weights.resize(n);
    for (int j = 0; j < n; ++j) {
        nodes[j] = es.eigenvalues()(j);
        const double v0 = es.eigenvectors()(0, j);
        weights[j] = mu0 * v0 * v0;
    }
}

std::shared_ptr<const std::vector<double>> share(std::vector<double> v) {
    return std::make_shared<const std::vector<double>>(std::move(v));
}

// Above this variance a single Hermite rule loses digits on the sigmoid
// family, whose features live on a fixed unit scale; switch to panels.
constexpr double kPanelVarThreshold = 0.5;
constexpr double kPanelWidth = 1.0;
constexpr double kPanelSpanSigmas = 10.0;

// Beyond this coordinate the sigmoid family is saturated to machine
// accuracy, so panels are pointless there: each tail integrates the
// asymptote against the Gaussian in closed form instead. This caps the
// panel count no matter how wide the projection gets.
constexpr double kSatCut = 45.0;

double gauss_upper_mass(double alpha) { return 0.5 * std::erfc(alpha / std::sqrt(2.0)); }

double saturated_tails(const LossSpec& loss, int k, double mean, double sd, double span_lo,
                       double span_hi) {
    double acc = 0.0;
    if (span_hi > kSatCut) {
        const double alpha = (kSatCut - mean) / sd;
        const double mass = gauss_upper_mass(alpha);
        switch (loss.kind) {
            case LossKind::softplus:
                if (k == 0) {
                    // truncated first moment: softplus(s) ~ s past the cut
                    const double pdf = std::exp(-0.5 * alpha * alpha) / std::sqrt(2.0 * M_PI);
                    acc += mean * mass + sd * pdf;
                } else if (k == 1) {
                    acc += mass;
                }
                break;
            case LossKind::sigmoid:
            case LossKind::tanh_act:
                if (k == 0) {
                    acc += mass;
                }
                break;
            default:
                break;
        }
    }
    if (span_lo < -kSatCut && loss.kind == LossKind::tanh_act && k == 0) {
        acc -= gauss_upper_mass((mean + kSatCut) / sd);
    }
    return acc;
}

}  // namespace

double LossSpec::phi_bound() const {
    switch (kind) {
        case LossKind::softplus: return 1.0;
        case LossKind::sigmoid: return 0.25;
        case LossKind::quadratic: return std::numeric_limits<double>::infinity();
        case LossKind::linear: return 1.0;
        case LossKind::tanh_act: return 1.0;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

bool LossSpec::has_phi_bound() const { return std::isfinite(phi_bound()); }

double LossSpec::curvature_bound() const {
    switch (kind) {
        case LossKind::softplus: return 0.25;
        case LossKind::sigmoid: return 1.0 / (6.0 * std::sqrt(3.0));
        case LossKind::quadratic: return 2.0;
        case LossKind::linear: return 0.0;
        case LossKind::tanh_act: return 4.0 / (3.0 * std::sqrt(3.0));
    }
    return std::numeric_limits<double>::quiet_NaN();
}

const char* LossSpec::name() const {
    switch (kind) {
        case LossKind::softplus: return "softplus";
        case LossKind::sigmoid: return "sigmoid";
        case LossKind::quadratic: return "quadratic";
        case LossKind::linear: return "linear";
        case LossKind::tanh_act: return "tanh";
    }
    return "unknown";
}

double phi_k(const LossSpec& loss, int k, double s) {
    if (k < 0 || k > 2) {
        throw std::invalid_argument("phi_k: derivative order must be 0, 1 or 2");
    }
    switch (loss.kind) {
        case LossKind::softplus: {
            if (k == 0) return stable_softplus(s);
            const double g = stable_sigmoid(s);
            if (k == 1) return g;
            return g * (1.0 - g);
        }
        case LossKind::sigmoid: {
            const double g = stable_sigmoid(s);
            if (k == 0) return g;
            const double g1 = g * (1.0 - g);
            if (k == 1) return g1;
            return g1 * (1.0 - 2.0 * g);
        }
        case LossKind::quadratic:
            if (k == 0) return s * s;
            if (k == 1) return 2.0 * s;
            return 2.0;
        case LossKind::linear:
            if (k == 0) return s;
            if (k == 1) return 1.0;
            return 0.0;
        case LossKind::tanh_act: {
            const double t = std::tanh(s);
            if (k == 0) return t;
            const double t1 = 1.0 - t * t;
            if (k == 1) return t1;
            return -2.0 * t * t1;
        }
    }
    throw std::logic_error("phi_k: unhandled loss kind");
}

ExpectationEngine ExpectationEngine::gauss_hermite(int nodes) {
    if (nodes < 2) {
        throw std::invalid_argument("gauss_hermite: need at least 2 nodes");
    }
    ExpectationEngine e;
    e.mode_ = Mode::quadrature;

    // Hermite recurrence (physicists' weight e^{-x^2}): b_i = sqrt(i/2).
    Eigen::VectorXd hb(nodes - 1);
    for (int i = 1; i < nodes; ++i) {
        hb(i - 1) = std::sqrt(0.5 * i);
    }
    std::vector<double> hn, hw;
    golub_welsch(hb, std::sqrt(M_PI), hn, hw);
    e.gh_nodes_ = share(std::move(hn));
    e.gh_weights_ = share(std::move(hw));

    // Legendre rule for the panel path; order scales with the Hermite
    // budget so refinement studies exercise both branches.
    const int gl = std::max(4, nodes / 4);
    Eigen::VectorXd lb(gl - 1);
    for (int i = 1; i < gl; ++i) {
        lb(i - 1) = i / std::sqrt(4.0 * i * i - 1.0);
    }
    std::vector<double> ln, lw;
    golub_welsch(lb, 2.0, ln, lw);
    e.gl_nodes_ = share(std::move(ln));
    e.gl_weights_ = share(std::move(lw));
    return e;
}

ExpectationEngine ExpectationEngine::monte_carlo(std::size_t samples, std::uint64_t seed) {
    if (samples == 0) {
        throw std::invalid_argument("monte_carlo: need at least one sample");
    }
    ExpectationEngine e;
    e.mode_ = Mode::monte_carlo;
    e.mc_samples_ = samples;
    e.mc_seed_ = seed;
    return e;
}

double ExpectationEngine::expect_phi_k(const LossSpec& loss, int k, double mean,
                                       double var) const {
    const double scale = std::max(1.0, mean * mean);
    if (var < -1e-12 * scale) {
        throw std::invalid_argument("expect_phi_k: negative variance");
    }
    var = std::max(var, 0.0);
    if (var == 0.0) {
        return phi_k(loss, k, mean);
    }
    const double sd = std::sqrt(var);

    if (mode_ == Mode::monte_carlo) {
        Rng rng(mc_seed_, "expect_phi_k");
        double acc = 0.0;
        for (std::size_t i = 0; i < mc_samples_; ++i) {
            acc += phi_k(loss, k, mean + sd * rng.normal());
        }
        return acc / static_cast<double>(mc_samples_);
    }

    // Polynomial losses have exact Gaussian moments; quadrature adds
    // nothing but rounding, and the panel count would scale with sd.
    if (loss.kind == LossKind::quadratic) {
        if (k == 0) return mean * mean + var;
        if (k == 1) return 2.0 * mean;
        return 2.0;
    }
    if (loss.kind == LossKind::linear) {
        if (k == 0) return mean;
        if (k == 1) return 1.0;
        return 0.0;
    }

    if (var <= kPanelVarThreshold) {
        const std::vector<double>& xs = *gh_nodes_;
        const std::vector<double>& ws = *gh_weights_;
        const double c = std::sqrt(2.0) * sd;
        double acc = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            acc += ws[i] * phi_k(loss, k, mean + c * xs[i]);
        }
        return acc / std::sqrt(M_PI);
    }

    // Composite Legendre panels of fixed absolute width: the integrand
    // features sit on the loss's unit scale, not the Gaussian scale, so
    // panel width must not grow with sd. Panels only cover the window
    // where the loss still moves; the saturated tails go in analytically.
    const double span_lo = mean - kPanelSpanSigmas * sd;
    const double span_hi = mean + kPanelSpanSigmas * sd;
    const double tails = saturated_tails(loss, k, mean, sd, span_lo, span_hi);
    const double lo = std::max(span_lo, -kSatCut);
    const double hi = std::min(span_hi, kSatCut);
    if (!(lo < hi)) {
        return tails;
    }
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / kPanelWidth)));
    const double width = (hi - lo) / panels;
    const std::vector<double>& xs = *gl_nodes_;
    const std::vector<double>& ws = *gl_weights_;
    const double inv_two_var = 1.0 / (2.0 * var);
    const double norm = 1.0 / (sd * std::sqrt(2.0 * M_PI));
    double acc = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = lo + p * width;
        const double mid = a + 0.5 * width;
        const double half = 0.5 * width;
        double panel = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double s = mid + half * xs[i];
            const double d = s - mean;
            panel += ws[i] * phi_k(loss, k, s) * std::exp(-d * d * inv_two_var);
        }
        acc += panel * half;
    }
    return acc * norm + tails;
}

std::pair<double, double> projection_moments(const Eigen::VectorXd& w_tilde,
                                             const SpdModel& model) {
    const double mean = model.u.dot(w_tilde);
    const double q = model.sigma.quad(w_tilde);
    double var = q - mean * mean;
    const double tol = 1e-12 * std::max(1.0, q);
    if (var < -tol) {
        throw std::runtime_error("projection_moments: second moment below squared mean");
    }
    var = std::max(var, 0.0);
    return {mean, var};
}

SteinCoeffs stein_coeffs(const LossSpec& loss, const Eigen::VectorXd& w_tilde,
                         const SpdModel& model, const ExpectationEngine& engine) {
    const auto [mean, var] = projection_moments(w_tilde, model);
    const double e1 = engine.expect_phi_k(loss, 1, mean, var);
    const double e2 = engine.expect_phi_k(loss, 2, mean, var);
    SteinCoeffs c;
    c.c2 = e2;
    c.c1 = e1 - e2 * mean;
    return c;
}

double lh_objective(const LossSpec& loss, const Eigen::VectorXd& w_tilde, const SpdModel& model,
                    const ExpectationEngine& engine) {
    const auto [mean, var] = projection_moments(w_tilde, model);
    return engine.expect_phi_k(loss, 0, mean, var);
}

double lh_objective(const LossSpec& loss, const Eigen::VectorXd& w_tilde,
                    const EmpiricalDataset& data) {
    const Eigen::VectorXd s = data.z * w_tilde;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        acc += phi_k(loss, 0, s(i));
    }
    return acc / static_cast<double>(s.size());
}

Eigen::VectorXd lh_gradient_tilde(const LossSpec& loss, const Eigen::VectorXd& w_tilde,
                                  const SpdModel& model, const ExpectationEngine& engine) {
    const SteinCoeffs c = stein_coeffs(loss, w_tilde, model, engine);
    return c.c1 * model.u + c.c2 * model.sigma.apply(w_tilde);
}

Eigen::VectorXd lh_gradient_tilde(const LossSpec& loss, const Eigen::VectorXd& w_tilde,
                                  const EmpiricalDataset& data) {
    Eigen::VectorXd s = data.z * w_tilde;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        s(i) = phi_k(loss, 1, s(i));
    }
    return data.z.transpose() * s / static_cast<double>(s.size());
}

}  // namespace normgrad
