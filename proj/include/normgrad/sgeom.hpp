#pragma once

#include <Eigen/Dense>
#include <utility>

namespace normgrad {

// Symmetric positive definite second-moment matrix with cached spectral
// bounds (mu = smallest eigenvalue, big_l = largest) and a Cholesky factor
// for inverse applications. Immutable after construction.
class SpdMatrix {
public:
    explicit SpdMatrix(Eigen::MatrixXd m);

    static SpdMatrix identity(int dim);

    int dim() const { return static_cast<int>(m_.rows()); }
    const Eigen::MatrixXd& entries() const { return m_; }
    double mu() const { return mu_; }
    double big_l() const { return big_l_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return m_ * x; }
    Eigen::VectorXd solve(const Eigen::VectorXd& x) const { return llt_.solve(x); }
    // w' M w
    double quad(const Eigen::VectorXd& w) const { return w.dot(m_ * w); }
    // x' M^{-1} x, via the cached factorization
    double inv_quad(const Eigen::VectorXd& x) const { return x.dot(llt_.solve(x)); }

private:
    Eigen::MatrixXd m_;
    double mu_ = 0.0;
    double big_l_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

// (smallest, largest) eigenvalue of a symmetric matrix; throws if the
// smallest is not strictly positive.
std::pair<double, double> spectral_bounds(const Eigen::MatrixXd& sym);

// ||w||_S = sqrt(w' S w)
double s_norm(const Eigen::VectorXd& w, const SpdMatrix& s);

double s_inner(const Eigen::VectorXd& w, const Eigen::VectorXd& v, const SpdMatrix& s);

// sin^2 of the S-angle between w and v, clamped to [0, 1].
double sin2_s_angle(const Eigen::VectorXd& w, const Eigen::VectorXd& v, const SpdMatrix& s);

// Action of the reparametrization Jacobian kernel projector:
//   A_w x = x/||w||_S - (S w)(w' x)/||w||_S^3.
// A_w (S w) = 0 holds identically.
Eigen::VectorXd a_w_apply(const Eigen::VectorXd& w, const SpdMatrix& s, const Eigen::VectorXd& x);

// d x (d-1) matrix whose columns are S-orthonormal and S-orthogonal to v1.
Eigen::MatrixXd s_orth_complement_basis(const Eigen::VectorXd& v1, const SpdMatrix& s);

}  // namespace normgrad
