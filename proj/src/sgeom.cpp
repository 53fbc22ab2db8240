#include "normgrad/sgeom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace normgrad {

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) {
        throw std::invalid_argument("SpdMatrix: matrix must be square and non-empty");
    }
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    const double asym = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) {
        throw std::invalid_argument("SpdMatrix: matrix not symmetric");
    }
    m_ = ((m_ + m_.transpose()) / 2.0).eval();
    const auto bounds = spectral_bounds(m_);
    mu_ = bounds.first;
    big_l_ = bounds.second;
    llt_.compute(m_);
    if (llt_.info() != Eigen::Success) {
        throw std::invalid_argument("SpdMatrix: Cholesky factorization failed");
    }
}

SpdMatrix SpdMatrix::identity(int dim) {
    return SpdMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

std::pair<double, double> spectral_bounds(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("spectral_bounds: eigensolver failed");
    }
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0) {
        throw std::invalid_argument("spectral_bounds: matrix not positive definite");
    }
    return {lo, hi};
}

double s_norm(const Eigen::VectorXd& w, const SpdMatrix& s) {
    return std::sqrt(s.quad(w));
}

double s_inner(const Eigen::VectorXd& w, const Eigen::VectorXd& v, const SpdMatrix& s) {
    return w.dot(s.apply(v));
}

double sin2_s_angle(const Eigen::VectorXd& w, const Eigen::VectorXd& v, const SpdMatrix& s) {
    const double nw = s.quad(w);
    const double nv = s.quad(v);
    if (nw <= 0.0 || nv <= 0.0) {
        throw std::invalid_argument("sin2_s_angle: zero vector");
    }
    // Residual of the S-orthogonal projection. Evaluating 1 - cos^2 here
    // would cancel catastrophically near alignment, exactly where callers
    // track contraction rates on the sine itself.
    const Eigen::VectorXd r = w - (s_inner(w, v, s) / nv) * v;
    return std::clamp(s.quad(r) / nw, 0.0, 1.0);
}

Eigen::VectorXd a_w_apply(const Eigen::VectorXd& w, const SpdMatrix& s, const Eigen::VectorXd& x) {
    const double n2 = s.quad(w);
    if (n2 <= 0.0) {
        throw std::invalid_argument("a_w_apply: zero direction");
    }
    const double n = std::sqrt(n2);
    return x / n - s.apply(w) * (w.dot(x) / (n2 * n));
}

Eigen::MatrixXd s_orth_complement_basis(const Eigen::VectorXd& v1, const SpdMatrix& s) {
    const int d = s.dim();
    if (v1.size() != d) {
        throw std::invalid_argument("s_orth_complement_basis: dimension mismatch");
    }
    const double nv1 = s_norm(v1, s);
    if (nv1 <= 0.0) {
        throw std::invalid_argument("s_orth_complement_basis: zero v1");
    }

    Eigen::MatrixXd q(d, d);
    q.col(0) = v1 / nv1;
    int filled = 1;
    // Modified Gram-Schmidt in the S inner product over the standard basis,
    // with one re-orthogonalization pass per accepted vector. Exactly one
    // candidate collapses (it lies in the span of v1 and earlier picks).
    for (int j = 0; j < d && filled < d; ++j) {
        Eigen::VectorXd c = Eigen::VectorXd::Unit(d, j);
        for (int pass = 0; pass < 2; ++pass) {
            for (int k = 0; k < filled; ++k) {
                c -= q.col(k) * s_inner(q.col(k), c, s);
            }
        }
        const double n = s_norm(c, s);
        if (n > 1e-8) {
            q.col(filled++) = c / n;
        }
    }
    if (filled != d) {
        throw std::runtime_error("s_orth_complement_basis: basis construction collapsed");
    }
    return q.rightCols(d - 1);
}

}  // namespace normgrad
