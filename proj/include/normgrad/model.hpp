#pragma once

#include <cstdint>
#include <string>

#include "normgrad/sgeom.hpp"

namespace normgrad {

// Analytic Gaussian data model. sigma is the raw second moment E[z z'],
// not the covariance; the covariance sigma - u u' must be positive
// semidefinite, which the constructor validates. lambda1 = u' sigma^{-1} u.
struct SpdModel {
    Eigen::VectorXd u;
    SpdMatrix sigma;
    double lambda1;

    SpdModel(Eigen::VectorXd u_in, SpdMatrix sigma_in);
    int dim() const { return sigma.dim(); }
};

// Raw labeled design, rows of x paired with labels in {-1, +1}.
struct LabeledData {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    int n() const { return static_cast<int>(x.rows()); }
    int dim() const { return static_cast<int>(x.cols()); }
};

// Folded sample matrix: row i is z_i = -y_i x_i after feature centering.
struct EmpiricalDataset {
    Eigen::MatrixXd z;
    bool centered = false;
    int n() const { return static_cast<int>(z.rows()); }
    int dim() const { return static_cast<int>(z.cols()); }
};

// Sample moments of a dataset plus the conservative curvature scale
// zeta_sup = lambda_max(Z'Z)/10 used for fixed-step baselines.
struct ModelStats {
    Eigen::VectorXd u_hat;
    SpdMatrix sigma_hat;
    double zeta_sup;
};

// Sparse 1-based "label idx:val ..." rows; labels must be +-1.
// expected_dim = 0 infers the width from the largest index seen.
LabeledData load_libsvm(const std::string& path, int expected_dim = 0);

// Column-center x, then fold labels in. Centering twice is a no-op.
EmpiricalDataset center_and_fold(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// ridge < 0 selects the default 1e-8 * trace(sigma_hat)/d. ridge = 0 is
// honored and fails loudly when the raw second moment is singular.
ModelStats compute_stats(const EmpiricalDataset& data, double ridge = -1.0);

// n draws of z ~ N(u, sigma - u u'), deterministic in seed. The covariance
// factor comes from an eigendecomposition so a degenerate sigma = u u'
// yields every sample equal to u.
EmpiricalDataset sample_gaussian(const SpdModel& model, int n, std::uint64_t seed);

}  // namespace normgrad
