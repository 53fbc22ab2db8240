#pragma once

#include <cstdint>
#include <vector>

#include "normgrad/losses.hpp"
#include "normgrad/model.hpp"
#include "normgrad/sgeom.hpp"

namespace normgrad {

// One-hidden-layer tanh network with frozen output weights theta. Each unit
// carries a decoupled (direction, scale) pair; a unit with w = 0 is inactive
// and contributes nothing (its reconstruction is the zero vector).
struct MlpParams {
    std::vector<Eigen::VectorXd> dirs;
    Eigen::VectorXd scales;
    Eigen::VectorXd theta;

    int units() const { return static_cast<int>(dirs.size()); }
    int dim() const { return dirs.empty() ? 0 : static_cast<int>(dirs[0].size()); }
    Eigen::VectorXd unit_tilde(int i, const SpdMatrix& sigma) const;

    // Fresh network per the training protocol: directions zero, scales one,
    // equal output weights 1/m.
    static MlpParams zeros(int dim, int units);
};

// Scalar coefficients of one unit's gradient under the Gaussian model:
//   grad_{w~_i} f / theta_i = alpha u + beta S w~_i + sum_j gamma_j S w~_j.
// xi folds the trained units' alignment scalars into the drive coefficient
// that survives the direction projection.
struct UnitGradDecomp {
    double alpha = 0.0;
    double beta = 0.0;
    Eigen::VectorXd gamma;
    double xi = 0.0;
    bool premise_ok = true;
};

double mlp_forward(const MlpParams& p, const SpdMatrix& sigma, const Eigen::VectorXd& z);

// Sample-matrix estimators; rows of z are samples. The analytic Gaussian
// path draws one fixed seeded sample set and reuses it everywhere, so every
// quantity is a deterministic function of (model, seed).
double nn_objective(const MlpParams& p, const LossSpec& outer, const SpdMatrix& sigma,
                    const Eigen::MatrixXd& z);
Eigen::VectorXd unit_gradient_tilde(const MlpParams& p, int i, const LossSpec& outer,
                                    const SpdMatrix& sigma, const Eigen::MatrixXd& z);

// Gaussian-model convenience wrappers over a seeded sample set.
double nn_objective(const MlpParams& p, const LossSpec& outer, const SpdModel& m, int samples,
                    std::uint64_t seed);
Eigen::VectorXd unit_gradient_tilde(const MlpParams& p, int i, const LossSpec& outer,
                                    const SpdModel& m, int samples, std::uint64_t seed);

// Estimate the gradient decomposition scalars for unit i by sample means.
// c_prev supplies the alignment scalars of already-trained units (entries
// at or past i are ignored). premise_ok reports whether the other units
// look like the structural assumption: earlier ones aligned with S^{-1}u,
// later ones zero.
UnitGradDecomp unit_decomp(const MlpParams& p, int i, const LossSpec& outer, const SpdModel& m,
                           const Eigen::MatrixXd& z, const Eigen::VectorXd& c_prev);

// theta_i * (alpha u + beta S w~_i + sum_j gamma_j S w~_j).
Eigen::VectorXd reconstruct_unit_gradient(const MlpParams& p, int i, const UnitGradDecomp& dec,
                                          const SpdModel& m);

struct MlpUnitConfig {
    int t_d = 200;
    int t_s = 40;        // halvings for the final scale solve of each unit
    int t_s_warm = 12;   // halvings while the direction is still moving
    double bracket_lo = -8.0;
    double bracket_hi = 8.0;
    int renorm_every = 100;
};

struct MlpGdnpConfig {
    MlpUnitConfig unit;
    int samples = 200000;
    std::uint64_t seed = 1;
};

struct MlpUnitTraceRecord {
    int t = 0;
    double objective = 0.0;
    double grad_tilde_norm_sinv = 0.0;  // squared S^{-1}-norm of the reconstructed gradient
    double xi = 0.0;
    double g = 0.0;
    double s_t = 0.0;
    double premise_residual = 0.0;  // largest earlier-unit gradient norm at unit start
};

struct MlpTrainResult {
    MlpParams params;
    Eigen::VectorXd c;  // per-unit alignment scalars, fitted after training
    std::vector<std::vector<MlpUnitTraceRecord>> unit_traces;
};

// Unit-wise sequential training: each unit starts from a seeded nonzero
// direction and runs decoupled descent, the adaptive directional step with
// the xi-based stepsize followed by bisection on its scale. Directions of
// expectation vectors come from the decomposition scalars, so the direction
// update inherits the least-squares dynamics exactly.
MlpTrainResult train_mlp_gdnp(const LossSpec& outer, const SpdModel& m, int units,
                              const MlpGdnpConfig& cfg,
                              const Eigen::VectorXd& theta = Eigen::VectorXd());

}  // namespace normgrad
