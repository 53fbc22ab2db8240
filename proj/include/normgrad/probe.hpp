#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace normgrad {

enum class ProbeLoss { quadratic, softplus, cross_entropy };

// Synthetic batch for the probe: features plus regression targets or class
// labels depending on the loss.
struct ProbeData {
    Eigen::MatrixXd x;        // n x d
    Eigen::MatrixXd targets;  // n x k, quadratic loss
    Eigen::VectorXi labels;   // n, softplus (+-1) or cross-entropy (class id)
    int n() const { return static_cast<int>(x.rows()); }
};

ProbeData make_probe_data(int n, int in_dim, int out_dim, ProbeLoss loss, std::uint64_t seed);

// Small dense tanh network, configurable depth. In bn mode every hidden
// pre-activation column is divided by its batch RMS and multiplied by a
// trainable per-unit gain; there is no mean subtraction and no shift. The
// function is then exactly invariant to rescaling any hidden weight row.
struct ProbeNet {
    std::vector<Eigen::MatrixXd> weights;  // hidden layers then the linear output layer
    std::vector<Eigen::VectorXd> gains;    // one per hidden layer (bn mode only)
    bool bn = false;

    int layers() const { return static_cast<int>(weights.size()); }
    int hidden_layers() const { return layers() - 1; }

    static ProbeNet make(int in_dim, const std::vector<int>& hidden, int out_dim, bool bn,
                         std::uint64_t seed);
};

struct ProbeGrads {
    double loss = 0.0;
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_gains;
};

// Full-batch loss and exact gradients by manual reverse accumulation.
ProbeGrads probe_grads(const ProbeNet& net, ProbeLoss loss, const ProbeData& data);

double probe_loss(const ProbeNet& net, ProbeLoss loss, const ProbeData& data);

// Frobenius norm of the second-derivative block d^2 f / dW_i dW_j by central
// finite differences of the layer-i gradient under entrywise perturbations
// of layer j, taken in each net's own trainable coordinates.
double cross_dependency(const ProbeNet& net, int layer_i, int layer_j, ProbeLoss loss,
                        const ProbeData& data);

struct ProbeTraceRecord {
    int iter = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    std::vector<double> deps;  // cross_dependency values for cfg.dep_pairs, when sampled
};

struct ProbeTrainConfig {
    int steps = 500;
    double lr = 0.05;
    double lr_g_multiplier = 10.0;  // gain stepsize relative to lr (bn mode)
    int dep_every = 0;              // 0 disables periodic dependency snapshots
    std::vector<std::pair<int, int>> dep_pairs;
    double divergence_limit = 1e6;
};

// Full-batch descent; gains train only in bn mode. Aborts loudly on
// divergence.
std::vector<ProbeTraceRecord> train_probe(ProbeNet& net, ProbeLoss loss, const ProbeData& data,
                                          const ProbeTrainConfig& cfg);

}  // namespace normgrad
