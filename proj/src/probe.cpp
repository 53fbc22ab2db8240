#include "normgrad/probe.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "normgrad/rng.hpp"

namespace normgrad {
namespace {

double sigmoid_scalar(double s) {
    if (s >= 0.0) {
        return 1.0 / (1.0 + std::exp(-s));
    }
    const double e = std::exp(s);
    return e / (1.0 + e);
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[l+1] = hidden activations
    std::vector<Eigen::MatrixXd> pre;   // raw pre-activations per hidden layer
    std::vector<Eigen::VectorXd> rms;   // batch RMS per hidden column (bn mode)
    Eigen::MatrixXd out;                // linear output
};

ForwardCache forward(const ProbeNet& net, const Eigen::MatrixXd& x) {
    const int hidden = net.hidden_layers();
    ForwardCache c;
    c.acts.reserve(static_cast<std::size_t>(hidden) + 1);
    c.acts.push_back(x);
    const double n = static_cast<double>(x.rows());
    for (int l = 0; l < hidden; ++l) {
        Eigen::MatrixXd p = c.acts.back() * net.weights[static_cast<std::size_t>(l)].transpose();
        Eigen::MatrixXd q = p;
        Eigen::VectorXd s;
        if (net.bn) {
            s = (p.colwise().squaredNorm() / n).cwiseSqrt().transpose();
            for (Eigen::Index j = 0; j < q.cols(); ++j) {
                if (s(j) == 0.0) {
                    throw std::runtime_error("probe forward: zero batch RMS column");
                }
                q.col(j) *= net.gains[static_cast<std::size_t>(l)](j) / s(j);
            }
        }
        c.pre.push_back(std::move(p));
        c.rms.push_back(std::move(s));
        c.acts.push_back(q.array().tanh().matrix());
    }
    c.out = c.acts.back() * net.weights.back().transpose();
    return c;
}

// Loss value and its gradient with respect to the network output.
double loss_and_delta(ProbeLoss loss, const Eigen::MatrixXd& out, const ProbeData& data,
                      Eigen::MatrixXd& delta) {
    const double n = static_cast<double>(out.rows());
    switch (loss) {
        case ProbeLoss::quadratic: {
            const Eigen::MatrixXd r = out - data.targets;
            delta = 2.0 * r / n;
            return r.squaredNorm() / n;
        }
        case ProbeLoss::softplus: {
            if (out.cols() != 1) {
                throw std::invalid_argument("softplus probe loss needs one output");
            }
            delta.resize(out.rows(), 1);
            double acc = 0.0;
            for (Eigen::Index i = 0; i < out.rows(); ++i) {
                const double m = -static_cast<double>(data.labels(i)) * out(i, 0);
                acc += m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
                delta(i, 0) = -static_cast<double>(data.labels(i)) * sigmoid_scalar(m) / n;
            }
            return acc / n;
        }
        case ProbeLoss::cross_entropy: {
            delta.resize(out.rows(), out.cols());
            double acc = 0.0;
            for (Eigen::Index i = 0; i < out.rows(); ++i) {
                const double mx = out.row(i).maxCoeff();
                const Eigen::ArrayXd e = (out.row(i).array() - mx).exp();
                const double z = e.sum();
                acc += std::log(z) + mx - out(i, data.labels(i));
                delta.row(i) = (e / z).matrix().transpose() / n;
                delta(i, data.labels(i)) -= 1.0 / n;
            }
            return acc / n;
        }
    }
    throw std::logic_error("loss_and_delta: unhandled probe loss");
}

}  // namespace

ProbeData make_probe_data(int n, int in_dim, int out_dim, ProbeLoss loss, std::uint64_t seed) {
    if (n < 2 || in_dim < 1 || out_dim < 1) {
        throw std::invalid_argument("make_probe_data: bad sizes");
    }
    Rng rng(seed, "probe_data");
    ProbeData d;
    d.x.resize(n, in_dim);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < in_dim; ++j) {
            d.x(i, j) = rng.normal();
        }
    }
    Eigen::MatrixXd teacher(in_dim, out_dim);
    for (int i = 0; i < in_dim; ++i) {
        for (int j = 0; j < out_dim; ++j) {
            teacher(i, j) = rng.normal() / std::sqrt(static_cast<double>(in_dim));
        }
    }
    const Eigen::MatrixXd scores = d.x * teacher;
    switch (loss) {
        case ProbeLoss::quadratic:
            d.targets = scores;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < out_dim; ++j) {
                    d.targets(i, j) += 0.05 * rng.normal();
                }
            }
            break;
        case ProbeLoss::softplus:
            if (out_dim != 1) {
                throw std::invalid_argument("make_probe_data: softplus needs out_dim = 1");
            }
            d.labels.resize(n);
            for (int i = 0; i < n; ++i) {
                d.labels(i) = scores(i, 0) >= 0.0 ? 1 : -1;
            }
            break;
        case ProbeLoss::cross_entropy:
            d.labels.resize(n);
            for (int i = 0; i < n; ++i) {
                Eigen::Index arg = 0;
                scores.row(i).maxCoeff(&arg);
                d.labels(i) = static_cast<int>(arg);
            }
            break;
    }
    return d;
}

ProbeNet ProbeNet::make(int in_dim, const std::vector<int>& hidden, int out_dim, bool bn,
                        std::uint64_t seed) {
    if (in_dim < 1 || out_dim < 1) {
        throw std::invalid_argument("ProbeNet::make: bad sizes");
    }
    Rng rng(seed, "probe_net");
    ProbeNet net;
    net.bn = bn;
    int fan_in = in_dim;
    for (int width : hidden) {
        if (width < 1) {
            throw std::invalid_argument("ProbeNet::make: bad hidden width");
        }
        Eigen::MatrixXd w(width, fan_in);
        for (int a = 0; a < width; ++a) {
            for (int b = 0; b < fan_in; ++b) {
                w(a, b) = rng.normal() / std::sqrt(static_cast<double>(fan_in));
            }
        }
        net.weights.push_back(std::move(w));
        net.gains.push_back(Eigen::VectorXd::Ones(width));
        fan_in = width;
    }
    Eigen::MatrixXd w_out(out_dim, fan_in);
    for (int a = 0; a < out_dim; ++a) {
        for (int b = 0; b < fan_in; ++b) {
            w_out(a, b) = rng.normal() / std::sqrt(static_cast<double>(fan_in));
        }
    }
    net.weights.push_back(std::move(w_out));
    return net;
}

ProbeGrads probe_grads(const ProbeNet& net, ProbeLoss loss, const ProbeData& data) {
    const ForwardCache c = forward(net, data.x);
    const int hidden = net.hidden_layers();
    const double n = static_cast<double>(data.x.rows());

    ProbeGrads g;
    g.d_weights.resize(static_cast<std::size_t>(net.layers()));
    g.d_gains.resize(static_cast<std::size_t>(hidden));

    Eigen::MatrixXd delta_out;
    g.loss = loss_and_delta(loss, c.out, data, delta_out);

    g.d_weights.back() = delta_out.transpose() * c.acts.back();
    Eigen::MatrixXd delta_act = delta_out * net.weights.back();

    for (int l = hidden - 1; l >= 0; --l) {
        const Eigen::MatrixXd& act = c.acts[static_cast<std::size_t>(l) + 1];
        Eigen::MatrixXd delta_q =
            (delta_act.array() * (1.0 - act.array().square())).matrix();
        Eigen::MatrixXd delta_p;
        if (net.bn) {
            const Eigen::MatrixXd& p = c.pre[static_cast<std::size_t>(l)];
            const Eigen::VectorXd& s = c.rms[static_cast<std::size_t>(l)];
            const Eigen::VectorXd& gain = net.gains[static_cast<std::size_t>(l)];
            delta_p.resizeLike(p);
            Eigen::VectorXd d_gain(p.cols());
            for (Eigen::Index j = 0; j < p.cols(); ++j) {
                const double dq_p = delta_q.col(j).dot(p.col(j));
                d_gain(j) = dq_p / s(j);
                delta_p.col(j) = (gain(j) / s(j)) *
                                 (delta_q.col(j) - p.col(j) * (dq_p / (n * s(j) * s(j))));
            }
            g.d_gains[static_cast<std::size_t>(l)] = std::move(d_gain);
        } else {
            delta_p = std::move(delta_q);
            g.d_gains[static_cast<std::size_t>(l)] =
                Eigen::VectorXd::Zero(net.gains[static_cast<std::size_t>(l)].size());
        }
        g.d_weights[static_cast<std::size_t>(l)] =
            delta_p.transpose() * c.acts[static_cast<std::size_t>(l)];
        if (l > 0) {
            delta_act = delta_p * net.weights[static_cast<std::size_t>(l)];
        }
    }
    return g;
}

double probe_loss(const ProbeNet& net, ProbeLoss loss, const ProbeData& data) {
    Eigen::MatrixXd unused;
    return loss_and_delta(loss, forward(net, data.x).out, data, unused);
}

double cross_dependency(const ProbeNet& net, int layer_i, int layer_j, ProbeLoss loss,
                        const ProbeData& data) {
    if (layer_i < 0 || layer_i >= net.layers() || layer_j < 0 || layer_j >= net.layers()) {
        throw std::out_of_range("cross_dependency: invalid layer index");
    }
    // Differentiate in each net's own parameters. For a normalized layer
    // these are its direction coordinates: the RMS quotient makes the row
    // scale a gauge freedom, and its growth during training is part of
    // what this measurement observes.
    ProbeNet probe = net;
    Eigen::MatrixXd& w_j = probe.weights[static_cast<std::size_t>(layer_j)];
    const double h = 1e-4 * (1.0 + w_j.array().abs().maxCoeff());
    double sumsq = 0.0;
    for (Eigen::Index a = 0; a < w_j.rows(); ++a) {
        for (Eigen::Index b = 0; b < w_j.cols(); ++b) {
            const double saved = w_j(a, b);
            w_j(a, b) = saved + h;
            const Eigen::MatrixXd plus =
                probe_grads(probe, loss, data).d_weights[static_cast<std::size_t>(layer_i)];
            w_j(a, b) = saved - h;
            const Eigen::MatrixXd minus =
                probe_grads(probe, loss, data).d_weights[static_cast<std::size_t>(layer_i)];
            w_j(a, b) = saved;
            sumsq += ((plus - minus) / (2.0 * h)).squaredNorm();
        }
    }
    return std::sqrt(sumsq);
}

std::vector<ProbeTraceRecord> train_probe(ProbeNet& net, ProbeLoss loss, const ProbeData& data,
                                          const ProbeTrainConfig& cfg) {
    if (cfg.steps < 0 || cfg.lr < 0.0) {
        throw std::invalid_argument("train_probe: bad config");
    }
    std::vector<ProbeTraceRecord> trace;
    trace.reserve(static_cast<std::size_t>(cfg.steps));
    for (int it = 1; it <= cfg.steps; ++it) {
        ProbeGrads g = probe_grads(net, loss, data);
        if (!std::isfinite(g.loss) || g.loss > cfg.divergence_limit) {
            std::ostringstream msg;
            msg << "train_probe: diverged at iteration " << it << " with loss " << g.loss;
            throw std::runtime_error(msg.str());
        }
        double sumsq = 0.0;
        for (const auto& dw : g.d_weights) {
            sumsq += dw.squaredNorm();
        }
        if (net.bn) {
            for (const auto& dg : g.d_gains) {
                sumsq += dg.squaredNorm();
            }
        }
        for (int l = 0; l < net.layers(); ++l) {
            net.weights[static_cast<std::size_t>(l)] -=
                cfg.lr * g.d_weights[static_cast<std::size_t>(l)];
        }
        if (net.bn) {
            for (int l = 0; l < net.hidden_layers(); ++l) {
                net.gains[static_cast<std::size_t>(l)] -=
                    cfg.lr * cfg.lr_g_multiplier * g.d_gains[static_cast<std::size_t>(l)];
            }
        }
        ProbeTraceRecord rec;
        rec.iter = it;
        rec.loss = g.loss;
        rec.grad_norm = std::sqrt(sumsq);
        if (cfg.dep_every > 0 && !cfg.dep_pairs.empty() &&
            (it % cfg.dep_every == 0 || it == cfg.steps)) {
            for (const auto& [a, b] : cfg.dep_pairs) {
                rec.deps.push_back(cross_dependency(net, a, b, loss, data));
            }
        }
        trace.push_back(std::move(rec));
    }
    return trace;
}

}  // namespace normgrad
