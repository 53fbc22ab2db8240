#include "normgrad/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "normgrad/rng.hpp"

namespace normgrad {

SpdModel::SpdModel(Eigen::VectorXd u_in, SpdMatrix sigma_in)
    : u(std::move(u_in)), sigma(std::move(sigma_in)), lambda1(0.0) {
    if (u.size() != sigma.dim()) {
        throw std::invalid_argument("SpdModel: u and sigma dimensions differ");
    }
    const Eigen::MatrixXd cov = sigma.entries() - u * u.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    const double tol = 1e-10 * std::max(1.0, sigma.big_l());
    if (es.eigenvalues().minCoeff() < -tol) {
        throw std::invalid_argument("SpdModel: sigma - u u' is not positive semidefinite");
    }
    lambda1 = u.dot(sigma.solve(u));
}

LabeledData load_libsvm(const std::string& path, int expected_dim) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_libsvm: cannot open " + path);
    }
    std::vector<double> labels;
    std::vector<std::vector<std::pair<int, double>>> rows;
    int max_index = 0;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip trailing comment
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;  // blank line
        double label = 0.0;
        try {
            std::size_t used = 0;
            label = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw std::runtime_error("load_libsvm: " + path + ":" + std::to_string(lineno) +
                                     ": malformed label '" + tok + "'");
        }
        if (label != 1.0 && label != -1.0) {
            throw std::runtime_error("load_libsvm: " + path + ":" + std::to_string(lineno) +
                                     ": non-binary label " + tok);
        }
        std::vector<std::pair<int, double>> feats;
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size()) {
                throw std::runtime_error("load_libsvm: " + path + ":" + std::to_string(lineno) +
                                         ": malformed feature '" + tok + "'");
            }
            int idx = 0;
            double val = 0.0;
            try {
                std::size_t used = 0;
                idx = std::stoi(tok.substr(0, colon), &used);
                if (used != colon) throw std::invalid_argument(tok);
                val = std::stod(tok.substr(colon + 1), &used);
                if (used != tok.size() - colon - 1) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw std::runtime_error("load_libsvm: " + path + ":" + std::to_string(lineno) +
                                         ": malformed feature '" + tok + "'");
            }
            if (idx < 1) {
                throw std::runtime_error("load_libsvm: " + path + ":" + std::to_string(lineno) +
                                         ": feature index must be 1-based");
            }
            if (expected_dim > 0 && idx > expected_dim) {
                throw std::runtime_error("load_libsvm: " + path + ":" + std::to_string(lineno) +
                                         ": feature index " + std::to_string(idx) +
                                         " exceeds expected dimension " + std::to_string(expected_dim));
            }
            max_index = std::max(max_index, idx);
            feats.emplace_back(idx, val);
        }
        labels.push_back(label);
        rows.push_back(std::move(feats));
    }
    if (labels.empty()) {
        throw std::runtime_error("load_libsvm: " + path + ": no data rows");
    }
    const int d = expected_dim > 0 ? expected_dim : max_index;
    if (d == 0) {
        throw std::runtime_error("load_libsvm: " + path + ": no features present");
    }
    LabeledData out;
    out.x = Eigen::MatrixXd::Zero(static_cast<int>(rows.size()), d);
    out.y = Eigen::VectorXd(static_cast<int>(labels.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.y(static_cast<int>(i)) = labels[i];
        for (const auto& [idx, val] : rows[i]) {
            out.x(static_cast<int>(i), idx - 1) = val;
        }
    }
    return out;
}

EmpiricalDataset center_and_fold(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size() || x.rows() == 0) {
        throw std::invalid_argument("center_and_fold: row/label count mismatch");
    }
    for (int i = 0; i < y.size(); ++i) {
        if (y(i) != 1.0 && y(i) != -1.0) {
            throw std::invalid_argument("center_and_fold: labels must be +-1");
        }
    }
    EmpiricalDataset out;
    const Eigen::RowVectorXd mean = x.colwise().mean();
    out.z = x.rowwise() - mean;
    out.z.array().colwise() *= (-y).array();
    out.centered = true;
    return out;
}

ModelStats compute_stats(const EmpiricalDataset& data, double ridge) {
    if (data.n() == 0) {
        throw std::invalid_argument("compute_stats: empty dataset");
    }
    const auto& z = data.z;
    const int n = data.n();
    const int d = data.dim();
    Eigen::MatrixXd second = (z.transpose() * z) / static_cast<double>(n);
    second = ((second + second.transpose()) / 2.0).eval();
    if (ridge < 0.0) {
        ridge = 1e-8 * second.trace() / static_cast<double>(d);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(second, Eigen::EigenvaluesOnly);
    const double raw_min = es.eigenvalues().minCoeff();
    const double raw_max = es.eigenvalues().maxCoeff();
    if (raw_min + ridge <= 0.0) {
        throw std::runtime_error(
            "compute_stats: empirical second moment is singular; supply a positive ridge");
    }
    ModelStats out{z.colwise().mean(),
                   SpdMatrix(second + ridge * Eigen::MatrixXd::Identity(d, d)),
                   raw_max * static_cast<double>(n) / 10.0};
    return out;
}

EmpiricalDataset sample_gaussian(const SpdModel& model, int n, std::uint64_t seed) {
    if (n <= 0) {
        throw std::invalid_argument("sample_gaussian: n must be positive");
    }
    const int d = model.dim();
    const Eigen::MatrixXd cov = model.sigma.entries() - model.u * model.u.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("sample_gaussian: covariance factorization failed");
    }
    const double tol = 1e-10 * std::max(1.0, model.sigma.big_l());
    Eigen::VectorXd lam = es.eigenvalues();
    for (int i = 0; i < d; ++i) {
        if (lam(i) < -tol) {
            throw std::runtime_error("sample_gaussian: covariance has a negative eigenvalue");
        }
        lam(i) = std::sqrt(std::max(lam(i), 0.0));
    }
    const Eigen::MatrixXd factor = es.eigenvectors() * lam.asDiagonal();

    Rng rng(seed, "sample_gaussian");
    EmpiricalDataset out;
    out.z.resize(n, d);
    Eigen::VectorXd g(d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) g(j) = rng.normal();
        out.z.row(i) = (model.u + factor * g).transpose();
    }
    out.centered = true;
    return out;
}

}  // namespace normgrad
