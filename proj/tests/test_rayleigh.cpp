#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "normgrad/rayleigh.hpp"
#include "testutil.hpp"

using namespace normgrad;
using testutil::rel_err;

// Hand-checked values on the toy model sigma = diag(1, 2), u = (1/2, 1/2):
// at w = (1, 1): u'w = 1, w'Sw = 3, quotient -1/3, gradient (-1/9, 1/9),
// adaptive stepsize 3 / (2 * 2 * 1/3) = 9/4.
TEST_CASE("quotient, gradient and stepsize match hand values") {
    const SpdModel m = testutil::toy_model();
    Eigen::VectorXd w(2);
    w << 1.0, 1.0;

    CHECK(rel_err(rho(w, m), -1.0 / 3.0) < 1e-14);
    CHECK(rel_err(rho(2.5 * w, m), -1.0 / 3.0) < 1e-14);

    const Eigen::VectorXd g = grad_rho(w, m);
    CHECK(rel_err(g(0), -1.0 / 9.0) < 1e-14);
    CHECK(rel_err(g(1), 1.0 / 9.0) < 1e-14);

    CHECK(rel_err(rayleigh_stepsize(w, m), 9.0 / 4.0) < 1e-14);

    Eigen::VectorXd e2(2);
    e2 << 0.0, 1.0;
    // g* = -(u'w)/|w|_S = -(1/2)/sqrt(2)
    CHECK(rel_err(optimal_scale(e2, m), -0.5 / std::sqrt(2.0)) < 1e-14);

    Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(rho(zero, m), std::invalid_argument);
}

TEST_CASE("quotient gradient is tangent and matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const SpdModel m = testutil::random_model(6, 0.8, 6.0, seed);
        const Eigen::VectorXd w = testutil::random_unit(6, seed + 30);
        const Eigen::VectorXd g = grad_rho(w, m);

        // rho is scale invariant, so its gradient annihilates w
        CHECK(std::abs(g.dot(w)) < 1e-13);

        const Eigen::VectorXd fd = testutil::fd_gradient(
            [&](const Eigen::VectorXd& v) { return rho(v, m); }, w, 1e-6);
        CHECK(testutil::vec_rel_err(g, fd) < 1e-7);
    }
}

TEST_CASE("dominant direction is the normalized solution ray") {
    const SpdModel m = testutil::random_model(5, 1.0, 9.0, 7);
    const Eigen::VectorXd v1 = dominant_direction(m);
    CHECK(rel_err(s_norm(v1, m.sigma), 1.0) < 1e-12);
    CHECK(sin2_s_angle(v1, m.sigma.solve(m.u), m.sigma) < 1e-14);
    // the quotient attains its minimum -lambda1 there
    CHECK(rel_err(rho(v1, m), -m.lambda1) < 1e-12);
}

// Suboptimality, gradient and angle tie together at every point:
//   |w|_S^2 |grad rho|_{S^{-1}}^2 / (4 |rho|) = rho(w) + lambda1.
TEST_CASE("pointwise energy identity on the toy model and at random states") {
    const SpdModel toy = testutil::toy_model();
    Eigen::VectorXd w(2);
    w << 1.0, 1.0;
    const Eigen::VectorXd g = grad_rho(w, toy);
    const double lhs = toy.sigma.quad(w) * toy.sigma.inv_quad(g) / (4.0 * std::abs(rho(w, toy)));
    // by hand: 3 * (1/54) / (4/3) = 1/24 = rho + lambda1
    CHECK(rel_err(lhs, 1.0 / 24.0) < 1e-13);
    CHECK(rel_err(lhs, rho(w, toy) + toy.lambda1) < 1e-13);

    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const SpdModel m = testutil::random_model(8, 0.5, 5.0, seed);
        const Eigen::VectorXd wr = testutil::random_unit(8, seed + 60);
        if (std::abs(m.u.dot(wr)) < 1e-6) continue;
        const Eigen::VectorXd gr = grad_rho(wr, m);
        const double l = m.sigma.quad(wr) * m.sigma.inv_quad(gr) / (4.0 * std::abs(rho(wr, m)));
        CHECK(rel_err(l, rho(wr, m) + m.lambda1) < 1e-10);
    }
}

TEST_CASE("descent steps contract the angle at the spectral rate") {
    const SpdModel m = testutil::random_model(10, 1.0, 8.0, 3);
    const double rate = 1.0 - m.sigma.mu() / m.sigma.big_l();
    const Eigen::VectorXd v1 = dominant_direction(m);

    Eigen::VectorXd w = testutil::random_unit(10, 99);
    double prev_sin = std::sqrt(sin2_s_angle(w, v1, m.sigma));
    double prev_rho = rho(w, m);
    for (int t = 0; t < 30; ++t) {
        auto [next, rec] = rayleigh_step(w, m, t);
        const double cur_sin = std::sqrt(sin2_s_angle(next, v1, m.sigma));
        CHECK(cur_sin <= rate * prev_sin + 1e-12);
        const double cur_rho = rho(next, m);
        CHECK(cur_rho <= prev_rho + 1e-15);
        w = next;
        prev_sin = cur_sin;
        prev_rho = cur_rho;
    }
}

TEST_CASE("full solve reaches the dominant direction at the promised rate") {
    const SpdModel m = testutil::random_model(12, 1.0, 10.0, 5);
    const Eigen::VectorXd w0 = testutil::random_unit(12, 41);
    const int steps = 160;
    const OlsSolveResult res = solve_ols_gdnp(m, w0, steps);

    REQUIRE(static_cast<int>(res.trace.size()) == steps);
    REQUIRE(static_cast<int>(res.iterates.size()) == steps + 1);

    const double rate2 = std::pow(1.0 - m.sigma.mu() / m.sigma.big_l(), 2.0);
    const double gap0 = rho(w0, m) + m.lambda1;
    double envelope = gap0;
    for (int t = 0; t < steps; ++t) {
        CHECK(res.trace[t].t == t);
        CHECK(res.trace[t].rho + m.lambda1 <= envelope + 1e-12);
        envelope *= rate2;
    }

    // the final reconstruction solves the least squares problem
    CHECK(sin2_s_angle(res.w, dominant_direction(m), m.sigma) < 1e-12);
    CHECK(testutil::vec_rel_err(res.w_tilde, -m.sigma.solve(m.u)) < 1e-6);
    CHECK(rel_err(res.g, optimal_scale(res.w, m)) < 1e-12);

    // trace rows expose pre-step states: row 0 is the start
    CHECK(rel_err(res.trace[0].rho, rho(w0, m)) < 1e-13);

    CHECK_THROWS_AS(solve_ols_gdnp(m, w0, -1), std::invalid_argument);
    // a two-component swap zeroes the inner product exactly, with no
    // orthogonalization roundoff
    Eigen::VectorXd degenerate = Eigen::VectorXd::Zero(12);
    degenerate(0) = m.u(1);
    degenerate(1) = -m.u(0);
    CHECK_THROWS_AS(solve_ols_gdnp(m, degenerate, 5), std::domain_error);
}

TEST_CASE("renormalization cadence does not disturb the trajectory") {
    const SpdModel m = testutil::random_model(6, 1.0, 4.0, 9);
    const Eigen::VectorXd w0 = testutil::random_unit(6, 77);
    const OlsSolveResult every = solve_ols_gdnp(m, w0, 40, 1);
    const OlsSolveResult sparse = solve_ols_gdnp(m, w0, 40, 1000);
    // directions agree up to scaling; compare through the angle
    CHECK(sin2_s_angle(every.w, sparse.w, m.sigma) < 1e-18);
    CHECK(rel_err(every.trace.back().rho, sparse.trace.back().rho) < 1e-12);
}
