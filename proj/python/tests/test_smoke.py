import math

import numpy as np
import pytest

import normgrad as ng


@pytest.fixture(scope="module")
def model():
    return ng.synth_model(8, 1.0, 5.0, seed=3)


def test_model_shape(model):
    assert model.dim() == 8
    assert model.sigma.shape == (8, 8)
    assert 0.0 < model.lambda1 < 1.0
    assert model.mu == pytest.approx(1.0, rel=1e-9)
    assert model.L == pytest.approx(5.0, rel=1e-9)


def test_ols_linear_rate(model):
    p = ng.HalfspaceProblem.analytic("quadratic", model)
    w0 = ng.find_init(p, seed=11)
    res = ng.solve_ols(model, w0, steps=60)
    gaps = [r + model.lambda1 for r in res["rho"]]
    rate = (1.0 - model.mu / model.L) ** 2
    for a, b in zip(gaps, gaps[1:]):
        assert b <= rate * a + 1e-12
    # closed-form solution: w_tilde approaches -sigma^{-1} u
    target = -np.linalg.solve(model.sigma, model.u)
    assert np.linalg.norm(res["w_tilde"] - target) <= 1e-6 * max(1.0, np.linalg.norm(target))


def test_halfspace_gdnp_beats_gd(model):
    p = ng.HalfspaceProblem.analytic("softplus", model)
    w0 = ng.find_init(p, seed=5)
    out = ng.gdnp(p, w0, t_d=40, t_s=40)
    gd_out = ng.gd(p, w0 / math.sqrt(w0 @ (model.sigma @ w0)), stepsize=1.0 / p.zeta, steps=40)
    assert out["grad_norm_sinv_sq"][-1] <= gd_out["grad_norm_sinv_sq"][-1]
    assert out["sin2"][-1] <= 1e-8


def test_stein_quadratic(model):
    w = np.linspace(0.1, 0.8, model.dim())
    c1, c2 = ng.stein_coeffs("quadratic", w, model)
    assert c1 == pytest.approx(0.0, abs=1e-12)
    assert c2 == pytest.approx(2.0, rel=1e-12)


def test_probe_roundtrip():
    data = ng.make_probe_data(32, 6, 2, "quadratic", seed=9)
    net = ng.ProbeNet.make(6, [8, 8], 2, bn=True, seed=9)
    before = ng.probe_loss(net, "quadratic", data)
    hist = ng.train_probe(net, "quadratic", data, steps=50, lr=0.05)
    assert hist["loss"][-1] < before
    dep = ng.cross_dependency(net, 2, 0, "quadratic", data)
    assert math.isfinite(dep) and dep >= 0.0
