"""Second-moment spectrum, step bound, mean-square deviation and monitors."""

import numpy as np
import pytest

from uavmfg import diagnostics as dg
from uavmfg import fpk, hjb
from uavmfg.basis import BasisSpec, evaluate
from uavmfg.cost import CostParams
from uavmfg.dynamics import DynamicsParams


def test_rank_one_sample():
    g = np.array([1.0, -2.0, 2.0])
    rep = dg.spectral_report(g[None])
    np.testing.assert_allclose(rep.R_hat, np.outer(g, g))
    assert rep.lambda_max == pytest.approx(9.0, rel=1e-8)
    assert rep.mu_bound == pytest.approx(2 / 9.0, rel=1e-8)
    assert dg.spectral_report(np.zeros((3, 4))).mu_bound == np.inf


def test_mu_bound_example():
    rep = dg.spectral_report(np.array([[10.0, 0.0]]))
    assert rep.mu_bound == pytest.approx(0.02)


def test_power_iteration_matches_dense_solver():
    rng = np.random.default_rng(0)
    g = rng.normal(size=(200, 22)) * np.linspace(0.5, 3, 22)
    R = dg.estimate_R(g)
    assert np.array_equal(R, R.T)
    assert np.linalg.eigvalsh(R).min() >= -1e-12
    lam, it = dg.power_iteration(R)
    assert lam == pytest.approx(np.linalg.eigvalsh(R).max(), rel=1e-6)
    assert it <= 1000


def test_scalar_msd_closed_form():
    r, mu, e2 = 2.0, 0.1, 0.3
    assert dg.msd_closed_form([[r]], mu, e2) == pytest.approx(mu ** 2 * e2 * r / (1 - (1 - mu * r) ** 2))


def test_msd_small_step_limit():
    R = np.diag([1.0, 2.0, 3.0])
    # MSD / mu -> M eps^2 / 2 with a first-order correction of relative size mu r / 2
    prev = np.inf
    for mu in (1e-3, 1e-4, 1e-5):
        err = abs(dg.msd_closed_form([[4.0]], mu, 0.5) / mu / 0.25 - 1)
        assert err <= mu * 4.0 / 2 * 1.01 and err < prev
        prev = err
        assert dg.msd_closed_form(R, mu, 0.5) / mu == pytest.approx(3 * 0.25, rel=mu * 3.0)


def test_msd_matches_simulated_recursion():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(3, 3))
    R = X @ X.T + 0.5 * np.eye(3)
    mu = 0.5 / np.linalg.eigvalsh(R).max()
    ref = dg.msd_closed_form(R, mu, 0.2)
    trace = dg.simulate_weight_error(R, mu, 0.2, 100_000, np.random.default_rng(2), chains=4)
    emp = trace[1000:].mean()
    assert emp == pytest.approx(ref, rel=0.05)


@pytest.fixture(scope="module")
def degree2_gradients():
    spec = BasisSpec(degree=2, scale=(100, 100, 10, 10))
    dyn, cp = DynamicsParams(), CostParams()
    rng = np.random.default_rng(3)
    s = np.column_stack([rng.uniform(0, 150, 300), rng.uniform(0, 150, 300),
                         rng.normal(0, 3, 300), rng.normal(0, 3, 300)])
    be = evaluate(spec, s, dyn.sigma_wind)
    wh = rng.normal(size=(300, spec.size)) * 1e-3
    model = fpk.FpkModel(np.zeros((300, spec.size)), np.zeros((300, spec.size)))
    _, g0, g1 = fpk.residual(model, be, s, wh, be, dyn, cp)
    return np.concatenate([g0, g1], axis=1)


def test_spectral_step_bound(degree2_gradients):
    rep = dg.spectral_report(degree2_gradients)
    R = rep.R_hat
    w0 = np.ones((1, R.shape[0]))
    hi = dg.simulate_weight_error(R, 1.5 * rep.mu_bound, 1e-4, 400,
                                  np.random.default_rng(4), w_init=w0)
    lo = dg.simulate_weight_error(R, 0.5 * rep.mu_bound, 1e-4, 400,
                                  np.random.default_rng(4), w_init=w0)
    assert hi[-1, 0] > 1e6 * hi[0, 0]
    assert np.all(np.isfinite(lo)) and lo.max() <= lo[0, 0] * 1.0001
    with pytest.raises(dg.DivergenceError):
        dg.msd_closed_form(R, 1.5 * rep.mu_bound, 1e-4)
    assert np.isfinite(dg.msd_closed_form(R, 0.5 * rep.mu_bound, 1e-4))


def test_boundedness_monitor():
    spec = BasisSpec(degree=2)
    dyn, cp = DynamicsParams(sigma_wind=0.0), CostParams()
    s = np.zeros((1, 4))
    be = evaluate(spec, s)
    H, _, _ = hjb.residual(hjb.HjbModel.zeros(spec.size), be, s, np.zeros(1), dyn, cp)
    rep = dg.boundedness_monitor(np.abs(H)[None], None, np.zeros((1, 1)))
    assert rep["finite"] and rep["max_abs_H"] == 0.0 and rep["max_abs_F"] is None
    h = np.array([[0.5, 2.0], [3.5, 0.1]])
    rep = dg.boundedness_monitor(h, np.array([[0.01, 0.05]]))
    assert rep["max_abs_H"] == 3.5 and not rep["h_within_cap"] and not rep["f_within_cap"]
    assert not dg.boundedness_monitor(np.array([[np.nan]]))["finite"]
