"""Density fitting and the mean-field interaction integral."""

import numpy as np
import pytest

from uavmfg import fpk
from uavmfg.basis import BasisSpec, features
from uavmfg.cost import CostParams, interaction_kernel, phi_global_all

CP = CostParams()
SPEC = BasisSpec(degree=6, scale=(100, 100, 10, 10))
SMALL = fpk.MfQuadrature(nodes=9)


def test_quadrature_geometry():
    q = fpk.MfQuadrature()
    np.testing.assert_allclose(q.widths, [190 / 17, 190 / 17, 40 / 17, 40 / 17])
    g = q.grid_states()
    assert g.shape == (17 ** 4, 4)
    np.testing.assert_allclose(g.min(axis=0), np.asarray(q.lo) + q.widths / 2)
    assert q.cell_volume == pytest.approx(np.prod(q.widths))
    with pytest.raises(ValueError):
        fpk.MfQuadrature(lo=(0, 0, 0, 0), hi=(1, 1, 1, 0))


@pytest.mark.parametrize("spec", [SPEC, BasisSpec(degree=3, grouping="joint", scale=(100, 100, 10, 10))])
def test_density_grid_matches_dense_evaluation(spec):
    w = np.random.default_rng(0).normal(size=(3, spec.size))
    fast = fpk.density_grid(spec, w, SMALL)
    dense = (w @ features(spec, SMALL.grid_states()).T).reshape(fast.shape)
    np.testing.assert_allclose(fast, dense, rtol=1e-10, atol=1e-12)


def test_kde_target_unit_mass():
    s = np.array([[40.0, 60.0, 1.0, -1.0], [90.0, 20.0, 0.0, 2.0]])
    t = fpk.kde_target(s, SMALL, (5, 5, 1, 1))
    assert t.sum() * SMALL.cell_volume == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fpk.kde_target(np.array([[1e6, 1e6, 0, 0]]), SMALL, (1, 1, 1, 1))


def test_init_peak_at_single_agent_node():
    q = fpk.MfQuadrature()
    centre = np.array([a[q.nodes // 2] for a in q.axes])
    w = fpk.init_from_swarm(centre[None], SPEC, q, (1e-3,) * 4)
    m = fpk.density_grid(SPEC, w, q)
    assert np.unravel_index(np.argmax(m), m.shape) == (q.nodes // 2,) * 4


def test_init_uniform_target_gives_constant_density():
    w = fpk.init_from_swarm(np.array([[75.0, 75.0, 0.0, 0.0]]), SPEC, SMALL, (1e7,) * 4)
    m = fpk.density_grid(SPEC, w, SMALL)
    level = 1.0 / (SMALL.cell_volume * SMALL.nodes ** 4)
    t = fpk.kde_target(np.array([[75.0, 75.0, 0.0, 0.0]]), SMALL, (1e7,) * 4)
    np.testing.assert_allclose(t, level, rtol=1e-6)
    # the only departure from the constant is the shrinkage of the ridge term
    phi = features(SPEC, SMALL.grid_states())
    G = phi.T @ phi
    lam = 1e-6 * np.trace(G) / G.shape[0]
    c = phi.T @ t.ravel()
    shrink = np.linalg.norm(lam * np.linalg.solve(G, c)) * np.linalg.norm(phi, 2) / np.linalg.norm(G, -2)
    assert np.max(np.abs(m - level)) <= 2 * shrink
    assert np.max(np.abs(m - level)) / level < 1e-3


def test_init_matches_dense_least_squares():
    rng = np.random.default_rng(1)
    s = np.column_stack([rng.uniform(100, 160, 25), rng.uniform(60, 130, 25), np.zeros(25), np.zeros(25)])
    t = fpk.kde_target(s, SMALL, (5, 5, 1, 1)).ravel()
    phi = features(SPEC, SMALL.grid_states())
    w = fpk.init_from_swarm(s, SPEC, SMALL, (5, 5, 1, 1), ridge=1e-6)
    ref, *_ = np.linalg.lstsq(phi, t, rcond=None)
    rms = np.sqrt(np.mean((phi @ w - t) ** 2))
    rms_ls = np.sqrt(np.mean((phi @ ref - t) ** 2))
    # the ridge can only add residual, and only by a ridge-sized amount
    G = phi.T @ phi
    lam = 1e-6 * np.trace(G) / G.shape[0]
    bound = np.sqrt(rms_ls ** 2 + lam * (ref @ ref) / t.size)
    assert rms_ls <= rms * (1 + 1e-9)
    assert rms <= bound * (1 + 1e-9)


def test_mf_interaction_point_mass_is_kernel():
    # a joint degree-1 density that is positive at exactly one corner node
    q = fpk.MfQuadrature(lo=(0, 0, 0, 0), hi=(2, 2, 2, 2), nodes=2)
    spec = BasisSpec(degree=1, grouping="joint")
    names = spec.term_names()
    w = np.zeros(spec.size)
    w[names.index("1")] = -22.0
    for t in ("x", "y", "vx", "vy"):
        w[names.index(t)] = 4.0
    m = np.maximum(fpk.density_grid(spec, w, q), 0)
    assert np.count_nonzero(m) == 1
    node = np.array([1.5, 1.5, 1.5, 1.5])
    si = np.array([[7.0, -3.0, 0.2, 4.0]])
    phi, deg = fpk.mf_interaction(si, w[None], spec, q, CP)
    assert not deg[0]
    assert phi[0] == pytest.approx(interaction_kernel(si[0], node, CP.eps, CP.beta), rel=1e-12)
    same_v = np.array([[9.0, 9.0, 1.5, 1.5]])
    assert fpk.mf_interaction(same_v, w[None], spec, q, CP)[0][0] == 0.0


def test_mf_interaction_degenerate_and_nonnegative():
    q = fpk.MfQuadrature(nodes=5)
    s = np.random.default_rng(2).normal(size=(6, 4)) * 20
    phi, deg = fpk.mf_interaction(s, np.zeros((6, SPEC.size)), SPEC, q, CP)
    assert deg.all() and np.all(phi == 0)
    w = np.random.default_rng(3).normal(size=(6, SPEC.size))
    phi, deg = fpk.mf_interaction(s, w, SPEC, q, CP)
    assert np.all(phi >= 0)


def test_mf_interaction_matches_brute_force_quadrature():
    q = fpk.MfQuadrature(nodes=5)
    rng = np.random.default_rng(4)
    w = rng.normal(size=(2, SPEC.size))
    s = rng.normal(size=(2, 4)) * 30
    phi, _ = fpk.mf_interaction(s, w, SPEC, q, CP)
    g = q.grid_states()
    for i in range(2):
        m = np.maximum(features(SPEC, g) @ w[i], 0)
        k = interaction_kernel(s[i], g, CP.eps, CP.beta)
        assert phi[i] == pytest.approx(np.sum(m * k) / np.sum(m), rel=1e-10)


def _consistency_instance():
    rng = np.random.default_rng(0)
    n = 400
    s = np.column_stack([rng.uniform(0, 20, n), rng.uniform(0, 20, n),
                         rng.normal(0, 1, n), rng.normal(0, 1, n)])
    interior = np.all((s[:, :2] > 5) & (s[:, :2] < 15), axis=1)
    return s, interior, BasisSpec(degree=6, scale=(20, 20, 4, 4))


def _mf_error(s, interior, spec, bandwidth, nodes):
    q = fpk.MfQuadrature(lo=(-5, -5, -5, -5), hi=(25, 25, 5, 5), nodes=nodes)
    w = fpk.init_from_swarm(s, spec, q, bandwidth)
    k = int(interior.sum())
    phi, _ = fpk.mf_interaction(s[interior], np.tile(w, (k, 1)), spec, q, CP)
    emp = phi_global_all(s, CP)[interior]
    return float(np.median(np.abs(phi / emp - 1)))


def test_mf_interaction_tracks_empirical_cost_for_interior_agents():
    s, interior, spec = _consistency_instance()
    assert _mf_error(s, interior, spec, (1.0, 1.0, 0.4, 0.4), 17) <= 0.10


def test_mf_interaction_error_decreases_with_refinement():
    s, interior, spec = _consistency_instance()
    coarse = _mf_error(s, interior, spec, (2.0, 2.0, 0.5, 0.5), 9)
    fine = _mf_error(s, interior, spec, (1.0, 1.0, 0.4, 0.4), 17)
    assert fine < coarse
