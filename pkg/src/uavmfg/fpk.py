"""Online residual learner for the swarm state density.

The density is modelled as m(s) = w0.sigma_F(s), with w1.sigma_F(s) for its
time derivative.  The learner descends the squared residual of the
Fokker-Planck equation driven by the agent's own greedy control.  A learned
density also yields the mean-field interaction cost by quadrature over a
bounded box in state space.
"""

from dataclasses import dataclass

import numpy as np

from . import basis as _basis
from .dynamics import drift
from .hjb import _dot, _guarded_rate, value_grad


@dataclass(frozen=True)
class FpkHyper:
    mu: float = 0.01
    step_guard: float | None = 0.5
    # warm-up length in steps; None means "same as the federation period"
    n_warm: int | None = None
    ridge: float = 1e-6
    bandwidth: tuple = (5.0, 5.0, 1.0, 1.0)


@dataclass(frozen=True)
class MfQuadrature:
    """Tensor midpoint rule on a box; lo/hi are (x, y, v_x, v_y) bounds."""
    lo: tuple = (-20.0, -20.0, -20.0, -20.0)
    hi: tuple = (170.0, 170.0, 20.0, 20.0)
    nodes: int = 17

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 4 or len(hi) != 4 or any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("quadrature box must have 4 increasing bounds")
        if self.nodes < 1:
            raise ValueError("need at least one node per axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def widths(self):
        return (np.asarray(self.hi) - np.asarray(self.lo)) / self.nodes

    @property
    def axes(self):
        w = self.widths
        return [self.lo[k] + (np.arange(self.nodes) + 0.5) * w[k] for k in range(4)]

    @property
    def cell_volume(self):
        return float(np.prod(self.widths))

    def grid_states(self):
        """All nodes as an (n^4, 4) array in C order over (x, y, v_x, v_y)."""
        g = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1)


@dataclass
class FpkModel:
    w0: np.ndarray
    w1: np.ndarray


def density_grid(spec, w0, quad):
    """Model density on the quadrature grid, shape (..., n, n, n, n)."""
    w = np.asarray(w0, dtype=float)
    single = w.ndim == 1
    w = np.atleast_2d(w)
    ax = quad.axes
    if spec.grouping == "paired":
        E = spec.exponents
        g1, g2 = _basis.pair_split(spec)
        P = [_basis.axis_powers(spec, ax[k], k) for k in range(4)]
        # A[n, x, vx] + B[n, y, vy]
        A = np.einsum("nk,ak,bk->nab", w[:, g1], P[0][:, E[g1, 0]], P[2][:, E[g1, 2]])
        B = np.einsum("nk,ak,bk->nab", w[:, g2], P[1][:, E[g2, 1]], P[3][:, E[g2, 3]])
        m = np.add(A[:, :, None, :, None], B[:, None, :, None, :])
    else:
        phi = _basis.features(spec, quad.grid_states())
        n = quad.nodes
        m = (w @ phi.T).reshape((w.shape[0], n, n, n, n))
    return m[0] if single else m


def mf_interaction(states, w0, spec, quad, cost):
    """Mean-field interaction cost for each agent under its own density model.

    The density is clamped at zero and renormalised to unit mass on the box.
    Returns (phi, degenerate) where degenerate flags a zero-mass density, for
    which phi is reported as 0.
    """
    s = np.atleast_2d(np.asarray(states, dtype=float))
    m = density_grid(spec, np.atleast_2d(w0), quad)
    np.maximum(m, 0.0, out=m)
    ax = quad.axes
    Z = m.sum(axis=(1, 2, 3, 4))
    dx = s[:, 0, None] - ax[0][None, :]
    dy = s[:, 1, None] - ax[1][None, :]
    Kr = 1.0 / (cost.eps + dx[:, :, None] ** 2 + dy[:, None, :] ** 2) ** cost.beta
    ux = s[:, 2, None] - ax[2][None, :]
    uy = s[:, 3, None] - ax[3][None, :]
    Kv = ux[:, :, None] ** 2 + uy[:, None, :] ** 2
    inner = np.einsum("nabcd,ncd->nab", m, Kv)
    num = np.einsum("nab,nab->n", inner, Kr)
    degenerate = ~(Z > 0)
    phi = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, Z))
    return phi, degenerate


def kde_target(states, quad, bandwidth):
    """Gaussian smoothing of the empirical mixture on the grid, unit mass on the box."""
    s = np.atleast_2d(np.asarray(states, dtype=float))
    h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (4,))
    ks = []
    for k, a in enumerate(quad.axes):
        u = (a[None, :] - s[:, k, None]) / h[k]
        ks.append(np.exp(-0.5 * u * u) / (np.sqrt(2 * np.pi) * h[k]))
    t = np.einsum("ja,jb,jc,jd->abcd", *ks) / s.shape[0]
    mass = t.sum() * quad.cell_volume
    if not mass > 0:
        raise ValueError("swarm lies outside the quadrature box")
    return t / mass


def init_from_swarm(states, spec, quad, bandwidth=(5.0, 5.0, 1.0, 1.0), ridge=1e-6):
    """Ridge least-squares fit of the density weights to the smoothed swarm.

    The ridge is relative to the mean diagonal of the normal matrix.
    """
    t = kde_target(states, quad, bandwidth).ravel()
    phi = _basis.features(spec, quad.grid_states())
    G = phi.T @ phi
    lam = ridge * np.trace(G) / G.shape[0]
    return np.linalg.solve(G + lam * np.eye(G.shape[0]), phi.T @ t)


def psi_vv_trace(w0_h, be_h):
    """Trace of the velocity Hessian of the value model."""
    return _dot(w0_h, be_h.hess_vv[..., 0, 0] + be_h.hess_vv[..., 1, 1])


def residual(model, be, states, w0_h, be_h, dyn, cost):
    """FPK residual at the given states and its weight gradients."""
    s = np.asarray(states, dtype=float)
    f = drift(s, dyn)
    a = -value_grad(w0_h, be_h)[..., 2:4] / (2.0 * cost.c3)
    drift_c = f.copy()
    drift_c[..., 2:4] += a
    div = -2.0 * dyn.c0 - psi_vv_trace(w0_h, be_h) / (2.0 * cost.c3)
    m = _dot(model.w0, be.sigma)
    gm = value_grad(model.w0, be)
    F = (_dot(model.w1, be.sigma) + m * div + _dot(drift_c, gm)
         - 0.5 * _dot(be.diffusion_trace, model.w0))
    g0 = (be.sigma * div[..., None]
          + np.sum(be.grad * drift_c[..., None, :], axis=-1)
          - 0.5 * be.diffusion_trace)
    return F, g0, be.sigma


def update(model, be, states, w0_h, be_h, dyn, cost, hyper):
    """One learning step; returns (new model, residual, g0, g1)."""
    F, g0, g1 = residual(model, be, states, w0_h, be_h, dyn, cost)
    gsq = _dot(g0, g0) + _dot(g1, g1)
    mu_e = _guarded_rate(hyper.mu, hyper.step_guard, gsq)
    w0 = model.w0 - (mu_e * F)[..., None] * g0
    w1 = model.w1 - (mu_e * F)[..., None] * g1
    return FpkModel(w0, w1), F, g0, g1
