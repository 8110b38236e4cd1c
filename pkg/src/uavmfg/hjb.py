"""Online residual learner for the value function.

The value is psi(s) = w0.sigma(s) and its time derivative is modelled as
w1.sigma(s).  The learner descends the squared residual of the stochastic
HJB equation written at the current state, with an extra Lyapunov-type
term that pushes the greedy action towards the destination while the agent
is far away and moving outward.

All functions take either one agent (weights of shape (M,)) or a batch
(weights of shape (n, M)) with a matching BasisEval.
"""

from dataclasses import dataclass

import numpy as np

from .cost import phi_local
from .dynamics import drift


@dataclass(frozen=True)
class HjbHyper:
    mu: float = 0.01
    c_H: float = 0.5
    dest_norm: float = 10.0
    # L_s = 0.5 * s^T P s, P = diag(lyap_weights)
    lyap_weights: tuple = (1.0, 1.0, 1.0, 1.0)
    # Step is capped at step_guard * 2 / |g|^2 when set; None disables.
    step_guard: float | None = 0.5
    # Shrink a regulariser step so it cannot push L_dot below zero.
    hinge_cap: bool = True
    # Largest action change one regulariser step may cause [m/s^2]; None disables.
    reg_action_cap: float | None = None


@dataclass
class HjbModel:
    w0: np.ndarray
    w1: np.ndarray

    @classmethod
    def zeros(cls, m, n=None):
        shape = (m,) if n is None else (n, m)
        return cls(np.zeros(shape), np.zeros(shape))


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def value_grad(w0, be):
    """Gradient of psi with respect to the state, shape (..., 4)."""
    return np.sum(w0[..., :, None] * be.grad, axis=-2)


def value(w0, be):
    return _dot(w0, be.sigma)


def action(w0, be, c3):
    """Greedy action -(1 / 2 c3) B^T grad psi."""
    return -value_grad(w0, be)[..., 2:4] / (2.0 * c3)


@dataclass
class HjbStep:
    residual: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    reg_active: np.ndarray
    reg_grad: np.ndarray
    lyap_dot: np.ndarray


def residual(model, be, states, phi_g, dyn, cost):
    """HJB residual at the given states and its weight gradients."""
    s = np.asarray(states, dtype=float)
    f = drift(s, dyn)
    gp = value_grad(model.w0, be)
    gv = gp[..., 2:4]
    c3 = cost.c3
    H = (_dot(model.w1, be.sigma) + _dot(f, gp) - _dot(gv, gv) / (4.0 * c3)
         + 0.5 * _dot(be.diffusion_trace, model.w0)
         + phi_local(s, cost.c1) + cost.c2 * np.asarray(phi_g))
    g0 = (np.sum(be.grad * f[..., None, :], axis=-1)
          - np.sum(be.grad[..., 2:4] * gv[..., None, :], axis=-1) / (2.0 * c3)
          + 0.5 * be.diffusion_trace)
    return H, g0, be.sigma


def regulariser(model, be, states, dyn, cost, hyper):
    """Activation, weight gradient and L_dot of the Lyapunov term."""
    s = np.asarray(states, dtype=float)
    P = np.asarray(hyper.lyap_weights, dtype=float)
    gl = s * P
    a = action(model.w0, be, cost.c3)
    f = drift(s, dyn)
    ld = _dot(gl, f) + _dot(gl[..., 2:4], a)
    active = (np.linalg.norm(s, axis=-1) >= hyper.dest_norm) & (ld > 0)
    greg = -np.sum(be.grad[..., 2:4] * gl[..., None, 2:4], axis=-1) / (2.0 * cost.c3)
    return active, greg, ld


def _guarded_rate(mu, guard, gsq):
    if guard is None:
        return np.full(np.shape(gsq), mu)
    with np.errstate(divide="ignore"):
        cap = np.where(gsq > 0, guard * 2.0 / np.where(gsq > 0, gsq, 1.0), np.inf)
    return np.minimum(mu, cap)


def update(model, be, states, phi_g, dyn, cost, hyper):
    """One learning step; returns the new model and the step diagnostics."""
    H, g0, g1 = residual(model, be, states, phi_g, dyn, cost)
    active, greg, ld = regulariser(model, be, states, dyn, cost, hyper)
    gsq = _dot(g0, g0) + _dot(g1, g1)
    mu_e = _guarded_rate(hyper.mu, hyper.step_guard, gsq)
    w0 = model.w0 - (mu_e * H)[..., None] * g0
    w1 = model.w1 - (mu_e * H)[..., None] * g1

    mu_r = np.where(active, hyper.mu * hyper.c_H, 0.0)
    # action change per unit regulariser rate
    da_dir = np.sum(be.grad[..., 2:4] * greg[..., :, None], axis=-2) / (2.0 * cost.c3)
    if hyper.reg_action_cap is not None:
        da = np.sqrt(_dot(da_dir, da_dir))
        big = mu_r * da > hyper.reg_action_cap
        mu_r = np.where(big, hyper.reg_action_cap / np.where(big, da, 1.0), mu_r)
    if hyper.hinge_cap:
        # first-order change in L_dot caused by the regulariser step alone
        P = np.asarray(hyper.lyap_weights, dtype=float)
        glv = (np.asarray(states, float) * P)[..., 2:4]
        dld = mu_r * _dot(glv, da_dir)
        over = active & (-dld > ld)
        safe = np.where(over, -dld, 1.0)
        mu_r = np.where(over, mu_r * ld / safe, mu_r)
    w0 = w0 - mu_r[..., None] * greg
    step = HjbStep(H, g0, g1, active, greg, ld)
    return HjbModel(w0, w1), step
