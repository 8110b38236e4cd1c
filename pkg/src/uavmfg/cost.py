"""Running costs, rotary-wing power model and swarm metrics."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CostParams:
    c1: float = 0.015
    c2: float = 0.015
    c3: float = 0.005
    eps: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.c3 <= 0:
            raise ValueError("c3 must be positive")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class PowerParams:
    lambda0: float = 0.0049
    lambda1: float = 0.0887
    lambda2: float = 0.0092
    omega_tip: float = 15.0
    chi_o: float = 1.6120


@dataclass(frozen=True)
class SafetyParams:
    r_coll: float = 0.1
    r_C: float = float(np.sqrt(2.0) / 2.0)
    dest_norm: float = 10.0


def phi_local(states, c1):
    """Local cost v.r/|r| + c1 |v|^2; the projection is taken as 0 at r = 0."""
    s = np.asarray(states, dtype=float)
    r, v = s[..., :2], s[..., 2:4]
    nr = np.linalg.norm(r, axis=-1)
    proj = np.divide(np.sum(v * r, axis=-1), nr,
                     out=np.zeros_like(nr), where=nr > 0)
    return proj + c1 * np.sum(v * v, axis=-1)


def interaction_kernel(s_i, s_j, eps, beta):
    """Pairwise flocking kernel |v_j - v_i|^2 / (eps + |r_j - r_i|^2)^beta."""
    si, sj = np.asarray(s_i, float), np.asarray(s_j, float)
    dv = sj[..., 2:4] - si[..., 2:4]
    dr = sj[..., :2] - si[..., :2]
    return np.sum(dv * dv, -1) / (eps + np.sum(dr * dr, -1)) ** beta


def phi_global_all(states, params, mask=None):
    """Empirical interaction cost for every agent.

    mask[i, j] selects which agents i has observed (the diagonal should be
    set); the average is over the observed set.  Without a mask all N
    agents are used.
    """
    s = np.asarray(states, dtype=float)
    K = interaction_kernel(s[:, None, :], s[None, :, :], params.eps, params.beta)
    if mask is None:
        return K.sum(axis=1) / s.shape[0]
    m = np.asarray(mask, dtype=bool)
    cnt = np.maximum(m.sum(axis=1), 1)
    return np.where(m, K, 0.0).sum(axis=1) / cnt


def phi_global(i, states, params):
    return float(phi_global_all(states, params)[i])


def running_cost(states, actions, phi_g, params):
    a = np.asarray(actions, dtype=float)
    return phi_local(states, params.c1) + params.c3 * np.sum(a * a, -1) + params.c2 * phi_g


def power(speed, p=PowerParams()):
    """Propulsion power (per-unit model) as a function of speed."""
    v = np.asarray(speed, dtype=float)
    v2 = v * v
    induced = np.sqrt(1.0 + v2 * v2 / (4.0 * p.chi_o ** 4)) - v2 / (2.0 * p.chi_o ** 2)
    return (p.lambda0 * (1.0 + 3.0 * v2 / p.omega_tip ** 2)
            + p.lambda1 * np.sqrt(np.maximum(induced, 0.0))
            + p.lambda2 * v * v2 / 2.0)


def energy(speeds, dt, p=PowerParams()):
    """Left Riemann sum of power over a speed history (time on axis 0)."""
    return np.sum(power(speeds, p), axis=0) * dt


def pair_speed_sum(states):
    """Sum over ordered pairs of |v_j - v_i|."""
    v = np.asarray(states)[:, 2:4]
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt(np.sum(d * d, -1)).sum())


def pair_distances(states):
    r = np.asarray(states)[:, :2]
    d = r[:, None, :] - r[None, :, :]
    return np.sqrt(np.sum(d * d, -1))


def pair_close_count(states, r_C, exclude_self=False):
    """Number of ordered pairs within r_C; self-pairs count unless excluded."""
    D = pair_distances(states)
    n = int(np.count_nonzero(D <= r_C))
    if exclude_self:
        n -= D.shape[0]
    return n


def velocity_alignment(history, dt=None):
    """Time-averaged mean pairwise speed difference over a (T, N, 4) history."""
    h = np.asarray(history, dtype=float)
    n = h.shape[1]
    return float(np.mean([pair_speed_sum(s) for s in h]) / n ** 2)


def collision_risk(history, r_C, exclude_self=False):
    """Time-averaged fraction of ordered pairs within r_C."""
    h = np.asarray(history, dtype=float)
    n = h.shape[1]
    return float(np.mean([pair_close_count(s, r_C, exclude_self) for s in h]) / n ** 2)


def collision_pairs(states, r_coll):
    """Unordered pairs (i < j) closer than r_coll."""
    D = pair_distances(states)
    i, j = np.nonzero(np.triu(D < r_coll, k=1))
    return list(zip(i.tolist(), j.tolist()))


def travel_times(entry_steps, dt, max_steps):
    """Mean and max mission time; agents that never arrived count as max_steps.

    Returns (T_avg, T_max, truncated) where truncated flags any such agent.
    """
    e = np.asarray(entry_steps, dtype=float)
    missing = e < 0
    t = np.where(missing, max_steps, e) * dt
    return float(t.mean()), float(t.max()), bool(missing.any())
