"""Planar UAV kinematics with linear drag against a mean wind.

The state is s = (x, y, v_x, v_y).  One Euler-Maruyama step is

    r' = r + v dt
    v' = v + (a - c0 (v - v_o)) dt + sigma_wind sqrt(dt) xi

with xi standard normal and independent per agent and per step.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DynamicsParams:
    c0: float = 0.1
    v_o: tuple = (1.0, -1.0)
    sigma_wind: float = 0.1
    dt: float = 0.1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.c0 < 0 or self.sigma_wind < 0:
            raise ValueError("c0 and sigma_wind must be non-negative")
        object.__setattr__(self, "v_o", tuple(float(v) for v in self.v_o))

    @property
    def A(self):
        a = np.zeros((4, 4))
        a[0, 2] = a[1, 3] = 1.0
        a[2, 2] = a[3, 3] = -self.c0
        return a

    @property
    def B(self):
        return np.vstack([np.zeros((2, 2)), np.eye(2)])

    @property
    def G(self):
        return np.vstack([np.zeros((2, 2)), self.sigma_wind * np.eye(2)])


@dataclass
class UavState:
    r: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(2)
        self.v = np.asarray(self.v, dtype=float).reshape(2)
        if not (np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.v))):
            raise ValueError("state must be finite")

    def as_array(self):
        return np.concatenate([self.r, self.v])

    @classmethod
    def from_array(cls, s):
        s = np.asarray(s, dtype=float)
        return cls(s[:2], s[2:4])


def drift(states, params):
    """Uncontrolled drift f(s) = [v; -c0 v + c0 v_o]."""
    s = np.asarray(states, dtype=float)
    v = s[..., 2:4]
    return np.concatenate([v, -params.c0 * (v - np.asarray(params.v_o))], axis=-1)


def step(states, actions, params, noise=None):
    """Advance states by one step; noise holds standard normals of shape (..., 2)."""
    s = np.asarray(states, dtype=float)
    a = np.asarray(actions, dtype=float)
    r, v = s[..., :2], s[..., 2:4]
    dv = (a - params.c0 * (v - np.asarray(params.v_o))) * params.dt
    if noise is not None and params.sigma_wind > 0:
        dv = dv + params.sigma_wind * np.sqrt(params.dt) * np.asarray(noise)
    return np.concatenate([r + v * params.dt, v + dv], axis=-1)


def ou_stationary_variance(params):
    """Per-axis stationary velocity variance of the discretized OU process."""
    phi = 1.0 - params.c0 * params.dt
    if abs(phi) >= 1.0:
        raise ValueError("discretized velocity recursion is not stable")
    return params.sigma_wind ** 2 * params.dt / (1.0 - phi ** 2)


def lattice_positions(n_agents, center, spacing):
    """Square lattice of ceil(sqrt(N))^2 sites, first N kept, centred on center."""
    side = int(np.ceil(np.sqrt(n_agents)))
    idx = np.arange(side) - (side - 1) / 2.0
    gx, gy = np.meshgrid(idx, idx, indexing="xy")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)[:n_agents] * spacing
    return pts + np.asarray(center, dtype=float)
