"""Convergence diagnostics for the residual learners.

These are read-only: they take recorded gradients or traces and report
step-size bounds, steady-state deviation and boundedness.  None of them
feeds back into the learners.
"""

from dataclasses import dataclass

import numpy as np


class DivergenceError(ValueError):
    """The requested step size gives an unstable weight-error recursion."""


@dataclass
class SpectralReport:
    R_hat: np.ndarray
    lambda_max: float
    mu_bound: float
    iterations: int

    def as_dict(self):
        return {"lambda_max": self.lambda_max, "mu_bound": self.mu_bound,
                "iterations": self.iterations, "dim": int(self.R_hat.shape[0])}


def estimate_R(samples):
    """Sample second-moment matrix of gradient vectors, rows are samples."""
    g = np.atleast_2d(np.asarray(samples, dtype=float))
    R = g.T @ g / g.shape[0]
    return 0.5 * (R + R.T)


def power_iteration(R, tol=1e-8, max_iter=1000, seed=0):
    """Largest eigenvalue of a symmetric PSD matrix; returns (value, iterations)."""
    n = R.shape[0]
    x = np.random.default_rng(seed).standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = R @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, it
        x_new = y / ny
        lam_new = float(x_new @ R @ x_new)
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new, it
        x, lam = x_new, lam_new
    return lam, max_iter


def spectral_report(samples, tol=1e-8, max_iter=1000):
    R = estimate_R(samples)
    lam, it = power_iteration(R, tol, max_iter)
    return SpectralReport(R, lam, 2.0 / lam if lam > 0 else np.inf, it)


def msd_closed_form(R, mu, eps_sq):
    """Steady-state mean-square deviation of w <- (I - mu R) w - mu g eps.

    MSD = mu^2 eps^2 vec(R)^T (I - F)^{-1} vec(I), F = (I - mu R)^T kron (I - mu R)^T.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    m = R.shape[0]
    A = np.eye(m) - mu * R
    F = np.kron(A.T, A.T)
    rho = float(np.max(np.abs(np.linalg.eigvals(F))))
    if rho >= 1.0:
        raise DivergenceError(f"spectral radius {rho:.6g} >= 1 for mu={mu:g}")
    x = np.linalg.solve(np.eye(m * m) - F, np.eye(m).ravel(order="F"))
    return float(mu ** 2 * eps_sq * (R.ravel(order="F") @ x))


def simulate_weight_error(R, mu, eps_sq, steps, rng, chains=1, w_init=None):
    """Simulate w <- (I - mu R) w - mu g eps with g ~ N(0, R), eps ~ N(0, eps_sq).

    Returns the squared-norm trace, shape (steps, chains).
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    m = R.shape[0]
    L = np.linalg.cholesky(R + 1e-15 * np.eye(m))
    A = np.eye(m) - mu * R
    w = np.zeros((chains, m)) if w_init is None else np.array(w_init, float).reshape(chains, m)
    out = np.empty((steps, chains))
    se = np.sqrt(eps_sq)
    for n in range(steps):
        g = rng.standard_normal((chains, m)) @ L.T
        e = se * rng.standard_normal((chains, 1))
        w = w @ A.T - mu * g * e
        out[n] = np.sum(w * w, axis=1)
    return out


def boundedness_monitor(h_abs, f_abs=None, w_h_norm=None, w_f_norm=None,
                        h_cap=3.0, f_cap=0.04):
    """Summarise residual and weight magnitudes recorded over a run."""
    arrays = {"max_abs_H": h_abs, "max_abs_F": f_abs,
              "max_norm_wH": w_h_norm, "max_norm_wF": w_f_norm}
    rep = {}
    finite = True
    for key, a in arrays.items():
        if a is None:
            rep[key] = None
            continue
        a = np.asarray(a, dtype=float)
        finite = finite and bool(np.all(np.isfinite(a)))
        rep[key] = float(np.max(np.abs(a))) if a.size else 0.0
    rep["finite"] = finite
    rep["h_within_cap"] = rep["max_abs_H"] is not None and rep["max_abs_H"] <= h_cap
    rep["f_within_cap"] = rep["max_abs_F"] is None or rep["max_abs_F"] <= f_cap
    return rep
