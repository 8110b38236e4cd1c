"""Polynomial feature basis over the 4-D UAV state (x, y, v_x, v_y).

The "paired" layout builds monomials x^i v_x^j (i + j <= d) and then
y^k v_y^l (k + l <= d), keeping the constant only once.  Within a group
terms are graded: total degree ascending, then the position exponent
descending.  The "joint" layout is the full set of 4-variable monomials up
to degree d in the same graded order.

Each axis can be rescaled before the monomials are formed,
z_k = s_k / scale_k.  With unit scales the features are the raw
monomials.
"""

from dataclasses import dataclass, field
import hashlib
import itertools

import numpy as np

VAR_NAMES = ("x", "y", "vx", "vy")


class BasisEnvelopeError(ValueError):
    """Raised when a state lies outside the admissible evaluation envelope."""


@dataclass(frozen=True)
class BasisSpec:
    degree: int = 6
    grouping: str = "paired"
    scale: tuple = (1.0, 1.0, 1.0, 1.0)
    envelope: float = 1e3

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.grouping not in ("paired", "joint"):
            raise ValueError(f"unknown grouping {self.grouping!r}")
        sc = tuple(float(v) for v in self.scale)
        if len(sc) != 4 or any(v <= 0 for v in sc):
            raise ValueError("scale must hold 4 positive numbers")
        object.__setattr__(self, "scale", sc)

    @property
    def exponents(self):
        return _exponents(self.degree, self.grouping)

    @property
    def size(self):
        return self.exponents.shape[0]

    def fingerprint(self):
        """Short digest identifying term order and scaling."""
        payload = repr((self.grouping, self.degree, self.scale,
                        self.exponents.tolist()))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def term_names(self):
        names = []
        for row in self.exponents:
            parts = [VAR_NAMES[k] if e == 1 else f"{VAR_NAMES[k]}^{e}"
                     for k, e in enumerate(row) if e > 0]
            names.append("*".join(parts) if parts else "1")
        return names


def _pair_terms(pos, vel, degree, skip_constant):
    out = []
    for d in range(degree + 1):
        if d == 0 and skip_constant:
            continue
        for i in range(d, -1, -1):
            e = [0, 0, 0, 0]
            e[pos], e[vel] = i, d - i
            out.append(tuple(e))
    return out


_CACHE = {}


def _exponents(degree, grouping):
    key = (degree, grouping)
    if key not in _CACHE:
        if grouping == "paired":
            terms = _pair_terms(0, 2, degree, False) + _pair_terms(1, 3, degree, True)
        else:
            terms = []
            for d in range(degree + 1):
                # graded, lexicographically decreasing in (x, y, vx, vy)
                combos = [c for c in itertools.product(range(d + 1), repeat=4)
                          if sum(c) == d]
                terms.extend(sorted(combos, reverse=True))
        arr = np.array(terms, dtype=np.int64)
        arr.setflags(write=False)
        _CACHE[key] = arr
    return _CACHE[key]


@dataclass
class BasisEval:
    """Features and derivatives for a batch of states.

    Shapes for a batch of n states and M terms: sigma (n, M), grad
    (n, M, 4), hess_vv (n, M, 2, 2).  A single state gives the same
    arrays without the leading axis.
    """
    sigma: np.ndarray
    grad: np.ndarray
    hess_vv: np.ndarray
    sigma_wind: float = 0.0
    diffusion_trace: np.ndarray = field(init=False)

    def __post_init__(self):
        self.diffusion_trace = self.sigma_wind ** 2 * (
            self.hess_vv[..., 0, 0] + self.hess_vv[..., 1, 1])

    def take(self, idx):
        out = BasisEval(self.sigma[idx], self.grad[idx], self.hess_vv[idx],
                        self.sigma_wind)
        return out


def check_envelope(spec, states):
    s = np.asarray(states, dtype=float)
    if not np.all(np.isfinite(s)):
        raise BasisEnvelopeError("non-finite state passed to basis")
    if s.size and np.max(np.abs(s)) > spec.envelope:
        bad = np.argwhere(np.abs(s) > spec.envelope)[0]
        raise BasisEnvelopeError(
            f"state component {VAR_NAMES[bad[-1]]}={s[tuple(bad)]:.4g} "
            f"outside envelope {spec.envelope:g}")


def evaluate(spec, states, sigma_wind=0.0):
    """Evaluate features, gradients and velocity Hessians at states."""
    s = np.asarray(states, dtype=float)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    check_envelope(spec, s)
    E = spec.exponents
    scale = np.asarray(spec.scale)
    z = s / scale
    deg = spec.degree
    # pw[n, k, p] = z_k^p
    pw = z[:, :, None] ** np.arange(deg + 1)[None, None, :]
    cols = np.arange(4)[None, :]
    F = pw[:, cols, E]                                   # (n, M, 4)
    Em1 = np.maximum(E - 1, 0)
    D = E[None] * pw[:, cols, Em1] / scale               # d/ds_k of factor k
    Em2 = np.maximum(E - 2, 0)
    D2 = (E * (E - 1))[None] * pw[:, cols, Em2] / scale ** 2

    n, M = s.shape[0], E.shape[0]
    others = np.empty((n, M, 4))
    for k in range(4):
        mask = [u for u in range(4) if u != k]
        others[:, :, k] = F[:, :, mask[0]] * F[:, :, mask[1]] * F[:, :, mask[2]]
    sigma = F[:, :, 0] * others[:, :, 0]
    grad = D * others

    rest = F[:, :, 0] * F[:, :, 1]                       # position factors
    hess = np.empty((n, M, 2, 2))
    hess[:, :, 0, 0] = rest * D2[:, :, 2] * F[:, :, 3]
    hess[:, :, 1, 1] = rest * F[:, :, 2] * D2[:, :, 3]
    hess[:, :, 0, 1] = rest * D[:, :, 2] * D[:, :, 3]
    hess[:, :, 1, 0] = hess[:, :, 0, 1]
    if single:
        return BasisEval(sigma[0], grad[0], hess[0], sigma_wind)
    return BasisEval(sigma, grad, hess, sigma_wind)


def pair_split(spec):
    """Index arrays of the (x, v_x) group and the (y, v_y) group.

    Only defined for the paired layout; the constant belongs to the first.
    """
    if spec.grouping != "paired":
        raise ValueError("pair_split needs the paired grouping")
    E = spec.exponents
    g1 = np.flatnonzero((E[:, 1] == 0) & (E[:, 3] == 0))
    g2 = np.setdiff1d(np.arange(E.shape[0]), g1)
    return g1, g2


def features(spec, states):
    """Feature values only; cheaper than evaluate for large grids."""
    s = np.atleast_2d(np.asarray(states, dtype=float))
    check_envelope(spec, s)
    E = spec.exponents
    z = s / np.asarray(spec.scale)
    out = np.ones((s.shape[0], E.shape[0]))
    for k in range(4):
        out *= z[:, k:k + 1] ** E[None, :, k]
    return out


def axis_powers(spec, nodes, axis):
    """Scaled powers (z_axis)^p for p = 0..degree at 1-D nodes, shape (n, d+1)."""
    z = np.asarray(nodes, dtype=float) / spec.scale[axis]
    return z[:, None] ** np.arange(spec.degree + 1)[None, :]
