"""Rician fading link model, slot-level latency and payload accounting."""

from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    P_o: float = 0.1            # transmit power [W]
    W_o: float = 2e6            # bandwidth [Hz]
    sigma_n: float = 1e-14      # noise power spectral density [W/Hz]
    alpha: float = 0.0          # path-loss exponent
    xi: float = 6.649           # Rice line-of-sight amplitude
    chi: float = 1.347          # Rice scatter scale
    eta: float = 10.0           # decoding SNR threshold
    theta: float = 0.1          # slot duration [s]
    D_M: int | None = None      # max uplink latency in slots; None = n0 / 2
    b_res: int = 32             # bits per scalar


def sample_rice(params, rng, size=None):
    """Rice amplitudes |xi + chi (g1 + i g2)|."""
    g = rng.standard_normal(size=(2,) if size is None else (2,) + tuple(np.atleast_1d(size)))
    z = np.hypot(params.xi + params.chi * g[0], params.chi * g[1])
    return float(z) if size is None else z


def rice_pdf(z, params):
    """Rice density; uses the scaled Bessel function for large arguments."""
    from scipy.special import i0e
    z = np.asarray(z, dtype=float)
    c2 = params.chi ** 2
    arg = z * params.xi / c2
    return z / c2 * np.exp(-(z - params.xi) ** 2 / (2 * c2)) * i0e(arg)


def snr(z, distance, params):
    """Received SNR; a zero distance is only allowed without path loss."""
    d = np.asarray(distance, dtype=float)
    if params.alpha > 0.0:
        if np.any(d <= 0.0):
            raise ValueError("distance must be positive when alpha > 0")
        loss = d ** (-params.alpha)
    else:
        loss = np.ones_like(d)
    return params.P_o * np.asarray(z) * loss / (params.W_o * params.sigma_n)


def slot_bits(params):
    """Bits delivered by one successful slot."""
    return params.theta * params.W_o * math.log2(1.0 + params.eta)


def bits_transmitted(n_success, params):
    return n_success * slot_bits(params)


@dataclass
class LinkEvent:
    slots: int
    delivered: bool
    success_slots: int


def transmit(payload_bits, distance, params, rng, max_slots):
    """Send payload_bits over successive fading slots until delivered or timeout."""
    need = payload_bits
    got = 0.0
    ok = 0
    for k in range(1, max_slots + 1):
        z = sample_rice(params, rng)
        if snr(z, distance, params) >= params.eta:
            ok += 1
            got += slot_bits(params)
            if got >= need:
                return LinkEvent(k, True, ok)
    return LinkEvent(max_slots, False, ok)


def link_success(distances, params, rng):
    """One slot per link: True where the sampled SNR clears the threshold."""
    d = np.asarray(distances, dtype=float)
    z = sample_rice(params, rng, size=d.shape)
    return snr(z, d, params) >= params.eta


def model_size(variant, m_h, m_f):
    """Number of scalars in a federated bundle."""
    return {"H": 2 * m_h, "F": 2 * m_f, "HF": 2 * m_h + 2 * m_f}[variant]


def state_payload_closed_form(n_agents, n_steps, b_res, state_dim=4, samples=1):
    """Bits for per-step state broadcasting by every agent."""
    return n_agents * n_steps * state_dim * b_res * samples


def fl_payload_closed_form(n_tx, n_rounds, model_scalars, b_res):
    """Bits for federated rounds with n_tx model transmissions per round."""
    return n_tx * n_rounds * model_scalars * b_res
