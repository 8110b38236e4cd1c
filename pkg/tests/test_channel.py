"""Fading samples, SNR, slotted delivery and payload formulas."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from uavmfg import channel as ch

P = ch.ChannelParams()


def test_rice_goodness_of_fit():
    z = ch.sample_rice(P, np.random.default_rng(0), size=100_000)
    edges = np.quantile(z, np.linspace(0, 1, 41))
    edges[0], edges[-1] = 0.0, z.max() * 2
    counts, _ = np.histogram(z, edges)
    probs = np.array([integrate.quad(ch.rice_pdf, a, b, args=(P,))[0]
                      for a, b in zip(edges[:-1], edges[1:])])
    probs /= probs.sum()
    stat, p = stats.chisquare(counts, probs * counts.sum(), ddof=0)
    assert p > 0.01


def test_rice_pdf_is_a_density_and_matches_reference():
    mass = integrate.quad(ch.rice_pdf, 0, np.inf, args=(P,))[0]
    assert mass == pytest.approx(1.0, abs=1e-9)
    z = np.linspace(0.1, 15, 30)
    ref = stats.rice.pdf(z, P.xi / P.chi, scale=P.chi)
    np.testing.assert_allclose(ch.rice_pdf(z, P), ref, rtol=1e-9)


def test_rice_moments_match_quadrature():
    z = ch.sample_rice(P, np.random.default_rng(1), size=100_000)
    m1 = integrate.quad(lambda x: x * ch.rice_pdf(x, P), 0, np.inf)[0]
    m2 = integrate.quad(lambda x: x * x * ch.rice_pdf(x, P), 0, np.inf)[0]
    assert z.mean() == pytest.approx(m1, rel=0.02)
    assert z.var() == pytest.approx(m2 - m1 ** 2, rel=0.02)


def test_rayleigh_and_deterministic_limits():
    q = ch.ChannelParams(xi=0.0, chi=2.0)
    z = ch.sample_rice(q, np.random.default_rng(2), size=100_000)
    se = z.std() / math.sqrt(z.size)
    assert abs(z.mean() - 2.0 * math.sqrt(math.pi / 2)) < 4 * se
    d = ch.sample_rice(ch.ChannelParams(chi=0.0), np.random.default_rng(3), size=10)
    np.testing.assert_allclose(d, P.xi)


def test_snr_examples():
    assert ch.snr(1.0, 50.0, P) == pytest.approx(5e6)
    assert ch.snr(0.0, 50.0, P) == 0.0
    q = ch.ChannelParams(alpha=2.0)
    assert ch.snr(1.0, 20.0, q) == pytest.approx(ch.snr(1.0, 10.0, q) / 4)
    with pytest.raises(ValueError):
        ch.snr(1.0, 0.0, q)
    assert ch.snr(2.0, 10.0, q) > ch.snr(1.0, 10.0, q)


def test_bits_transmitted():
    per = P.theta * P.W_o * math.log2(1 + P.eta)
    assert ch.slot_bits(P) == pytest.approx(per)
    assert ch.bits_transmitted(7, P) == pytest.approx(7 * per)
    assert ch.bits_transmitted(0, P) == 0.0
    flags = np.random.default_rng(4).random(50) < 0.3
    assert ch.bits_transmitted(int(flags.sum()), P) == pytest.approx(sum(per for f in flags if f))


def test_latency_examples():
    ev = ch.transmit(ch.slot_bits(P), 10.0, P, np.random.default_rng(5), 10)
    assert ev.delivered and ev.slots == 1
    never = ch.ChannelParams(eta=1e30)
    ev = ch.transmit(1.0, 10.0, never, np.random.default_rng(6), 5)
    assert not ev.delivered and ev.slots == 5 and ev.success_slots == 0


def test_latency_matches_prefix_scan():
    q = ch.ChannelParams(eta=3.35e7)          # about half the slots succeed
    for seed in range(30):
        need = (seed % 4 + 1) * ch.slot_bits(q)
        ev = ch.transmit(need, 10.0, q, np.random.default_rng(seed), 8)
        g = np.random.default_rng(seed).standard_normal((8, 2))
        z = np.hypot(q.xi + q.chi * g[:, 0], q.chi * g[:, 1])
        ok = q.P_o * z / (q.W_o * q.sigma_n) >= q.eta
        got = np.cumsum(ok) * ch.slot_bits(q)
        hit = np.nonzero(got >= need)[0]
        if hit.size:
            assert ev.delivered and ev.slots == hit[0] + 1
        else:
            assert not ev.delivered


def test_payload_formulas():
    assert ch.model_size("H", 55, 55) == 110
    assert ch.model_size("HF", 55, 55) == 220
    assert ch.state_payload_closed_form(25, 1, 32) == 25 * 4 * 32
    assert ch.fl_payload_closed_form(25, 10, 220, 32) == 25 * 10 * 220 * 32
    assert ch.fl_payload_closed_form(25, 0, 220, 32) == 0
