"""Leader-based federated averaging of learner weights.

Every n0 steps a random subset of about 80% of the swarm (the leader is
always in it) sends its current weights to the leader over the fading
channel.  The leader averages what it received and broadcasts the result;
only the averaged learner (value, density, or both) is replaced.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import channel as _ch

VARIANTS = ("H", "F", "HF")


class FingerprintMismatch(ValueError):
    """Bundles built on different bases cannot be averaged."""


@dataclass(frozen=True)
class FlConfig:
    variant: str = "HF"
    n0: int | None = None          # None picks 100 for H/F and 200 for HF
    participation: float = 0.8
    leader: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 0.0 < self.participation <= 1.0:
            raise ValueError("participation must be in (0, 1]")
        if self.n0 is not None and self.n0 < 1:
            raise ValueError("n0 must be positive")

    @property
    def period(self):
        if self.n0 is not None:
            return int(self.n0)
        return 200 if self.variant == "HF" else 100


@dataclass
class ModelBundle:
    agent: int
    round_index: int
    fingerprint: str
    hjb: tuple | None = None       # (w0, w1)
    fpk: tuple | None = None


@dataclass
class RoundRecord:
    round_index: int
    step: int
    candidates: list
    survivors: list
    outages: list
    received: list = field(default_factory=list)
    bits: float = 0.0

    def as_dict(self):
        return {"round": self.round_index, "step": self.step,
                "candidates": self.candidates, "survivors": self.survivors,
                "outages": self.outages, "received": self.received,
                "bits": self.bits}


def n_candidates(n_agents, participation):
    return min(n_agents, max(1, math.ceil(participation * n_agents - 1e-12)))


def select_candidates(n_agents, cfg, rng):
    """Leader plus a uniform sample without replacement of the others."""
    k = n_candidates(n_agents, cfg.participation)
    others = np.array([i for i in range(n_agents) if i != cfg.leader], dtype=int)
    pick = rng.choice(others, size=k - 1, replace=False) if k > 1 else np.array([], int)
    return sorted([cfg.leader] + pick.tolist())


def aggregate(bundles):
    """FedAvg: arithmetic mean of each weight array, in agent-id order."""
    if not bundles:
        raise ValueError("nothing to aggregate")
    bundles = sorted(bundles, key=lambda b: b.agent)
    fp = bundles[0].fingerprint
    for b in bundles:
        if b.fingerprint != fp:
            raise FingerprintMismatch(
                f"agent {b.agent} fingerprint {b.fingerprint} != {fp}")

    def mean(parts):
        if parts[0] is None:
            return None
        return tuple(np.mean(np.stack([p[k] for p in parts]), axis=0)
                     for k in range(len(parts[0])))

    return ModelBundle(-1, bundles[0].round_index, fp,
                       mean([b.hjb for b in bundles]),
                       mean([b.fpk for b in bundles]))


def apply_broadcast(hjb_w, fpk_w, averaged, received, variant):
    """Overwrite the variant's weights of the receiving agents in place.

    hjb_w and fpk_w are (w0, w1) pairs of stacked per-agent arrays; the
    learner outside the variant is never touched.
    """
    if averaged is None or not len(received):
        return
    rows = np.asarray(received, dtype=int)
    if variant in ("H", "HF"):
        for dst, src in zip(hjb_w, averaged.hjb):
            dst[rows] = src
    if variant in ("F", "HF"):
        for dst, src in zip(fpk_w, averaged.fpk):
            dst[rows] = src


def run_round(round_index, step, cfg, bundles_of, positions, chan, rngs,
              m_h, m_f, d_max):
    """Execute one round.

    bundles_of(i) returns agent i's bundle; positions are used for link
    distances; rngs[i] is agent i's channel stream.  Returns the averaged
    bundle (or None if nothing arrived), the list of agents that received
    the broadcast, and the round record.

    Bits charged: one upload per surviving non-leader participant plus one
    leader broadcast, so a full-participation round costs N model sizes.
    """
    n = positions.shape[0]
    cand = select_candidates(n, cfg, rngs["fed"])
    size_bits = _ch.model_size(cfg.variant, m_h, m_f) * chan.b_res
    lead = cfg.leader
    survivors, outages = [], []
    for i in cand:
        if i == lead:
            survivors.append(i)
            continue
        dist = float(np.linalg.norm(positions[i] - positions[lead]))
        ev = _ch.transmit(size_bits, dist, chan, rngs[i], d_max)
        (survivors if ev.delivered else outages).append(i)
    bits = float(size_bits * (len(survivors) - 1))
    avg = aggregate([bundles_of(i) for i in survivors])
    received = [lead]
    for j in range(n):
        if j == lead:
            continue
        dist = float(np.linalg.norm(positions[j] - positions[lead]))
        if _ch.transmit(size_bits, dist, chan, rngs[lead], d_max).delivered:
            received.append(j)
    bits += size_bits
    rec = RoundRecord(round_index, step, cand, survivors, outages, sorted(received), bits)
    return avg, rec.received, rec
