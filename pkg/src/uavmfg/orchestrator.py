"""Seeded swarm simulation for the online controllers and the offline baseline.

Algorithms
----------
hjb        every agent learns its value model and computes the interaction
           cost from states broadcast by neighbours at every step
mfg        value and density models per agent; the interaction cost comes
           from the agent's own density model (states shared only at t = 0)
mfgfl-*    mfg plus periodic federated averaging of the value model (h),
           the density model (f) or both (hf)
offline    open-loop straight-line plan with a trapezoidal speed profile

Each step follows the same order: barrier snapshot, optional federated
round, interaction cost, value update, density update, action, dynamics.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import json
import math
import os

import numpy as np

from . import basis as _basis
from . import channel as _ch
from . import cost as _cost
from . import federation as _fed
from . import fpk as _fpk
from . import hjb as _hjb
from .diagnostics import boundedness_monitor
from .dynamics import lattice_positions, step as dyn_step

ALGOS = ("hjb", "mfg", "mfgfl-h", "mfgfl-f", "mfgfl-hf", "offline")
FL_VARIANT = {"mfgfl-h": "H", "mfgfl-f": "F", "mfgfl-hf": "HF"}

TRAJ_HEADER = ["step", "agent", "x", "y", "v_x", "v_y", "a_x", "a_y"]
METRIC_HEADER = ["step", "mean_energy", "phi_A", "phi_C", "max_abs_H",
                 "max_abs_F", "cum_bits"]


class SimulationDiverged(RuntimeError):
    """Raised on non-finite values or states leaving the basis envelope."""


@dataclass
class SimReport:
    algo: str
    seed: int
    states: np.ndarray          # (T + 1, N, 4)
    actions: np.ndarray         # (T, N, 2)
    h_abs: np.ndarray           # (T, N); 0 once an agent has arrived
    f_abs: np.ndarray | None
    wh_norm: np.ndarray | None
    wf_norm: np.ndarray | None
    cum_bits: np.ndarray        # (T,)
    rounds: list
    degenerate_events: int
    bits_closed_form: float     # scheme bits predicted with no outages
    bits_initial: float         # one-off exchange of initial states
    metrics: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return self.actions.shape[0]


def fl_period(cfg, algo):
    if cfg.federation.n0 is not None:
        return int(cfg.federation.n0)
    return 200 if algo == "mfgfl-hf" else 100


def initial_states(cfg):
    n = cfg.swarm.n_agents
    r = lattice_positions(n, cfg.swarm.center, cfg.swarm.spacing)
    return np.concatenate([r, np.zeros((n, 2))], axis=1)


def _norm(a):
    return np.sqrt(np.sum(a * a, axis=-1))


def offline_plan(r0, target, params, dyn):
    """Nominal speed profile and direction for one straight-line leg."""
    d = target - r0
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        return np.zeros(1), np.zeros(2)
    u = d / dist
    dt, a, vc = dyn.dt, params.accel, params.cruise_speed
    K = 2
    while True:
        n = np.arange(K + 1)
        prof = np.minimum.reduce([a * n * dt, np.full(K + 1, vc), a * (K - n) * dt])
        covered = prof[:-1].sum() * dt
        if covered >= dist:
            break
        K += max(1, int((dist - covered) / (vc * dt)) // 2)
    return prof * (dist / covered), u


def _offline_actions(plans, n, dyn):
    out = np.empty((len(plans), 2))
    vo = np.asarray(dyn.v_o)
    for i, (prof, u) in enumerate(plans):
        k = min(n, prof.size - 1)
        k1 = min(n + 1, prof.size - 1)
        v_nom = prof[k] * u
        out[i] = (prof[k1] - prof[k]) / dyn.dt * u + dyn.c0 * (v_nom - vo)
    return out


class _Agents:
    """Per-agent learner weights stored as stacked arrays."""

    def __init__(self, cfg, algo, s0):
        n = s0.shape[0]
        self.mh = cfg.basis_h.size
        self.wh0 = np.zeros((n, self.mh))
        self.wh1 = np.zeros((n, self.mh))
        self.use_f = algo.startswith("mfg")
        if self.use_f:
            self.mf = cfg.basis_f.size
            w = _fpk.init_from_swarm(s0, cfg.basis_f, cfg.quadrature,
                                     cfg.fpk.bandwidth, cfg.fpk.ridge)
            self.wf0 = np.tile(w, (n, 1))
            self.wf1 = np.zeros((n, self.mf))
        else:
            self.mf = 0
            self.wf0 = self.wf1 = None


def simulate(cfg, algo, seed, steps=None, rollout=None, fpk_tap=None):
    """Run one seeded episode and return a SimReport.

    steps limits the horizon (default cfg.swarm.max_steps).  The run stops
    early once every agent has reached the destination region (the offline
    baseline also finishes its plan first).  rollout(n, S)
    sees the state after every step; fpk_tap(n, agents, g) receives the
    density-learner gradients [g0, g1] of the agents updated at step n.
    Neither callback can alter the run.
    """
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}")
    sw, dyn, cst, safety = cfg.swarm, cfg.dynamics, cfg.cost, cfg.safety
    N = sw.n_agents
    T = int(sw.max_steps if steps is None else steps)
    if N < 1 or T < 1:
        raise ValueError("need at least one agent and one step")

    root = np.random.SeedSequence(seed)
    wind_ss, chan_ss, fed_ss = root.spawn(3)
    wind = [np.random.default_rng(s) for s in wind_ss.spawn(N)]
    chan_rngs = {i: np.random.default_rng(s) for i, s in enumerate(chan_ss.spawn(N))}
    chan_rngs["fed"] = np.random.default_rng(fed_ss)

    S = initial_states(cfg)
    S0 = S.copy()
    learn = algo != "offline"
    ag = _Agents(cfg, algo, S0) if learn else None
    fl = algo in FL_VARIANT
    n0 = fl_period(cfg, algo)
    n_warm = cfg.fpk.n_warm if cfg.fpk.n_warm is not None else n0
    flcfg = replace(cfg.federation, variant=FL_VARIANT.get(algo, "HF"), n0=n0)
    d_max = cfg.channel.D_M if cfg.channel.D_M is not None else max(1, n0 // 2)
    state_bits = 4 * cfg.channel.b_res
    fingerprint = cfg.basis_h.fingerprint() + cfg.basis_f.fingerprint()

    plans = None
    plan_end = 0            # the offline baseline always completes its plan
    if algo == "offline":
        targets = S0[:, :2] - np.asarray(sw.center)
        plans = [offline_plan(S0[i, :2], targets[i], cfg.offline, dyn) for i in range(N)]
        plan_end = max(p[0].size - 1 for p in plans)

    states = [S.copy()]
    actions, h_abs, f_abs, wh_n, wf_n, bits = [], [], [], [], [], []
    rounds = []
    total_bits = 0.0
    degenerate = 0
    latched = _norm(S) <= safety.dest_norm
    entry = np.where(latched, 0, -1)

    if algo.startswith("mfg"):
        total_bits += N * state_bits        # one exchange of initial states

    workers = max(1, int(sw.workers))
    chunks = np.array_split(np.arange(N), min(workers, N)) if workers > 1 else [np.arange(N)]
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    sig = dyn.sigma_wind

    def agent_phase(idx, n, phi_emp, out):
        taps = []
        act_idx = idx[~latched[idx]]
        a = np.empty((idx.size, 2))
        hb = np.zeros(idx.size)
        fb = np.zeros(idx.size)
        deg = 0
        if act_idx.size:
            s = S[act_idx]
            loc = np.searchsorted(idx, act_idx)
            if algo == "hjb" or N == 1:
                phi = phi_emp[act_idx]
            elif n < n_warm:
                phi = phi_emp[act_idx]
            else:
                phi, dflag = _fpk.mf_interaction(s, ag.wf0[act_idx], cfg.basis_f,
                                                 cfg.quadrature, cst)
                deg = int(dflag.sum())
            be = _basis.evaluate(cfg.basis_h, s, sig)
            model = _hjb.HjbModel(ag.wh0[act_idx], ag.wh1[act_idx])
            new, info = _hjb.update(model, be, s, phi, dyn, cst, cfg.hjb)
            ag.wh0[act_idx], ag.wh1[act_idx] = new.w0, new.w1
            hb[loc] = np.abs(info.residual)
            if ag.use_f:
                bf = _basis.evaluate(cfg.basis_f, s, sig)
                fm = _fpk.FpkModel(ag.wf0[act_idx], ag.wf1[act_idx])
                fnew, F, _g0, _g1 = _fpk.update(fm, bf, s, new.w0, be, dyn, cst, cfg.fpk)
                ag.wf0[act_idx], ag.wf1[act_idx] = fnew.w0, fnew.w1
                fb[loc] = np.abs(F)
                if fpk_tap is not None:
                    taps.append((act_idx, np.concatenate([_g0, _g1], axis=1)))
            a[loc] = _hjb.action(new.w0, be, cst.c3)
        hold = idx[latched[idx]]
        if hold.size:
            v = S[hold, 2:4]
            a[np.searchsorted(idx, hold)] = (dyn.c0 * (v - np.asarray(dyn.v_o))
                                             - sw.stop_gain * v)
        out[idx] = a
        return hb, fb, deg, taps

    try:
        for n in range(T):
            # federated round on the barrier snapshot
            if fl and n % n0 == 0:
                def bundle(i):
                    v = flcfg.variant
                    return _fed.ModelBundle(
                        i, len(rounds), fingerprint,
                        (ag.wh0[i], ag.wh1[i]) if v in ("H", "HF") else None,
                        (ag.wf0[i], ag.wf1[i]) if v in ("F", "HF") else None)
                avg, recv, rec = _fed.run_round(len(rounds), n, flcfg, bundle, S[:, :2],
                                                cfg.channel, chan_rngs, ag.mh, ag.mf, d_max)
                _fed.apply_broadcast((ag.wh0, ag.wh1), (ag.wf0, ag.wf1), avg, recv,
                                     flcfg.variant)
                total_bits += rec.bits
                rounds.append(rec.as_dict())

            phi_emp = None
            if algo == "hjb":
                diff = S[None, :, :2] - S[:, None, :2]
                dist = _norm(diff)
                ok = np.empty((N, N), dtype=bool)
                link_d = np.where(np.eye(N, dtype=bool), 1.0, dist)
                for j in range(N):
                    ok[:, j] = _ch.link_success(link_d[:, j], cfg.channel, chan_rngs[j])
                mask = (ok & (dist <= sw.comm_range)) | np.eye(N, dtype=bool)
                phi_emp = _cost.phi_global_all(S, cst, mask)
                total_bits += N * state_bits
            elif learn:
                if N == 1:
                    phi_emp = np.zeros(1)
                elif n < n_warm:
                    K = _cost.interaction_kernel(S[:, None, :], S0[None, :, :],
                                                 cst.eps, cst.beta)
                    np.fill_diagonal(K, 0.0)
                    phi_emp = K.sum(axis=1) / N

            if learn:
                A = np.empty((N, 2))
                if pool is None:
                    res = [agent_phase(chunks[0], n, phi_emp, A)]
                else:
                    res = list(pool.map(lambda c: agent_phase(c, n, phi_emp, A), chunks))
                hb = np.concatenate([r[0] for r in res])
                fb = np.concatenate([r[1] for r in res])
                degenerate += sum(r[2] for r in res)
                if fpk_tap is not None:
                    for r in res:
                        for agents_, g in r[3]:
                            fpk_tap(n, agents_.copy(), g.copy())
                h_abs.append(hb)
                f_abs.append(fb)
                wh_n.append(_norm(np.concatenate([ag.wh0, ag.wh1], axis=1)))
                if ag.use_f:
                    wf_n.append(_norm(np.concatenate([ag.wf0, ag.wf1], axis=1)))
            else:
                A = _offline_actions(plans, n, dyn)
                h_abs.append(np.zeros(N))

            if not np.all(np.isfinite(A)):
                bad = int(np.argwhere(~np.isfinite(A))[0, 0])
                raise SimulationDiverged(f"non-finite action at step {n}, agent {bad}")

            noise = np.stack([g.standard_normal(2) for g in wind])
            S = dyn_step(S, A, dyn, noise)
            if not np.all(np.isfinite(S)):
                bad = int(np.argwhere(~np.isfinite(S))[0, 0])
                raise SimulationDiverged(f"non-finite state at step {n + 1}, agent {bad}")
            actions.append(A)
            states.append(S.copy())
            bits.append(total_bits)

            arrived = (~latched) & (_norm(S) <= safety.dest_norm)
            entry[arrived] = n + 1
            latched = latched | arrived
            if rollout is not None:
                rollout(n, S)
            if latched.all() and n + 1 >= plan_end:
                break
    except _basis.BasisEnvelopeError as exc:
        bad = int(np.argmax(np.max(np.abs(S), axis=1)))
        raise SimulationDiverged(f"step {len(actions)}, agent {bad}: {exc}") from None
    finally:
        if pool is not None:
            pool.shutdown()

    n_run = len(actions)
    initial_bits = float(N * state_bits) if algo.startswith("mfg") else 0.0
    if algo == "hjb":
        closed = _ch.state_payload_closed_form(N, n_run, cfg.channel.b_res)
    elif fl:
        n_tx = _fed.n_candidates(N, flcfg.participation)
        msize = _ch.model_size(flcfg.variant, ag.mh, ag.mf)
        closed = _ch.fl_payload_closed_form(n_tx, math.ceil(n_run / n0), msize,
                                            cfg.channel.b_res)
    else:
        closed = 0.0

    rep = SimReport(
        algo=algo, seed=seed,
        states=np.array(states), actions=np.array(actions),
        h_abs=np.array(h_abs),
        f_abs=np.array(f_abs) if learn and ag.use_f else None,
        wh_norm=np.array(wh_n) if learn else None,
        wf_norm=np.array(wf_n) if learn and ag.use_f else None,
        cum_bits=np.array(bits), rounds=rounds, degenerate_events=degenerate,
        bits_closed_form=float(closed), bits_initial=initial_bits)
    rep.metrics = trajectory_metrics(rep.states, cfg)
    rep.summary = summarize(rep, cfg)
    return rep


def trajectory_metrics(states, cfg):
    """Per-step metrics that depend only on the state history."""
    st = np.asarray(states, dtype=float)
    dt, safety = cfg.dynamics.dt, cfg.safety
    T1, N = st.shape[0], st.shape[1]
    norms = _norm(st)
    inside = norms <= safety.dest_norm
    entry = np.where(inside.any(axis=0), np.argmax(inside, axis=0), -1)
    speed = _norm(st[:, :, 2:4])
    pw = _cost.power(speed, cfg.power)
    steps = np.arange(T1)[:, None]
    flying = (entry[None, :] < 0) | (steps < entry[None, :])
    energy_step = np.where(flying, pw, 0.0) * dt
    cum_energy = np.cumsum(energy_step, axis=0)        # energy up to and incl. step
    a_sum = np.array([_cost.pair_speed_sum(s) for s in st])
    c_cnt = np.array([_cost.pair_close_count(s, safety.r_C) for s in st], dtype=float)
    c_cnt_x = c_cnt - N
    k = np.arange(1, T1 + 1)
    phi_A = np.cumsum(a_sum) / k / N ** 2
    phi_C = np.cumsum(c_cnt) / k / N ** 2
    phi_C_x = np.cumsum(c_cnt_x) / k / N ** 2
    # a collision event is the onset of a pair closer than r_coll; pairs of
    # agents that have both arrived (landed) are not counted
    events, parked_events = [], []
    prev = set()
    for n, s in enumerate(st):
        cur = set(_cost.collision_pairs(s, safety.r_coll))
        for i, j in sorted(cur - prev):
            landed = 0 <= entry[i] <= n and 0 <= entry[j] <= n
            (parked_events if landed else events).append((n, i, j))
        prev = cur
    return {"entry": entry, "speed": speed, "cum_energy": cum_energy,
            "phi_A": phi_A, "phi_C": phi_C, "phi_C_excl": phi_C_x,
            "collisions": events, "collisions_landed": parked_events}


def summarize(rep, cfg):
    m = rep.metrics
    dt = cfg.dynamics.dt
    n_run = rep.n_steps
    T_avg, T_max, trunc = _cost.travel_times(m["entry"], dt, n_run)
    # energy per agent: flight until arrival (or the end of the run)
    E = m["cum_energy"][-1]
    k = min(max(1, int(round(T_avg / dt))), m["phi_A"].size)
    bm = boundedness_monitor(rep.h_abs, rep.f_abs, rep.wh_norm, rep.wf_norm)
    bits_total = float(rep.cum_bits[-1]) if rep.cum_bits.size else 0.0
    # speeds while flying: from the start up to and including the entry step
    steps = np.arange(m["speed"].shape[0])[:, None]
    ent = m["entry"][None, :]
    fly_speed = m["speed"][(ent < 0) | (steps <= ent)]
    return {
        "algo": rep.algo, "seed": int(rep.seed),
        "n_agents": int(rep.states.shape[1]), "steps": int(n_run),
        "arrived": int(np.sum(m["entry"] >= 0)),
        "T_avg": T_avg, "T_max": T_max, "truncated": trunc,
        "energy_mean": float(E.mean()), "energy_var": float(E.var()),
        "phi_A": float(m["phi_A"][k - 1]), "phi_C": float(m["phi_C"][k - 1]),
        "phi_C_excl_self": float(m["phi_C_excl"][k - 1]),
        "collisions": len(m["collisions"]),
        "collisions_landed": len(m["collisions_landed"]),
        "max_speed": float(fly_speed.max()),
        "mean_speed": float(fly_speed.mean()),
        "min_speed": float(fly_speed.min()),
        "bits_total": bits_total,
        "bits_initial": rep.bits_initial,
        "bits_scheme": bits_total - rep.bits_initial,
        "bits_closed_form": rep.bits_closed_form,
        "rounds": len(rep.rounds),
        "outages": int(sum(len(r["outages"]) for r in rep.rounds)),
        "degenerate_density_events": int(rep.degenerate_events),
        "max_abs_H": bm["max_abs_H"], "max_abs_F": bm["max_abs_F"],
        "max_norm_wH": bm["max_norm_wH"], "max_norm_wF": bm["max_norm_wF"],
        "finite": bm["finite"],
    }


def metric_rows(rep):
    m = rep.metrics
    rows = []
    fa = rep.f_abs
    for n in range(rep.n_steps + 1):
        if n < rep.n_steps:
            h = float(rep.h_abs[n].max())
            f = float(fa[n].max()) if fa is not None else 0.0
            b = float(rep.cum_bits[n])
        else:
            h, f, b = 0.0, 0.0, float(rep.cum_bits[-1])
        rows.append([n, float(m["cum_energy"][n].mean()), float(m["phi_A"][n]),
                     float(m["phi_C"][n]), h, f, b])
    return rows


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_outputs(rep, cfg, out_dir):
    """Write trajectories.csv, metrics.csv, rounds.jsonl and summary.json."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trajectories.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJ_HEADER)
        for n in range(rep.states.shape[0]):
            for i in range(rep.states.shape[1]):
                s = rep.states[n, i]
                a = rep.actions[n, i] if n < rep.n_steps else (None, None)
                w.writerow([n, i] + [_fmt(x) for x in s] +
                           ["" if x is None else _fmt(x) for x in a])
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_HEADER)
        for row in metric_rows(rep):
            w.writerow([row[0]] + [_fmt(x) for x in row[1:]])
    with open(os.path.join(out_dir, "rounds.jsonl"), "w") as fh:
        for r in rep.rounds:
            fh.write(json.dumps(r) + "\n")
    summary = dict(rep.summary)
    summary["config"] = cfg.to_dict()
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
    return summary


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.ndarray, tuple)):
        return list(o)
    raise TypeError(type(o))


def read_trajectories(path):
    """Load a trajectories.csv back into a (T + 1, N, 4) state array."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    T1 = max(int(r["step"]) for r in rows) + 1
    N = max(int(r["agent"]) for r in rows) + 1
    st = np.empty((T1, N, 4))
    for r in rows:
        st[int(r["step"]), int(r["agent"])] = [float(r[k]) for k in ("x", "y", "v_x", "v_y")]
    return st


SWEEP_KEYS = {"N": "swarm.n_agents", "n0": "federation.n0",
              "sigma_wind": "dynamics.sigma_wind"}


def sweep(cfg, axis, values, algos, seeds, steps=None, out_dir=None):
    """Run every (value, algo, seed) cell; returns one summary row per cell.

    A failing cell yields a row with status "failed" and the error text, and
    the sweep carries on.  With out_dir, each cell writes its outputs to its
    own directory <axis>=<value>/<algo>/seed<seed>.
    """
    from .config import apply_overrides
    key = SWEEP_KEYS.get(axis)
    if key is None:
        raise ValueError(f"unknown sweep axis {axis!r}")
    if not len(values):
        raise ValueError("sweep needs at least one value")
    out = []
    for v in values:
        c = apply_overrides(cfg, [f"{key}={v}"])
        for algo in algos:
            for sd in seeds:
                base = {"axis": axis, "value": v, "algo": algo, "seed": int(sd)}
                try:
                    rep = simulate(c, algo, sd, steps)
                except Exception as exc:        # recorded, the sweep goes on
                    out.append({**base, "status": "failed",
                                "error": f"{type(exc).__name__}: {exc}"})
                    continue
                row = {**rep.summary, **base, "status": "ok", "error": ""}
                if out_dir is not None:
                    cell = os.path.join(out_dir, f"{axis}={v}", algo, f"seed{sd}")
                    write_outputs(rep, c, cell)
                    row["dir"] = cell
                out.append(row)
    return out


def aggregate_sweep(rows, keys=("T_avg", "energy_mean", "phi_A", "phi_C",
                                "collisions", "max_speed", "bits_total")):
    """Mean and population standard deviation per (value, algo) cell."""
    cells = {}
    for r in rows:
        cells.setdefault((r["value"], r["algo"]), []).append(r)
    table = []
    for (v, algo), rs in cells.items():
        ok = [r for r in rs if r.get("status", "ok") == "ok"]
        row = {"value": v, "algo": algo, "runs": len(ok), "failed": len(rs) - len(ok)}
        for k in keys:
            vals = np.array([r[k] for r in ok if r.get(k) is not None], dtype=float)
            row[f"{k}_mean"] = float(vals.mean()) if vals.size else None
            row[f"{k}_std"] = float(vals.std()) if vals.size else None
        table.append(row)
    return table
