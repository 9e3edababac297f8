"""Decentralized dual averaging with the dynamic averaging consensus protocol.

Each agent i keeps a primal estimate ``x_i``, a local copy ``z_i`` of the
global dual variable and a tracker ``s_i`` of the network average of
``grad f_j(x_j) - mu x_j``. One synchronous round with mixing matrix P is::

    z_i <- sum_j P_ij (z_j + a_t s_j)
    x_i <- argmin <z_i, x> + A_t (mu/2 ||x||^2 + h(x)) + d(x)
    s_i <- sum_j P_ij s_j + (grad f_i(x_i) - mu x_i) - (previous value of the same)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..network import TimeInvariant
from ..proximal import solve_primal
from ..streams import stream
from .schedule import StepSchedule, validate_step
from .trace import Recorder, RunTrace


class NumericalError(FloatingPointError):
    pass


@dataclass
class DDAState:
    x: np.ndarray  # (n, m) primal estimates
    z: np.ndarray  # (n, m) dual estimates (in the schedule's current units)
    s: np.ndarray  # (n, m) gradient trackers
    g: np.ndarray  # (n, m) grad f_i(x_i) - mu x_i at the current x
    t: int = 0

    @classmethod
    def initial(cls, instance, mu):
        x = np.tile(instance.x0, (instance.n, 1))
        g = instance.grads(x)
        _check_finite(g, "gradient", 0)
        g -= mu * x
        return cls(x, np.zeros_like(x), g.copy(), g, 0)


def as_model(model):
    return TimeInvariant(np.asarray(model, dtype=float)) if isinstance(model, np.ndarray) else model


def _check_finite(arr, what, t):
    if not np.all(np.isfinite(arr)):
        bad = np.unique(np.nonzero(~np.isfinite(arr))[0])
        raise NumericalError(f"non-finite {what} at round {t} for agent(s) {bad.tolist()}")


def dda_round(state, P, schedule, instance, mu=None):
    """Advance every agent by one round; ``schedule`` must already hold round t's weights."""
    mu = instance.mu if mu is None else mu
    z = P @ (state.z + schedule.a_t * state.s)
    x = solve_primal(z, schedule.A_t, mu, instance.h, instance.d, schedule.d_weight)
    g = instance.grads(x)
    _check_finite(g, "gradient", state.t + 1)
    g -= mu * x
    s = P @ state.s + g - state.g
    return DDAState(x, z, s, g, state.t + 1)


def y_sequence_step(zbar, schedule, instance, mu=None):
    """Primal point generated by the exact network-average dual ``zbar`` (analysis only)."""
    mu = instance.mu if mu is None else mu
    if schedule.t == 0:
        return np.array(instance.x0, dtype=float)
    return solve_primal(zbar, schedule.A_t, mu, instance.h, instance.d, schedule.d_weight)


def primal_metrics(instance, X, x_star, F_star, objective=True):
    if x_star is None:
        return {}
    diff = X - x_star
    out = {"sq_dist": float(np.sum(diff * diff))}
    if objective:
        out["obj_gap_mean_x"] = float(np.mean(instance.F(X))) - F_star
    return out


def run_dda(
    instance, model, a, T, seed=0, *, mu=None, x_star=None, F_star=None,
    monitors=True, objective=True, store_iterates=False, rng=None,
):
    """Simulate T rounds; one mixing matrix is drawn per round from the "network" stream of ``seed``.

    ``mu`` overrides the modulus used by the algorithm (default ``instance.mu``).
    With ``x_star`` the trace carries RSE and objective gaps; with ``monitors``
    it also carries the conservation, deviation and running-average checks.
    ``objective=False`` skips the per-round objective evaluation at the agents'
    iterates, which dominates the cost of long runs.
    """
    mu = instance.mu if mu is None else mu
    validate_step(a, mu)
    model = as_model(model)
    if model.n != instance.n:
        raise ValueError(f"network has {model.n} nodes, problem has {instance.n} agents")
    rng = stream(seed, "network") if rng is None else rng
    if x_star is not None and F_star is None:
        F_star = float(instance.F(x_star))

    sched = StepSchedule(a, mu)
    state = DDAState.initial(instance, mu)
    rec = Recorder()
    sum_as = np.zeros(instance.m)
    ytilde = xtilde = None
    xs, ys = [], []

    def record(y):
        row = {"t": state.t, "log_A": sched.log_A, **primal_metrics(instance, state.x, x_star, F_star, objective)}
        if monitors:
            zbar, sbar = state.z.mean(axis=0), state.s.mean(axis=0)
            gbar = (state.g + mu * state.x).mean(axis=0)
            scale = sched.d_weight + mu * sched.A_t
            zdev = np.linalg.norm(state.z - zbar, axis=1)
            row.update(
                conservation_s=float(np.linalg.norm(sbar - state.g.mean(axis=0)) / (1 + np.linalg.norm(gbar))),
                conservation_z=float(np.linalg.norm(zbar - sum_as) / (1 + np.linalg.norm(zbar))),
                consensus_residual_s=float(np.linalg.norm(state.s - sbar)),
                consensus_residual_z=float(np.linalg.norm(zdev) / scale),
                lemma5_slack=float(np.min(zdev / scale - np.linalg.norm(state.x - y, axis=1))),
            )
            if state.t > 0:
                row["schedule_identity"] = max(sched.identity_residuals())
            if x_star is not None and ytilde is not None:
                row.update(
                    obj_gap_ybar=float(instance.F(ytilde)) - F_star,
                    dev_xtilde_ytilde=float(np.max(np.sum((xtilde - ytilde) ** 2, axis=1))),
                    dev_xtilde_xstar=float(np.max(np.sum((xtilde - x_star) ** 2, axis=1))),
                    gap_xtilde_max=float(np.max(instance.F(xtilde))) - F_star,
                )
        rec.add(**row)
        if store_iterates:
            xs.append(state.x.copy())
            ys.append(y)

    y = np.array(instance.x0, dtype=float)
    record(y)
    for _ in range(T):
        P = model.sample(rng)
        sched.advance()
        c = sched.maybe_rescale()
        if c != 1.0:
            state = replace(state, z=state.z / c)
            sum_as /= c
        sum_as = sum_as + sched.a_t * state.s.mean(axis=0)
        state = dda_round(state, P, sched, instance, mu)
        if monitors or store_iterates:
            y = y_sequence_step(state.z.mean(axis=0), sched, instance, mu)
        if monitors:
            w = sched.ratio
            ytilde = y.copy() if ytilde is None else ytilde + w * (y - ytilde)
            xtilde = state.x.copy() if xtilde is None else xtilde + w * (state.x - xtilde)
        record(y)

    cols = rec.columns()
    if x_star is not None and cols["sq_dist"][0] > 0:
        cols["rse"] = cols["sq_dist"] / cols["sq_dist"][0]
    return RunTrace(
        "dda",
        cols,
        meta={"algorithm": "dda", "a": a, "mu": mu, "T": T, "seed": seed, "network": model.kind,
              "log_scale": sched.log_scale, "A_T_log": sched.log_A if T else -math.inf},
        x_final=state.x,
        x_history=np.array(xs) if store_iterates else None,
        y_history=np.array(ys) if store_iterates else None,
        ytilde_final=ytilde,
        xtilde_final=xtilde,
    )
