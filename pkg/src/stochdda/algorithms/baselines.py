"""Comparison methods: PG-EXTRA, P2D2, the distributed subgradient method and conventional DDA.

Every runner draws exactly one mixing matrix per round from the same
"network" stream that :func:`run_dda` uses, so runs sharing a seed see the
same sequence of matrices.
"""

from __future__ import annotations

import numpy as np

from ..streams import stream
from .dda import NumericalError, as_model, primal_metrics
from .trace import Recorder, RunTrace


def inv_sqrt_step(t):
    """``a_t = 1 / sqrt(t + 1)``."""
    return 1.0 / np.sqrt(t + 1.0)


def constant_step(a):
    return lambda t: a


def _setup(instance, model, seed, rng, x_star, F_star):
    model = as_model(model)
    if model.n != instance.n:
        raise ValueError(f"network has {model.n} nodes, problem has {instance.n} agents")
    rng = stream(seed, "network") if rng is None else rng
    if x_star is not None and F_star is None:
        F_star = float(instance.F(x_star))
    x = np.tile(instance.x0, (instance.n, 1))
    return model, rng, F_star, x


def _grads(instance, x, t):
    g = instance.grads(x)
    if not np.all(np.isfinite(g)):
        bad = np.unique(np.nonzero(~np.isfinite(g))[0])
        raise NumericalError(f"non-finite gradient at round {t} for agent(s) {bad.tolist()}")
    return g


def _finish(name, rec, x, x_star, meta, xs):
    cols = rec.columns()
    if x_star is not None and cols["sq_dist"][0] > 0:
        cols["rse"] = cols["sq_dist"] / cols["sq_dist"][0]
    return RunTrace(name, cols, meta=meta, x_final=x, x_history=np.array(xs) if xs is not None else None)


def _record(rec, t, instance, x, x_star, F_star, xs):
    xbar = x.mean(axis=0)
    rec.add(t=t, **primal_metrics(instance, x, x_star, F_star),
            consensus_residual_z=float(np.linalg.norm(x - xbar)))
    if xs is not None:
        xs.append(x.copy())


def _run_extra_family(name, mix, instance, model, a, T, seed, x_star, F_star, store_iterates, rng, meta):
    model, rng, F_star, x = _setup(instance, model, seed, rng, x_star, F_star)
    if not a > 0:
        raise ValueError(f"step a must be positive, got {a}")
    h = instance.h
    rec, xs = Recorder(), ([] if store_iterates else None)
    _record(rec, 0, instance, x, x_star, F_star, xs)
    if T == 0:
        return _finish(name, rec, x, x_star, meta, xs)
    n = instance.n
    I = np.eye(n)
    g_prev = _grads(instance, x, 0)
    # first round: z1 = Pt x0 - a grad0 with Pt = (I + P)/2
    P = model.sample(rng)
    z = 0.5 * (I + P) @ x - a * g_prev
    x_prev, x = x, h.prox(z, a)
    _record(rec, 1, instance, x, x_star, F_star, xs)
    for t in range(2, T + 1):
        P = model.sample(rng)
        g = _grads(instance, x, t - 1)
        z = mix(P, z, x, x_prev) - a * (g - g_prev)
        g_prev = g
        x_prev, x = x, h.prox(z, a)
        _record(rec, t, instance, x, x_star, F_star, xs)
    return _finish(name, rec, x, x_star, meta, xs)


def run_pg_extra(instance, model, a, T, seed=0, *, x_star=None, F_star=None, store_iterates=False, rng=None):
    """``z^t = z^{t-1} - x^{t-1} + Pt (2x^{t-1} - x^{t-2}) - a (g^{t-1} - g^{t-2})``, ``x^t = prox_{a h}(z^t)``."""
    n = instance.n
    I = np.eye(n)

    def mix(P, z, x, x_prev):
        return z - x + 0.5 * (I + P) @ (2 * x - x_prev)

    meta = {"algorithm": "pg_extra", "a": a, "T": T, "seed": seed}
    return _run_extra_family("pg_extra", mix, instance, model, a, T, seed, x_star, F_star, store_iterates, rng, meta)


def run_p2d2(instance, model, a, T, seed=0, *, alpha=0.5, x_star=None, F_star=None, store_iterates=False, rng=None):
    """``z^t = (I - alpha B) z^{t-1} + (I - B)(x^{t-1} - x^{t-2}) - a (g^{t-1} - g^{t-2})`` with ``B = (I - P)/2``."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    I = np.eye(instance.n)

    def mix(P, z, x, x_prev):
        B = 0.5 * (I - P)
        return z - alpha * (B @ z) + (x - x_prev) - B @ (x - x_prev)

    meta = {"algorithm": "p2d2", "a": a, "alpha": alpha, "T": T, "seed": seed}
    return _run_extra_family("p2d2", mix, instance, model, a, T, seed, x_star, F_star, store_iterates, rng, meta)


def run_dsm(instance, model, T, seed=0, *, step_rule=inv_sqrt_step, x_star=None, F_star=None,
            store_iterates=False, rng=None):
    """Distributed subgradient method ``x^t = P x^{t-1} - a_{t-1} r^{t-1}``, r a subgradient of ``f_i + h``."""
    if instance.h.is_constrained:
        raise ValueError("DSM inapplicable: the regularizer is a constraint indicator")
    model, rng, F_star, x = _setup(instance, model, seed, rng, x_star, F_star)
    rec, xs = Recorder(), ([] if store_iterates else None)
    _record(rec, 0, instance, x, x_star, F_star, xs)
    for t in range(1, T + 1):
        P = model.sample(rng)
        r = _grads(instance, x, t - 1) + instance.h.subgradient(x)
        x = P @ x - step_rule(t - 1) * r
        _record(rec, t, instance, x, x_star, F_star, xs)
    meta = {"algorithm": "dsm", "T": T, "seed": seed}
    return _finish("dsm", rec, x, x_star, meta, xs)


def run_cdda(instance, model, T, seed=0, *, step_rule=inv_sqrt_step, x_star=None, F_star=None,
             store_iterates=False, rng=None):
    """Conventional DDA: ``z^t = P z^{t-1} + r^{t-1}``, ``x^t = argmin a_{t-1}<z, x> + d(x)``.

    With a constraint-type h the argmin is taken over the ball (a projection)
    and only the smooth gradients enter z; with h = phi ||x||_1 the subgradient
    of h is added to r.
    """
    model, rng, F_star, x = _setup(instance, model, seed, rng, x_star, F_star)
    h = instance.h
    composite = h.is_constrained
    z = np.zeros_like(x)
    rec, xs = Recorder(), ([] if store_iterates else None)
    _record(rec, 0, instance, x, x_star, F_star, xs)
    for t in range(1, T + 1):
        P = model.sample(rng)
        r = _grads(instance, x, t - 1)
        if not composite:
            r = r + h.subgradient(x)
        z = P @ z + r
        x = instance.x0 - step_rule(t - 1) * z
        if composite:
            x = h.prox(x, 1.0)
        _record(rec, t, instance, x, x_star, F_star, xs)
    meta = {"algorithm": "cdda", "T": T, "seed": seed,
            "h_handling": "projection" if composite else "subgradient"}
    return _finish("cdda", rec, x, x_star, meta, xs)
