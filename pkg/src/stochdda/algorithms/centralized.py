"""Single-machine dual averaging and the proximal-gradient reference solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..proximal import solve_primal
from .schedule import StepSchedule


@dataclass
class CentralizedTrace:
    x: np.ndarray  # (T+1, m) iterates
    xtilde: np.ndarray  # (T+1, m) weighted running means; row 0 is x0
    log_A: np.ndarray  # (T+1,)
    gap_xtilde: np.ndarray | None = None  # F(xtilde_t) - F*, if F* was given
    meta: dict = field(default_factory=dict)


def centralized_da(instance, a, T, *, mu=None, F_star=None, check_step=True):
    """Dual averaging on ``f = mean f_i``:
    ``x_t = solve_primal(sum_{tau<t} a_{tau+1} (grad f(x_tau) - mu x_tau), A_t, mu, h, d)``.
    """
    mu = instance.mu if mu is None else mu
    if check_step and a > 1.0 / instance.L * (1 + 1e-12):
        raise ValueError(f"step a={a} exceeds 1/L={1.0 / instance.L}")
    sched = StepSchedule(a, mu)
    x = np.array(instance.x0, dtype=float)
    z = np.zeros_like(x)
    xs, xt, logA = [x], [x], [-math.inf]
    xtilde = None
    for _ in range(T):
        g = instance.grad_f(x) - mu * x
        sched.advance()
        c = sched.maybe_rescale()
        z = z / c + sched.a_t * g
        x = solve_primal(z, sched.A_t, mu, instance.h, instance.d, sched.d_weight)
        xtilde = x.copy() if xtilde is None else xtilde + sched.ratio * (x - xtilde)
        xs.append(x)
        xt.append(xtilde)
        logA.append(sched.log_A)
    xt_arr = np.array(xt)
    gap = None
    if F_star is not None:
        gap = np.asarray(instance.F(xt_arr), dtype=float) - F_star
    return CentralizedTrace(np.array(xs), xt_arr, np.array(logA), gap, {"a": a, "mu": mu, "T": T})


class ReferenceNotConverged(RuntimeError):
    def __init__(self, residual, iterations, x):
        self.residual = residual
        self.iterations = iterations
        self.x = x
        super().__init__(f"proximal gradient stopped after {iterations} iterations with step residual {residual:.3e}")


@dataclass
class ReferenceSolution:
    x_star: np.ndarray
    F_star: float
    d_xstar: float
    sigma2: float
    iterations: int
    residual: float
    tol: float

    def to_dict(self):
        return {
            "x_star": self.x_star.tolist(),
            "F_star": self.F_star,
            "d_xstar": self.d_xstar,
            "sigma2": self.sigma2,
            "iterations": self.iterations,
            "residual": self.residual,
            "tol": self.tol,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["x_star"], dtype=float), d["F_star"], d["d_xstar"], d["sigma2"],
                   d["iterations"], d["residual"], d["tol"])


def gradient_spread(G):
    """``sum_i ||G_i - mean_j G_j||^2`` over the rows of G."""
    G = np.asarray(G, dtype=float)
    dev = G - G.mean(axis=0)
    return float(np.sum(dev * dev))


def sigma_squared(instance, x0=None):
    """Spread of the local gradients at the common starting point x0."""
    x0 = instance.x0 if x0 is None else np.asarray(x0, dtype=float)
    return gradient_spread(instance.grads(np.broadcast_to(x0, (instance.n, instance.m))))


def solve_reference(instance, tol=1e-14, max_iter=1_000_000, x_init=None):
    """Proximal gradient with step 1/L until ``||x_{k+1} - x_k|| <= tol * max(1, ||x_k||)``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    step = 1.0 / instance.L
    h = instance.h
    x = np.array(instance.x0 if x_init is None else x_init, dtype=float)
    x = h.prox(x, step)
    res = math.inf
    for k in range(1, max_iter + 1):
        x_new = h.prox(x - step * instance.grad_f(x), step)
        res = float(np.linalg.norm(x_new - x))
        x = x_new
        if res <= tol * max(1.0, float(np.linalg.norm(x))):
            return ReferenceSolution(
                x, float(instance.F(x)), float(instance.d(x)), sigma_squared(instance), k, res, tol
            )
    raise ReferenceNotConverged(res, max_iter, x)
