"""Regularizers, the quadratic distance generator and the weighted primal solver.

All functions accept a single vector or a stack of vectors (one per row) and
operate along the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# feasibility slack used when evaluating the l1-ball indicator on computed points
BALL_TOL = 1e-9


def soft_threshold(v, lam):
    """Componentwise shrinkage ``sign(v) * max(|v| - lam, 0)``.

    This is the minimizer of ``lam * ||x||_1 + 0.5 * ||x - v||^2``. ``lam`` may be
    a scalar or broadcastable against ``v`` (e.g. one threshold per row).
    """
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def project_l1_ball(v, radius):
    """Euclidean projection onto ``{x : ||x||_1 <= radius}``.

    Sort-based pivot search, O(m log m) per row. Rows already inside the ball
    are returned unchanged.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    v = np.asarray(v, dtype=float)
    flat = np.atleast_2d(v)
    out = flat.copy()
    absv = np.abs(flat)
    outside = absv.sum(axis=1) > radius
    if np.any(outside):
        u = -np.sort(-absv[outside], axis=1)
        css = np.cumsum(u, axis=1)
        k = np.arange(1, u.shape[1] + 1)
        # the test holds for a leading run of indices, so counting gives the pivot
        rho = np.count_nonzero(u - (css - radius) / k > 0, axis=1)
        tau = (css[np.arange(len(rho)), rho - 1] - radius) / rho
        out[outside] = np.sign(flat[outside]) * np.maximum(absv[outside] - tau[:, None], 0.0)
    return out.reshape(v.shape)


def subgradient_l1(x, phi):
    """The element ``phi * sign(x)`` of the subdifferential of ``phi * ||x||_1`` (sign(0) = 0)."""
    return phi * np.sign(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Regularizer:
    """Shared non-smooth term h: zero, ``weight * ||x||_1`` or the indicator of an l1 ball."""

    kind: str = "zero"
    weight: float = 0.0
    radius: float = np.inf

    def __post_init__(self):
        if self.kind not in ("zero", "l1", "l1_ball"):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.kind == "l1" and self.weight < 0:
            raise ValueError("l1 weight must be nonnegative")
        if self.kind == "l1_ball" and not (self.radius > 0 and np.isfinite(self.radius)):
            raise ValueError(f"l1-ball radius must be positive and finite, got {self.radius}")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def l1(cls, weight):
        return cls("l1", weight=float(weight))

    @classmethod
    def l1_ball(cls, radius):
        return cls("l1_ball", radius=float(radius))

    @property
    def is_constrained(self):
        return self.kind == "l1_ball"

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
        norm1 = np.abs(x).sum(axis=-1)
        if self.kind == "l1":
            return self.weight * norm1 if x.ndim > 1 else float(self.weight * norm1)
        out = np.where(norm1 <= self.radius * (1 + BALL_TOL), 0.0, np.inf)
        return out if x.ndim > 1 else float(out)

    def contains(self, x):
        return bool(np.all(np.isfinite(self.evaluate(x))))

    def prox(self, v, step):
        """argmin_x ``step * h(x) + 0.5 * ||x - v||^2``."""
        if self.kind == "zero":
            return np.array(v, dtype=float)
        if self.kind == "l1":
            return soft_threshold(v, np.asarray(step, dtype=float) * self.weight)
        return project_l1_ball(v, self.radius)

    def subgradient(self, x):
        if self.kind == "zero":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.kind == "l1":
            return subgradient_l1(x, self.weight)
        raise ValueError("the l1-ball indicator has no finite subgradient on its boundary")

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "l1":
            d["weight"] = self.weight
        elif self.kind == "l1_ball":
            d["radius"] = self.radius
        return d


@dataclass(frozen=True)
class DistanceGenerator:
    """``d(x) = 0.5 * ||x - center||^2``; strongly convex with modulus 1, d(center) = 0."""

    center: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @classmethod
    def origin(cls, m):
        return cls(np.zeros(m))

    def __call__(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        return 0.5 * np.sum(diff * diff, axis=-1)

    def gradient(self, x):
        return np.asarray(x, dtype=float) - self.center

    @property
    def is_origin(self):
        return not np.any(self.center)


def solve_primal(z, A, mu, h, d, d_weight=1.0):
    """Minimize ``<z, x> + A * (mu/2 ||x||^2 + h(x)) + d_weight * d(x)``.

    ``d_weight`` is 1 for the textbook subproblem; callers that keep the dual
    variable in rescaled units (to avoid overflow of geometric weights) pass
    the reciprocal of the scale factor, which leaves the minimizer unchanged.
    ``A`` may be a scalar or a column broadcast against stacked ``z``.
    """
    if np.any(np.asarray(A) < 0):
        raise ValueError("cumulative weight must be nonnegative")
    z = np.asarray(z, dtype=float)
    denom = d_weight + mu * np.asarray(A, dtype=float)
    v = (d_weight * d.center - z) / denom
    return h.prox(v, np.asarray(A, dtype=float) / denom)
