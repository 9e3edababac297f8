"""Objective families: decentralized logistic regression and least squares.

Every agent holds the same number of samples, so agent data is stored as
stacked arrays ``features[i]`` (samples x m) and ``targets[i]`` which lets all
local gradients be evaluated in one vectorized pass.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .proximal import DistanceGenerator, Regularizer
from .streams import stream


def _expit(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def logistic_value_grad(x, features, labels, mu=0.0):
    """Value and gradient of ``mean_j log(1 + exp(-y_j M_j^T x)) + mu/2 ||x||^2``."""
    x = np.asarray(x, dtype=float)
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != x.shape[-1]:
        raise ValueError(f"dimension mismatch: x has {x.shape[-1]}, features have {features.shape[-1]}")
    labels = np.asarray(labels, dtype=float)
    margin = -labels * (features @ x)
    value = np.mean(np.logaddexp(0.0, margin)) + 0.5 * mu * (x @ x)
    grad = -(labels * _expit(margin)) @ features / len(labels) + mu * x
    return float(value), grad


def lasso_value_grad(x, C, b):
    """Value and gradient of ``0.5 ||b - C x||^2``."""
    x = np.asarray(x, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.shape[1] != x.shape[-1]:
        raise ValueError(f"dimension mismatch: x has {x.shape[-1]}, C has {C.shape[1]} columns")
    r = C @ x - b
    return 0.5 * float(r @ r), C.T @ r


@dataclass
class AgentDataset:
    """Per-agent samples. Logistic labels live in {-1, +1}."""

    features: np.ndarray  # (n, samples_per_agent, m)
    targets: np.ndarray  # (n, samples_per_agent)
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def samples_per_agent(self):
        return self.features.shape[1]


@dataclass
class ProblemInstance:
    """``F(x) = (1/n) sum_i f_i(x) + h(x)`` with smoothness L and strong convexity mu.

    ``family`` is "logistic" (``f_i`` = mean logistic loss + ``l2``/2 ||x||^2) or
    "least_squares" (``f_i = 0.5 ||b_i - C_i x||^2``).
    """

    family: str
    features: np.ndarray
    targets: np.ndarray
    L: float
    mu: float
    h: Regularizer = field(default_factory=Regularizer.zero)
    d: DistanceGenerator | None = None
    l2: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in ("logistic", "least_squares"):
            raise ValueError(f"unknown problem family {self.family!r}")
        if self.d is None:
            self.d = DistanceGenerator.origin(self.m)
        if not self.L >= self.mu >= 0:
            raise ValueError(f"need L >= mu >= 0, got L={self.L}, mu={self.mu}")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def m(self):
        return self.features.shape[2]

    @property
    def x0(self):
        return self.d.center

    def local_value_grad(self, i, x):
        if self.family == "logistic":
            return logistic_value_grad(x, self.features[i], self.targets[i], self.l2)
        return lasso_value_grad(x, self.features[i], self.targets[i])

    def grads(self, X):
        """Row i is the gradient of ``f_i`` at ``X[i]``."""
        X = np.asarray(X, dtype=float)
        if self.family == "logistic":
            margin = -self.targets * (self.features @ X[:, :, None])[:, :, 0]
            w = -self.targets * _expit(margin) / self.features.shape[1]
            return (w[:, None, :] @ self.features)[:, 0, :] + self.l2 * X
        r = (self.features @ X[:, :, None])[:, :, 0] - self.targets
        return (r[:, None, :] @ self.features)[:, 0, :]

    def local_values(self, X):
        """Row-wise ``f_i(X[i])``."""
        X = np.asarray(X, dtype=float)
        inner = np.einsum("nsm,nm->ns", self.features, X)
        if self.family == "logistic":
            return np.mean(np.logaddexp(0.0, -self.targets * inner), axis=1) + 0.5 * self.l2 * np.sum(X * X, axis=1)
        r = inner - self.targets
        return 0.5 * np.sum(r * r, axis=1)

    def f(self, x):
        """Average smooth part at each point; ``x`` is (m,) or (k, m)."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        inner = np.einsum("nsm,km->kns", self.features, pts)
        if self.family == "logistic":
            val = np.mean(np.logaddexp(0.0, -self.targets * inner), axis=(1, 2)) + 0.5 * self.l2 * np.sum(pts * pts, axis=1)
        else:
            r = inner - self.targets
            val = 0.5 * np.sum(r * r, axis=2).mean(axis=1)
        return val if np.ndim(x) > 1 else float(val[0])

    def grad_f(self, x):
        x = np.asarray(x, dtype=float)
        return self.grads(np.broadcast_to(x, (self.n, self.m))).mean(axis=0)

    def F(self, x):
        return self.f(x) + self.h.evaluate(x)

    def describe(self):
        return {
            "family": self.family,
            "n": self.n,
            "m": self.m,
            "L": self.L,
            "mu": self.mu,
            "l2": self.l2,
            "h": self.h.to_dict(),
            **self.meta,
        }


# -- constants ---------------------------------------------------------------


class PowerIterationError(RuntimeError):
    def __init__(self, residual, iterations):
        super().__init__(f"power iteration did not converge: residual {residual:.3e} after {iterations} iterations")
        self.residual = residual


def power_iteration(G, tol=1e-10, max_iter=10_000, seed=0):
    """Largest eigenvalue of the symmetric PSD matrix ``G``; stops when ``||Gv - lam v|| <= tol * lam``."""
    m = G.shape[0]
    v = np.random.default_rng(seed).standard_normal(m)
    v /= np.linalg.norm(v)
    lam, res = 0.0, np.inf
    for it in range(1, max_iter + 1):
        w = G @ v
        lam = float(v @ w)
        if lam <= 0:
            return 0.0
        res = float(np.linalg.norm(w - lam * v))
        if res <= tol * lam:
            return lam
        v = w / np.linalg.norm(w)
    raise PowerIterationError(res / lam, max_iter)


def estimate_constants(instance):
    """(L, mu) from the data: sigmoid-curvature bound for logistic, Gram spectra for least squares."""
    grams = np.einsum("nsm,nsk->nmk", instance.features, instance.features)
    top = max(power_iteration(G) for G in grams)
    if instance.family == "logistic":
        return top / (4 * instance.features.shape[1]) + instance.l2, instance.l2
    bottom = min(float(np.linalg.eigvalsh(G)[0]) for G in grams)
    # rank-deficient Grams report mu = 0
    return top, (bottom if bottom > 1e-12 * top else 0.0)


# -- generators ----------------------------------------------------------------


def generate_lasso_instance(
    seed, n=10, rows_per_agent=60, m=50, nonzero_prob=0.25, noise_std=0.01, ball_factor=1.1, mu_target=0.5
):
    """Synthetic constrained least squares with (L, mu) = (1, mu_target).

    ``C_i`` is Gaussian, rescaled so the largest Gram eigenvalue over agents is 1,
    then each Gram is blended ``(1 - rho) C_i^T C_i + rho I`` by appending
    ``sqrt(rho) I`` rows (zero targets); ``rho`` lifts the smallest eigenvalue over
    agents to ``mu_target``. Returns ``(instance, x_sharp)``.
    """
    rng = stream(seed, "data")
    mask = rng.random(m) < nonzero_prob
    x_sharp = np.where(mask, rng.standard_normal(m), 0.0)
    radius = ball_factor * np.abs(x_sharp).sum()
    if not radius > 0:
        raise ValueError("l1-ball radius must be positive; the sampled signal is zero")
    C = rng.standard_normal((n, rows_per_agent, m))
    grams = np.einsum("nsm,nsk->nmk", C, C)
    C /= math.sqrt(max(np.linalg.eigvalsh(G)[-1] for G in grams))
    b = np.einsum("nsm,m->ns", C, x_sharp) + noise_std * stream(seed, "noise").standard_normal((n, rows_per_agent))
    low = min(np.linalg.eigvalsh(G)[0] for G in np.einsum("nsm,nsk->nmk", C, C))
    rho = max((mu_target - low) / (1.0 - low), 0.0)
    eye = np.broadcast_to(math.sqrt(rho) * np.eye(m), (n, m, m))
    C_aug = np.concatenate([math.sqrt(1 - rho) * C, eye], axis=1)
    b_aug = np.concatenate([math.sqrt(1 - rho) * b, np.zeros((n, m))], axis=1)
    inst = ProblemInstance(
        "least_squares", C_aug, b_aug, L=1.0, mu=min(mu_target, 1.0), h=Regularizer.l1_ball(radius),
        meta={"generator": "lasso", "seed": seed, "blend_rho": rho},
    )
    inst.L, inst.mu = estimate_constants(inst)
    return inst, x_sharp


def generate_quadratic_instance(seed, n=5, m=30, L=1.0, mu=0.1, phi=0.0, offset_scale=1.0):
    """Least squares whose every local Hessian has spectrum spanning exactly [mu, L].

    ``f_i(x) = 0.5 ||b_i - C_i x||^2`` with ``C_i = diag(sqrt(eig_i)) Q_i^T``
    for random orthogonal ``Q_i``; h is ``phi ||x||_1`` (zero when ``phi == 0``).
    """
    rng = stream(seed, "data")
    C = np.empty((n, m, m))
    for i in range(n):
        Q, _ = np.linalg.qr(rng.standard_normal((m, m)))
        eig = np.concatenate([[mu, L], rng.uniform(mu, L, m - 2)]) if m >= 2 else np.array([L])
        C[i] = np.sqrt(eig)[:, None] * Q.T
    b = offset_scale * rng.standard_normal((n, m))
    h = Regularizer.l1(phi) if phi > 0 else Regularizer.zero()
    return ProblemInstance("least_squares", C, b, L=L, mu=mu, h=h, meta={"generator": "quadratic", "seed": seed})


def generate_logistic_data(seed, n=10, samples_per_agent=100, m=20, density=0.3, label_noise=0.1):
    """Gaussian features with labels from a sparse linear model (labels flipped w.p. ``label_noise``)."""
    rng = stream(seed, "data")
    w = np.where(rng.random(m) < density, rng.standard_normal(m), 0.0)
    M = rng.standard_normal((n, samples_per_agent, m))
    y = np.where(np.einsum("nsm,m->ns", M, w) >= 0, 1.0, -1.0)
    flip = stream(seed, "noise").random(y.shape) < label_noise
    return AgentDataset(M, np.where(flip, -y, y), meta={"generator": "logistic", "seed": seed})


def make_logistic_instance(dataset, mu=0.02, phi=0.001):
    """Sparse logistic regression ``f_i`` = mean logistic loss + mu/2||x||^2, h = phi ||x||_1."""
    if not np.all(np.isin(dataset.targets, (-1.0, 1.0))):
        raise ValueError("logistic labels must be in {-1, +1}")
    h = Regularizer.l1(phi) if phi > 0 else Regularizer.zero()
    inst = ProblemInstance(
        "logistic", np.asarray(dataset.features, float), np.asarray(dataset.targets, float),
        L=mu, mu=mu, h=h, l2=mu, meta=dict(dataset.meta),
    )
    inst.L, inst.mu = estimate_constants(inst)
    return inst


# -- CSV ingestion --------------------------------------------------------------


class CSVFormatError(ValueError):
    pass


def load_csv_partitioned(path, n, samples_total, shuffle_seed=None, standardize=True):
    """Read numeric rows (last column = label), keep ``samples_total`` of them and deal round-robin.

    A single non-numeric first line is treated as a header. Labels in {0, 1} are
    mapped to {-1, +1}. With ``shuffle_seed`` the rows are shuffled before the
    first ``samples_total`` are kept. Features are standardized per column over
    the retained rows.
    """
    if samples_total % n:
        raise CSVFormatError(f"samples_total={samples_total} is not divisible by n={n}")
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                rows.append([float(c) for c in rec])
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise CSVFormatError(f"{path}:{lineno}: non-numeric field in {rec!r}") from None
            if len(rows[-1]) != len(rows[0]):
                raise CSVFormatError(f"{path}:{lineno}: expected {len(rows[0])} fields, got {len(rows[-1])}")
    data = np.asarray(rows, dtype=float)
    if len(data) < samples_total:
        raise CSVFormatError(f"{path}: only {len(data)} rows, {samples_total} requested")
    if shuffle_seed is not None:
        data = data[stream(shuffle_seed, "data").permutation(len(data))]
    data = data[:samples_total]
    X, y = data[:, :-1], data[:, -1]
    labels = set(np.unique(y).tolist())
    if labels <= {0.0, 1.0}:
        y = 2.0 * y - 1.0
    elif not labels <= {-1.0, 1.0}:
        raise CSVFormatError(f"{path}: labels must be in {{0,1}} or {{-1,+1}}, got {sorted(labels)}")
    if standardize:
        sd = X.std(axis=0)
        X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    k = samples_total // n
    # row r goes to agent r mod n
    feats = X.reshape(k, n, -1).transpose(1, 0, 2)
    targs = y.reshape(k, n).T
    return AgentDataset(
        np.ascontiguousarray(feats), np.ascontiguousarray(targs),
        meta={"source": str(path), "samples_total": samples_total, "shuffle_seed": shuffle_seed, "standardized": standardize},
    )
