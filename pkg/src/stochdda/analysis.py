"""Closed-form convergence machinery for DDA: the 2x2 consensus dynamics matrix,
its spectral scalars, step-size conditions, the conservative step bound and the
bound constants, plus per-round margin checks over run traces.

Notation: ``a`` base step, ``L``/``mu`` smoothness and strong convexity,
``beta`` the network contraction factor, ``n`` the number of agents.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .algorithms.centralized import gradient_spread, sigma_squared  # noqa: F401  (re-exported)


class PreconditionError(ValueError):
    """Inputs outside the region where the analysis applies (e.g. beta >= 1)."""


def _validate(a, L, mu, beta, allow_zero_a=True):
    if a < 0 or (a == 0 and not allow_zero_a):
        raise PreconditionError(f"step must be positive, got a={a}")
    if mu < 0 or L < mu:
        raise PreconditionError(f"need L >= mu >= 0, got L={L}, mu={mu}")
    if a * mu >= 1:
        raise PreconditionError(f"need a*mu < 1, got {a * mu}")
    if not 0 <= beta:
        raise PreconditionError(f"beta must be nonnegative, got {beta}")


def matrix_M(a, L, mu, beta):
    _validate(a, L, mu, beta)
    r = 1.0 - a * mu
    return np.array([
        [beta, beta],
        [a * (L + mu) / r * (beta + 1.0 / r), (beta + a * beta * (L + mu)) / r],
    ])


class Eigen(NamedTuple):
    xi1: float
    xi2: float
    lam1: float
    lam2: float


def eigen_closed_form(a, L, mu, beta):
    """``lambda_{1,2} = (xi1 +/- xi2) / 2``, the eigenvalues of :func:`matrix_M`."""
    _validate(a, L, mu, beta)
    r = 1.0 - a * mu
    xi1 = beta * (2.0 + a * L) / r
    xi2 = math.sqrt(a * a * beta * beta * L * L + 4.0 * a * beta * (beta + 1.0) * (L + mu)) / r
    return Eigen(xi1, xi2, 0.5 * (xi1 + xi2), 0.5 * (xi1 - xi2))


def char_poly(lam, a, L, mu, beta):
    r = 1.0 - a * mu
    return lam * lam - beta * (2.0 + a * L) / r * lam + beta * beta / r - a * beta * (L + mu) / (r * r)


def nu_of(a, L, mu, beta):
    return eigen_closed_form(a, L, mu, beta).lam1 * math.sqrt(1.0 - a * mu)


def nu_eta_theta(a, L, mu, beta):
    """``nu = rho(M) sqrt(1 - a mu)``, ``eta = (1 - a mu)(1 - nu)^2``, ``theta = (1 - a mu)(1 - nu^2)``.

    ``1 - nu`` is clamped at zero before squaring, so ``eta`` is 0 rather than
    a spurious positive value once ``nu >= 1``; ``theta`` keeps its sign.
    """
    nu = nu_of(a, L, mu, beta)
    r = 1.0 - a * mu
    gap = max(1.0 - nu, 0.0)
    return nu, r * gap * gap, r * (1.0 - nu * nu)


class Conditions(NamedTuple):
    cond16: bool
    gamma: float
    cond19: bool
    cond27: bool


def cond16_bound(L, mu, beta):
    """Right-hand side ``beta (2L + 3mu)/(1 - beta)^2 + mu`` that ``1/a`` must exceed."""
    if beta >= 1:
        return math.inf
    return beta * (2 * L + 3 * mu) / (1 - beta) ** 2 + mu


def gamma_of(a, L, mu, beta):
    """Margin ``1/a - 2L + mu - (4L - 2mu)/eta``; ``-inf`` when the consensus condition fails."""
    inv_a = math.inf if a == 0 else 1.0 / a
    if not inv_a > cond16_bound(L, mu, beta):
        return -math.inf
    _, eta, _ = nu_eta_theta(a, L, mu, beta)
    if eta <= 0:
        return -math.inf
    if a == 0:
        return math.inf
    return inv_a - 2 * L + mu - (4 * L - 2 * mu) / eta


def check_conditions(a, L, mu, beta):
    _validate(a, L, mu, beta)
    inv_a = math.inf if a == 0 else 1.0 / a
    c16 = beta < 1 and inv_a > cond16_bound(L, mu, beta)
    gamma = gamma_of(a, L, mu, beta)
    c27 = False
    if beta < 1:
        nu = nu_of(a, L, mu, beta)
        if nu < 1:
            c27 = inv_a > 2 * L * max(beta / (1 - beta) ** 2, 1 + 6 / (1 - nu) ** 2)
    return Conditions(bool(c16), gamma, bool(c16 and gamma > 0), bool(c27))


# -- step-size bound -----------------------------------------------------------


SAFETY = 0.99


def _bisect_largest(feasible, hi, iters=200):
    """Largest a in (0, hi) with ``feasible(a)``, assuming feasibility is downward closed."""
    lo = 0.0
    if feasible(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _feasible(a, L, mu, beta, require_cond27=False):
    if a * mu >= 1:
        return False
    c = check_conditions(a, L, mu, beta)
    return c.cond16 and c.cond19 and (c.cond27 or not require_cond27)


def _bisection_cap(L, mu, beta):
    caps = [1.0 / (2 * L - mu)]  # 1/a - 2L + mu <= 0 beyond this, so gamma < 0
    b16 = cond16_bound(L, mu, beta)
    if b16 > 0:
        caps.append(1.0 / b16)
    if mu > 0:
        caps.append(1.0 / mu)
    return min(caps)


def abar_terms(L, mu, beta):
    """Terms of the conservative step bound and which branch produced ``abar``.

    With ``mu > 0`` the bound is the minimum of ``1/(2mu)``, ``1/(beta(2L+3mu)/(1-beta)^2 + mu)``
    and ``q^2/((2L - mu)(4 + q^2))`` where ``q = 1 - nu(1/(2mu))``. When ``q <= 0``
    the third term does not exist; ``abar`` then comes from bisection on the
    two conditions, scaled by :data:`SAFETY`. With ``mu = 0`` bisection is used directly.
    """
    if not L > 0:
        raise PreconditionError(f"L must be positive, got {L}")
    if not 0 <= mu <= L:
        raise PreconditionError(f"need L >= mu >= 0, got L={L}, mu={mu}")
    if not 0 <= beta < 1:
        raise PreconditionError(f"step bound undefined for beta={beta} (network not contracting)")

    def feasible(a):
        return _feasible(a, L, mu, beta)

    out = {"t1": math.nan, "t2": math.nan, "t3": math.nan, "q": math.nan}
    if mu > 0:
        t1 = 1.0 / (2 * mu)
        t2 = 1.0 / cond16_bound(L, mu, beta)
        kappa = L / mu
        with np.errstate(over="ignore"):
            q = 1.0 - beta * (math.sqrt(2) + kappa / (2 * math.sqrt(2))) - math.sqrt(
                float(np.float64(beta * kappa) ** 2 / 8 + beta * (beta + 1) * (1 + kappa))
            )
        out.update(t1=t1, t2=t2, q=q)
        if q > 0:
            t3 = q * q / ((2 * L - mu) * (4 + q * q))
            out.update(t3=t3, abar=min(t1, t2, t3), branch="closed_form")
            return out
        a_max = _bisect_largest(feasible, _bisection_cap(L, mu, beta))
        out.update(abar=SAFETY * a_max, branch="bisection", a_max=a_max)
        return out
    a_max = _bisect_largest(feasible, _bisection_cap(L, mu, beta))
    out.update(abar=SAFETY * a_max, branch="bisection_mu0", a_max=a_max)
    return out


def estimate_abar(L, mu, beta):
    return abar_terms(L, mu, beta)["abar"]


def max_feasible_step(L, mu, beta, require_cond27=False):
    """Largest step (times :data:`SAFETY`) meeting both conditions, optionally also the h = 0, mu = 0 one."""
    if not 0 <= beta < 1:
        raise PreconditionError(f"beta={beta} >= 1")

    def feasible(a):
        return _feasible(a, L, mu, beta, require_cond27)

    return SAFETY * _bisect_largest(feasible, _bisection_cap(L, mu, beta))


# -- constants -------------------------------------------------------------------


def constants_CD(a, L, mu, beta, n, sigma2, d_xstar):
    cond = check_conditions(a, L, mu, beta)
    if not (cond.cond16 and cond.cond19):
        raise PreconditionError(f"step conditions fail at a={a}: {cond}")
    _, eta, theta = nu_eta_theta(a, L, mu, beta)
    C = d_xstar + a * (2 * L - mu) * sigma2 / (n * theta * (L + mu) ** 2)
    D = 4 * n * C / (eta * cond.gamma) + 2 * a * sigma2 / (theta * (L + mu) ** 2)
    return C, D


def rse(trace, x_star=None):
    """``sum_i ||x_i^t - x*||^2 / sum_i ||x_i^0 - x*||^2`` for every stored round.

    Accepts an iterate history of shape (T+1, n, m), a trace with a stored
    history, or a trace whose ``sq_dist`` column was recorded against x*.
    """
    if isinstance(trace, np.ndarray):
        hist = trace
    elif getattr(trace, "x_history", None) is not None and x_star is not None:
        hist = trace.x_history
    else:
        sq = np.asarray(trace["sq_dist"], dtype=float)
        if not sq[0] > 0:
            raise ValueError("RSE undefined: every agent starts at the reference point")
        return sq / sq[0]
    diff = hist - np.asarray(x_star)
    sq = np.sum(diff * diff, axis=(1, 2))
    if not sq[0] > 0:
        raise ValueError("RSE undefined: every agent starts at the reference point")
    return sq / sq[0]


# -- report ---------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass
class AnalysisReport:
    a: float
    L: float
    mu: float
    beta: float
    n: int
    M: np.ndarray | None = None
    xi1: float = math.nan
    xi2: float = math.nan
    lam1: float = math.nan
    lam2: float = math.nan
    nu: float = math.nan
    one_minus_nu_raw: float = math.nan
    one_minus_nu_clamped: float = math.nan
    eta: float = math.nan
    theta: float = math.nan
    gamma: float = -math.inf
    cond16: bool = False
    cond19: bool = False
    cond27: bool = False
    abar: float = math.nan
    abar_branch: str = "undefined"
    abar_terms: dict = field(default_factory=dict)
    a_grid: list = field(default_factory=list)
    sigma2: float | None = None
    d_xstar: float | None = None
    reference_tol: float | None = None
    C: float | None = None
    D: float | None = None
    notes: list = field(default_factory=list)

    @property
    def feasible(self):
        return self.cond16 and self.cond19

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_text(self):
        lines = []
        for k, v in self.to_dict().items():
            if isinstance(v, dict):
                for kk, vv in v.items():
                    lines.append(f"{k}.{kk}: {vv}")
            else:
                lines.append(f"{k}: {v}")
        return "\n".join(lines) + "\n"


def build_report(a, L, mu, beta, n, sigma2=None, d_xstar=None, reference_tol=None):
    """Evaluate every analysis quantity at ``(a, L, mu, beta, n)``.

    ``a=None`` evaluates at half the step bound. Failing conditions are
    recorded in the report rather than raised; C and D need both conditions
    plus ``sigma2`` and ``d_xstar``.
    """
    rep = AnalysisReport(a=math.nan if a is None else a, L=L, mu=mu, beta=beta, n=n,
                         sigma2=sigma2, d_xstar=d_xstar, reference_tol=reference_tol)
    if beta >= 1:
        rep.notes.append("beta >= 1: the network does not contract; step bound undefined")
        return rep
    terms = abar_terms(L, mu, beta)
    rep.abar, rep.abar_branch = terms["abar"], terms["branch"]
    rep.abar_terms = {k: v for k, v in terms.items() if k not in ("abar", "branch")}
    rep.a_grid = [f * rep.abar for f in (0.1, 0.5, 0.9)]
    if a is None:
        a = rep.a = 0.5 * rep.abar
    rep.M = matrix_M(a, L, mu, beta)
    e = eigen_closed_form(a, L, mu, beta)
    rep.xi1, rep.xi2, rep.lam1, rep.lam2 = e
    rep.nu, rep.eta, rep.theta = nu_eta_theta(a, L, mu, beta)
    rep.one_minus_nu_raw = 1.0 - rep.nu
    rep.one_minus_nu_clamped = max(rep.one_minus_nu_raw, 0.0)
    c = check_conditions(a, L, mu, beta)
    rep.cond16, rep.gamma, rep.cond19, rep.cond27 = c
    if not rep.feasible:
        rep.notes.append("step conditions fail at this a; C and D not defined")
    elif sigma2 is not None and d_xstar is not None:
        rep.C, rep.D = constants_CD(a, L, mu, beta, n, sigma2, d_xstar)
    return rep


# -- bound checks over traces -----------------------------------------------------


@dataclass
class BoundCheck:
    mode: str
    margins: dict  # name -> per-round margin array (NaN where undefined)
    t: np.ndarray

    def min_margin(self, name, t_min=1):
        m = self.margins[name][self.t >= t_min]
        m = m[~np.isnan(m)]
        return float(m.min()) if m.size else math.nan

    def violations(self, tol=1e-9, t_min=1):
        out = {}
        for name, m in self.margins.items():
            sel = m[self.t >= t_min]
            out[name] = int(np.sum(sel[~np.isnan(sel)] < -tol))
        return out


def bound_check(trace, report, mode, instance=None):
    """Per-round margins ``bound - observed`` (nonnegative when the bound holds).

    * ``theorem2``: ``C/A_t - (F(ytilde) - F*)`` and ``D/A_t - max_i ||xtilde_i - ytilde||^2``.
    * ``corollary1`` (mu > 0): ``(2/a)(2C/mu + D)(1 - a mu)^t - max_i ||xtilde_i - x*||^2``.
    * ``corollary2`` (mu = 0): the ``C/(a t)`` and ``D/(a t)`` forms, and, when
      ``instance`` has h = 0 and d centred at the origin and the h = 0 condition
      holds, ``(1/t)(n ||x*||^2/(2a) + 6 sigma^2/(L(1 - nu^2))) - max_i (F(xtilde_i) - F*)``.
    """
    t = trace["t"]
    a, mu = report.a, report.mu
    if report.C is None or report.D is None:
        raise PreconditionError("report carries no C/D (conditions failed or reference data missing)")
    C, D = report.C, report.D
    margins = {}
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_A = np.exp(-np.asarray(trace["log_A"], dtype=float))
        if mode == "theorem2":
            margins["thm2_objective"] = C * inv_A - trace["obj_gap_ybar"]
            margins["thm2_deviation"] = D * inv_A - trace["dev_xtilde_ytilde"]
        elif mode == "corollary1":
            if not mu > 0:
                raise PreconditionError("corollary1 needs mu > 0")
            log_env = math.log(2.0 / a * (2 * C / mu + D)) + t * math.log1p(-a * mu)
            margins["cor1_distance"] = np.exp(log_env) - trace["dev_xtilde_xstar"]
        elif mode == "corollary2":
            if mu != 0:
                raise PreconditionError("corollary2 applies to mu = 0")
            at = a * t
            margins["cor2_objective"] = C / at - trace["obj_gap_ybar"]
            margins["cor2_deviation"] = D / at - trace["dev_xtilde_ytilde"]
            if instance is not None:
                if instance.h.kind != "zero" or not instance.d.is_origin:
                    raise PreconditionError("the local-objective form needs h = 0 and d centred at the origin")
                if not report.cond27:
                    raise PreconditionError("the local-objective form needs the h = 0 step condition")
                # ||x*||^2 = 2 d(x*) because d is centred at the origin
                K = report.n * 2 * report.d_xstar / (2 * a) + 6 * report.sigma2 / (report.L * (1 - report.nu ** 2))
                margins["cor2_local_objective"] = K / t - trace["gap_xtilde_max"]
        else:
            raise ValueError(f"unknown bound mode {mode!r}")
    for m in margins.values():
        m[t == 0] = np.nan
    return BoundCheck(mode, margins, t)
