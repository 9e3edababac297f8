"""Geometric weights ``a_t = a / (1 - a mu)^t`` and their running sum ``A_t``."""

from __future__ import annotations

import math
from dataclasses import dataclass

# rescale once a_t exceeds this; keeps a_t * ||s|| and A_t * mu far from overflow
RESCALE_AT = 1e100


class ScheduleOverflowError(OverflowError):
    def __init__(self, a, mu, t):
        self.safe_horizon = safe_horizon(a, mu)
        super().__init__(
            f"a_t overflows at round {t} (a={a}, mu={mu}); safe horizon is {self.safe_horizon} rounds"
        )


def safe_horizon(a, mu, limit=1e300):
    if mu == 0:
        return math.inf
    return int(math.log(limit / a) / -math.log1p(-a * mu))


def validate_step(a, mu):
    if not a > 0:
        raise ValueError(f"step a must be positive, got {a}")
    if mu > 0 and a * mu >= 1:
        raise ValueError(f"need a < 1/mu, got a*mu = {a * mu}")


@dataclass
class StepSchedule:
    """Incrementally maintained ``(a_t, A_t)``.

    When ``rescale`` is on, ``a_t`` and ``A_t`` are stored divided by
    ``exp(log_scale)``; users of the weights rescale their dual variables by
    the factor returned from :meth:`maybe_rescale` and weight ``d`` by
    :attr:`d_weight`. Ratios such as ``a_t / A_t`` are unaffected.
    """

    a: float
    mu: float = 0.0
    rescale: bool = True
    t: int = 0
    a_t: float = 0.0
    A_t: float = 0.0
    A_prev: float = 0.0
    log_scale: float = 0.0

    def __post_init__(self):
        validate_step(self.a, self.mu)
        self.a_t = self.a  # a_0 = a
        self._growth = 1.0 / (1.0 - self.a * self.mu)

    def advance(self):
        self.t += 1
        a_next = self.a_t * self._growth
        if not math.isfinite(a_next) or (not self.rescale and a_next > 1e300):
            raise ScheduleOverflowError(self.a, self.mu, self.t)
        self.a_t = a_next
        self.A_prev = self.A_t
        self.A_t = self.A_t + self.a_t
        return self

    def maybe_rescale(self):
        """Divide the stored weights by ``a_t`` if it has grown past the guard; returns the divisor (1.0 if none)."""
        if not self.rescale or self.a_t <= RESCALE_AT:
            return 1.0
        c = self.a_t
        self.a_t /= c
        self.A_t /= c
        self.A_prev /= c
        self.log_scale += math.log(c)
        return c

    @property
    def d_weight(self):
        return math.exp(-self.log_scale)

    @property
    def log_A(self):
        return math.log(self.A_t) + self.log_scale if self.A_t > 0 else -math.inf

    @property
    def ratio(self):
        """``a_t / A_t``, the weight of the newest term in a running weighted mean."""
        return self.a_t / self.A_t

    def identity_residuals(self):
        """Relative errors of ``(1 + mu A_t)/a_t = 1/a`` and ``(1 + mu A_{t-1})/a_t = (1 - a mu)/a``."""
        w = self.d_weight
        cur = (w + self.mu * self.A_t) / self.a_t * self.a - 1.0
        prev = (w + self.mu * self.A_prev) / self.a_t * self.a / (1.0 - self.a * self.mu) - 1.0
        return abs(cur), abs(prev)
