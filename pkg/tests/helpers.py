"""Small deterministic instances shared by several test modules."""

import numpy as np

from stochdda.problems import ProblemInstance, generate_logistic_data, make_logistic_instance
from stochdda.proximal import Regularizer


def identical_agents(n, m, seed=0, h=None, mu=0.2):
    """Least squares where every agent holds the same (C, b)."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(m, m)))
    eig = np.linspace(mu, 1.0, m)
    C = np.sqrt(eig)[:, None] * Q.T
    b = rng.normal(size=m)
    return ProblemInstance(
        "least_squares", np.broadcast_to(C, (n, m, m)).copy(), np.broadcast_to(b, (n, m)).copy(),
        L=1.0, mu=mu, h=h or Regularizer.zero(),
    )


def small_logistic(n=6, m=5, seed=0, mu=0.05, phi=0.01):
    return make_logistic_instance(generate_logistic_data(seed, n=n, samples_per_agent=25, m=m), mu=mu, phi=phi)


def gd_oracle(instance, a, T):
    """Plain (proximal-free) gradient descent on the average smooth part."""
    x = np.array(instance.x0, dtype=float)
    out = [x]
    for _ in range(T):
        x = x - a * instance.grad_f(x)
        out.append(x)
    return np.array(out)


class CountingModel:
    """Wraps a mixing model and logs every draw."""

    def __init__(self, model):
        self.model = model
        self.n = model.n
        self.kind = model.kind
        self.draws = []

    def sample(self, rng):
        P = self.model.sample(rng)
        self.draws.append(P)
        return P
