"""Stochastic communication models and the contraction factor of their mixing matrices.

A mixing model produces one doubly stochastic ``n x n`` matrix per round. Three
models are provided:

* :class:`TimeInvariant` -- the same matrix every round;
* :class:`Gossip` -- a single link of a base graph averages its endpoints;
* :class:`Bernoulli` -- every base edge is independently active with probability
  ``iota`` and the active subgraph gets Metropolis weights.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DS_TOL = 1e-12


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        canon = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(canon))

    @property
    def edge_list(self):
        return sorted(self.edges)

    def neighbors(self, i):
        return sorted({j for a, b in self.edges for j in (a, b) if i in (a, b) and j != i})

    def degrees(self):
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self):
        A = np.zeros((self.n, self.n))
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1.0
        return A

    def is_connected(self):
        if self.n <= 1:
            return True
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            for j in adj[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.n

    # -- generators ----------------------------------------------------------

    @classmethod
    def cycle(cls, n):
        if n < 2:
            raise ValueError("a cycle needs at least 2 nodes")
        return cls(n, frozenset((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def complete(cls, n):
        return cls(n, frozenset(itertools.combinations(range(n), 2)))

    @classmethod
    def grid(cls, rows, cols):
        edges = set()
        for r in range(rows):
            for c in range(cols):
                k = r * cols + c
                if c + 1 < cols:
                    edges.add((k, k + 1))
                if r + 1 < rows:
                    edges.add((k, k + cols))
        return cls(rows * cols, frozenset(edges))

    @classmethod
    def erdos_renyi(cls, n, xi, rng, max_tries=1000):
        """Connected random graph with ``round(xi * n(n-1)/2)`` edges chosen uniformly.

        ``xi`` is the ratio between the edge count and that of the complete graph.
        Draws are repeated until the graph is connected.
        """
        pairs = list(itertools.combinations(range(n), 2))
        k = int(round(xi * len(pairs)))
        if k < n - 1:
            raise ValueError(f"sparsity {xi} gives {k} edges, too few to connect {n} nodes")
        for _ in range(max_tries):
            idx = rng.choice(len(pairs), size=k, replace=False)
            g = cls(n, frozenset(pairs[t] for t in idx))
            if g.is_connected():
                return g
        raise RuntimeError(f"no connected graph found after {max_tries} draws")

    # -- edge-list files -------------------------------------------------------

    @classmethod
    def read_edge_list(cls, path, n=None):
        edges = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i j', got {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
        if n is None:
            n = 1 + max(max(e) for e in edges) if edges else 0
        return cls(n, frozenset(edges))

    def write_edge_list(self, path):
        Path(path).write_text("".join(f"{i} {j}\n" for i, j in self.edge_list))


def gossip_matrix(i, j, n):
    """``I - 0.5 (e_i - e_j)(e_i - e_j)^T``: nodes i and j average, everyone else holds."""
    if i == j:
        raise ValueError("gossip pair must be two distinct nodes")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"nodes ({i}, {j}) out of range for n={n}")
    P = np.eye(n)
    P[i, i] = P[j, j] = 0.5
    P[i, j] = P[j, i] = 0.5
    return P


def metropolis_matrix(n, edges):
    """Metropolis-Hastings weights ``1 / (1 + max(deg_i, deg_j))`` on ``edges``."""
    deg = np.zeros(n, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    P = np.zeros((n, n))
    for i, j in edges:
        P[i, j] = P[j, i] = 1.0 / (1 + max(deg[i], deg[j]))
    P[np.diag_indices(n)] = 1.0 - P.sum(axis=1)
    return P


@dataclass
class DoublyStochasticReport:
    ok: bool
    max_row_violation: float
    max_col_violation: float
    min_entry: float
    max_entry: float

    def __bool__(self):
        return self.ok


def validate_doubly_stochastic(P, tol=DS_TOL):
    """Check row/column sums against 1 and entries against [0, 1]; symmetry is not assumed."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {P.shape}")
    row = float(np.max(np.abs(P.sum(axis=1) - 1.0)))
    col = float(np.max(np.abs(P.sum(axis=0) - 1.0)))
    lo, hi = float(P.min()), float(P.max())
    ok = row <= tol and col <= tol and lo >= -tol and hi <= 1 + tol
    return DoublyStochasticReport(ok, row, col, lo, hi)


# -- mixing models ------------------------------------------------------------


@dataclass(frozen=True)
class TimeInvariant:
    P: np.ndarray
    kind = "time_invariant"

    def __post_init__(self):
        rep = validate_doubly_stochastic(self.P)
        if not rep:
            raise ValueError(f"matrix is not doubly stochastic: {rep}")

    @property
    def n(self):
        return self.P.shape[0]

    def sample(self, rng):
        return self.P

    def outcomes(self):
        return [(1.0, self.P)]

    @classmethod
    def metropolis(cls, graph):
        return cls(metropolis_matrix(graph.n, graph.edge_list))


@dataclass(frozen=True)
class Gossip:
    """Randomized gossip over ``graph``.

    ``law="neighbor"``: a node u is woken uniformly and picks each neighbour
    with probability ``1/(deg_u + 1)``, so link (i, j) fires with probability
    ``1/(n(deg_i+1)) + 1/(n(deg_j+1))``; the leftover mass (u picking itself)
    is an identity round. ``law="uniform"``: one edge uniformly at random.
    """

    graph: Graph
    law: str = "neighbor"
    kind = "gossip"

    def __post_init__(self):
        if not self.graph.edges:
            raise ValueError("gossip needs a base graph with at least one edge")
        if self.law not in ("neighbor", "uniform"):
            raise ValueError(f"unknown gossip law {self.law!r}")

    @property
    def n(self):
        return self.graph.n

    def edge_probabilities(self):
        edges = self.graph.edge_list
        if self.law == "uniform":
            return {e: 1.0 / len(edges) for e in edges}
        deg = self.graph.degrees()
        n = self.graph.n
        return {(i, j): 1.0 / (n * (deg[i] + 1)) + 1.0 / (n * (deg[j] + 1)) for i, j in edges}

    def sample_pair(self, rng):
        """The activated pair, or None for an identity round."""
        if self.law == "uniform":
            edges = self.graph.edge_list
            return edges[rng.integers(len(edges))]
        u = int(rng.integers(self.n))
        nbrs = _neighbor_table(self.graph)[u]
        k = int(rng.integers(len(nbrs) + 1))
        if k == len(nbrs):
            return None
        v = nbrs[k]
        return (min(u, v), max(u, v))

    def sample(self, rng):
        pair = self.sample_pair(rng)
        if pair is None:
            return np.eye(self.n)
        return gossip_matrix(pair[0], pair[1], self.n)

    def outcomes(self):
        probs = self.edge_probabilities()
        out = [(p, gossip_matrix(i, j, self.n)) for (i, j), p in probs.items()]
        rest = 1.0 - sum(probs.values())
        if rest > 1e-15:
            out.append((rest, np.eye(self.n)))
        return out


_NEIGHBOR_CACHE = {}


def _neighbor_table(graph):
    tbl = _NEIGHBOR_CACHE.get(graph)
    if tbl is None:
        tbl = [graph.neighbors(i) for i in range(graph.n)]
        _NEIGHBOR_CACHE[graph] = tbl
    return tbl


@dataclass(frozen=True)
class Bernoulli:
    graph: Graph
    iota: float
    kind = "bernoulli"

    # exact enumeration is 2^|E| outcomes
    MAX_EXACT_EDGES = 16

    def __post_init__(self):
        if not self.graph.edges:
            raise ValueError("bernoulli network needs a base graph with at least one edge")
        if not 0.0 <= self.iota <= 1.0:
            raise ValueError(f"activation probability must be in [0, 1], got {self.iota}")

    @property
    def n(self):
        return self.graph.n

    def sample(self, rng):
        edges = self.graph.edge_list
        keep = rng.random(len(edges)) < self.iota
        return metropolis_matrix(self.n, [e for e, k in zip(edges, keep) if k])

    def outcomes(self):
        edges = self.graph.edge_list
        if len(edges) > self.MAX_EXACT_EDGES:
            raise ValueError(
                f"exact enumeration needs <= {self.MAX_EXACT_EDGES} edges, graph has {len(edges)}"
            )
        out = []
        for mask in itertools.product((False, True), repeat=len(edges)):
            k = sum(mask)
            p = self.iota**k * (1 - self.iota) ** (len(edges) - k)
            if p > 0:
                out.append((p, metropolis_matrix(self.n, [e for e, m in zip(edges, mask) if m])))
        return out


def sample_round(model, rng):
    return model.sample(rng)


def beta_of_model(model, mode="exact", samples=10_000, rng=None):
    """``sqrt(rho(E[P^T P] - 11^T/n))`` by exact enumeration or Monte-Carlo averaging."""
    n = model.n
    second = np.zeros((n, n))
    if mode == "exact":
        for p, P in model.outcomes():
            second += p * (P.T @ P)
    elif mode == "monte_carlo":
        if samples < 100:
            raise ValueError(f"Monte-Carlo estimate needs at least 100 samples, got {samples}")
        rng = np.random.default_rng() if rng is None else rng
        for _ in range(samples):
            P = model.sample(rng)
            rep = validate_doubly_stochastic(P)
            if not rep:
                raise ValueError(f"sampled matrix is not doubly stochastic: {rep}")
            second += P.T @ P
        second /= samples
    else:
        raise ValueError(f"unknown mode {mode!r}")
    M = second - np.full((n, n), 1.0 / n)
    M = 0.5 * (M + M.T)
    eig = np.abs(np.linalg.eigvalsh(M))
    # rounding in E[P^T P] leaves eigenvalues of order eps; the square root would
    # blow those up to ~1e-8, so treat them as exact zeros
    rho = float(np.max(eig))
    if rho <= 64 * n * np.finfo(float).eps:
        rho = 0.0
    return float(np.sqrt(rho))
