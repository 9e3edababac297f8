"""Experiment configuration: nested JSON documents mapped onto dataclasses.

A config fully determines a run. All randomness derives from ``seed`` through
named streams; file references (CSV data, edge lists, fixed matrices) are
resolved relative to the directory holding the config file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import Bernoulli, Gossip, Graph, TimeInvariant
from .problems import (
    generate_lasso_instance,
    generate_logistic_data,
    generate_quadratic_instance,
    load_csv_partitioned,
    make_logistic_instance,
)
from .streams import stream

ALGORITHMS = ("dda", "pg_extra", "p2d2", "dsm", "cdda")


class ConfigError(ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class ProblemSpec:
    family: str = "logistic"  # logistic | lasso | quadratic
    n: int = 10
    m: int = 20
    samples_per_agent: int = 100  # logistic generator
    rows_per_agent: int = 60  # lasso generator
    density: float = 0.3
    label_noise: float = 0.1
    nonzero_prob: float = 0.25
    noise_std: float = 0.01
    ball_factor: float = 1.1
    mu: float = 0.02  # l2 weight (logistic), target modulus (lasso, quadratic)
    L: float = 1.0  # quadratic generator only
    phi: float = 0.0
    data_path: str | None = None  # CSV; replaces the logistic generator
    samples_total: int | None = None
    shuffle: bool = False
    standardize: bool = True


@dataclass
class GraphSpec:
    type: str = "cycle"  # cycle | complete | grid | erdos_renyi | file
    n: int | None = None  # defaults to problem.n
    rows: int | None = None
    cols: int | None = None
    xi: float | None = None
    path: str | None = None


@dataclass
class NetworkSpec:
    kind: str = "gossip"  # gossip | bernoulli | time_invariant
    graph: GraphSpec = field(default_factory=GraphSpec)
    law: str = "neighbor"
    iota: float = 0.5
    matrix_path: str | None = None
    beta_mode: str = "exact"  # exact | monte_carlo
    beta_samples: int = 10_000


@dataclass
class AlgorithmSpec:
    name: str = "dda"
    a: float | None = None  # explicit step; overrides a_factor
    a_factor: float | None = None  # dda: fraction of the step bound; pg_extra/p2d2: fraction of 1/L
    alpha: float = 0.5
    step_rule: str = "inv_sqrt"  # dsm/cdda: inv_sqrt | constant
    step_value: float | None = None
    T: int | None = None  # defaults to the experiment T


@dataclass
class MonitorSpec:
    conservation: bool = True
    lemma5: bool = True
    bounds: bool = True


@dataclass
class ReferenceSpec:
    tol: float = 1e-14
    max_iter: int = 1_000_000
    cache_dir: str | None = None


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    algorithms: list = field(default_factory=lambda: [AlgorithmSpec()])
    T: int = 1000
    seed: int = 0
    out: str = "runs/default"
    monitors: MonitorSpec = field(default_factory=MonitorSpec)
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    base_dir: str = field(default=".", compare=False, repr=False)

    # -- (de)serialization -------------------------------------------------------

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    @classmethod
    def from_dict(cls, data, base_dir="."):
        cfg = _build(cls, data, "", skip=("base_dir",))
        cfg.base_dir = str(base_dir)
        cfg.validate()
        return cfg

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(str(path), f"invalid JSON at line {e.lineno}: {e.msg}") from None
        except OSError as e:
            raise ConfigError(str(path), f"cannot read config: {e.strerror}") from None
        return cls.from_dict(data, base_dir=path.parent)

    def resolve(self, rel):
        p = Path(rel)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def config_hash(self):
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def problem_hash(self):
        payload = {"problem": dataclasses.asdict(self.problem), "seed": self.seed}
        if self.problem.data_path:
            payload["data_sha256"] = hashlib.sha256(self.resolve(self.problem.data_path).read_bytes()).hexdigest()
        payload["reference"] = {"tol": self.reference.tol, "max_iter": self.reference.max_iter}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    # -- validation ----------------------------------------------------------------

    def validate(self):
        p, nw = self.problem, self.network
        _choice("problem.family", p.family, ("logistic", "lasso", "quadratic"))
        _positive_int("problem.n", p.n)
        _positive_int("problem.m", p.m)
        if p.mu < 0:
            raise ConfigError("problem.mu", f"must be >= 0, got {p.mu}")
        if p.phi < 0:
            raise ConfigError("problem.phi", f"must be >= 0, got {p.phi}")
        if p.family == "quadratic" and not p.L >= p.mu:
            raise ConfigError("problem.L", f"must be >= mu ({p.mu}), got {p.L}")
        if p.data_path is not None:
            if p.family != "logistic":
                raise ConfigError("problem.data_path", "CSV data is only supported for the logistic family")
            if p.samples_total is None:
                raise ConfigError("problem.samples_total", "required with data_path")
            if p.samples_total % p.n:
                raise ConfigError("problem.samples_total", f"{p.samples_total} is not divisible by n={p.n}")
        _choice("network.kind", nw.kind, ("gossip", "bernoulli", "time_invariant"))
        _choice("network.graph.type", nw.graph.type, ("cycle", "complete", "grid", "erdos_renyi", "file"))
        _choice("network.law", nw.law, ("neighbor", "uniform"))
        _choice("network.beta_mode", nw.beta_mode, ("exact", "monte_carlo"))
        if not 0 <= nw.iota <= 1:
            raise ConfigError("network.iota", f"must lie in [0, 1], got {nw.iota}")
        if nw.graph.type == "grid" and (nw.graph.rows is None or nw.graph.cols is None):
            raise ConfigError("network.graph", "grid needs rows and cols")
        if nw.graph.type == "erdos_renyi" and nw.graph.xi is None:
            raise ConfigError("network.graph.xi", "erdos_renyi needs xi")
        if nw.graph.type == "file" and not nw.graph.path:
            raise ConfigError("network.graph.path", "file graph needs a path")
        if self.T < 0:
            raise ConfigError("T", f"must be >= 0, got {self.T}")
        if not self.algorithms:
            raise ConfigError("algorithms", "at least one algorithm is required")
        for k, alg in enumerate(self.algorithms):
            where = f"algorithms[{k}]"
            _choice(f"{where}.name", alg.name, ALGORITHMS)
            _choice(f"{where}.step_rule", alg.step_rule, ("inv_sqrt", "constant"))
            if alg.a is not None and not alg.a > 0:
                raise ConfigError(f"{where}.a", f"must be positive, got {alg.a}")
            if alg.a_factor is not None and not alg.a_factor > 0:
                raise ConfigError(f"{where}.a_factor", f"must be positive, got {alg.a_factor}")
            if alg.name == "dda" and alg.a is not None and alg.a * p.mu >= 1:
                raise ConfigError(f"{where}.a", f"need a * mu < 1, got {alg.a * p.mu}")
            if alg.name == "p2d2" and not 0 < alg.alpha <= 1:
                raise ConfigError(f"{where}.alpha", f"must lie in (0, 1], got {alg.alpha}")
            if alg.step_rule == "constant" and not (alg.step_value or 0) > 0:
                raise ConfigError(f"{where}.step_value", "constant step rule needs a positive step_value")
            if alg.name == "dsm" and p.family == "lasso":
                raise ConfigError(f"{where}.name", "DSM inapplicable: the lasso problem is constrained")
            if alg.T is not None and alg.T < 0:
                raise ConfigError(f"{where}.T", f"must be >= 0, got {alg.T}")

    # -- builders --------------------------------------------------------------------

    def build_problem(self):
        p = self.problem
        if p.family == "logistic":
            if p.data_path:
                ds = load_csv_partitioned(
                    self.resolve(p.data_path), p.n, p.samples_total,
                    shuffle_seed=self.seed if p.shuffle else None, standardize=p.standardize,
                )
            else:
                ds = generate_logistic_data(self.seed, p.n, p.samples_per_agent, p.m, p.density, p.label_noise)
            return make_logistic_instance(ds, mu=p.mu, phi=p.phi)
        if p.family == "lasso":
            inst, _ = generate_lasso_instance(
                self.seed, p.n, p.rows_per_agent, p.m, p.nonzero_prob, p.noise_std, p.ball_factor, p.mu
            )
            return inst
        return generate_quadratic_instance(self.seed, p.n, p.m, p.L, p.mu, p.phi)

    def build_graph(self):
        g = self.network.graph
        n = g.n if g.n is not None else self.problem.n
        if g.type == "cycle":
            return Graph.cycle(n)
        if g.type == "complete":
            return Graph.complete(n)
        if g.type == "grid":
            return Graph.grid(g.rows, g.cols)
        if g.type == "erdos_renyi":
            return Graph.erdos_renyi(n, g.xi, stream(self.seed, "graph"))
        path = self.resolve(g.path)
        if not path.exists():
            raise ConfigError("network.graph.path", f"no such file: {path}")
        return Graph.read_edge_list(path, n)

    def build_network(self):
        nw = self.network
        if nw.kind == "time_invariant" and nw.matrix_path:
            path = self.resolve(nw.matrix_path)
            if not path.exists():
                raise ConfigError("network.matrix_path", f"no such file: {path}")
            P = np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=2)
            try:
                return TimeInvariant(P)
            except ValueError as e:
                raise ConfigError("network.matrix_path", str(e)) from None
        graph = self.build_graph()
        if graph.n != self.problem.n:
            raise ConfigError("network.graph", f"graph has {graph.n} nodes, problem has n={self.problem.n}")
        try:
            if nw.kind == "gossip":
                return Gossip(graph, nw.law)
            if nw.kind == "bernoulli":
                return Bernoulli(graph, nw.iota)
            return TimeInvariant.metropolis(graph)
        except ValueError as e:
            raise ConfigError("network", str(e)) from None


def _choice(path, value, allowed):
    if value not in allowed:
        raise ConfigError(path, f"expected one of {list(allowed)}, got {value!r}")


def _positive_int(path, value):
    if not isinstance(value, int) or value < 1:
        raise ConfigError(path, f"must be a positive integer, got {value!r}")


_NESTED = {
    ("ExperimentConfig", "problem"): ProblemSpec,
    ("ExperimentConfig", "network"): NetworkSpec,
    ("ExperimentConfig", "monitors"): MonitorSpec,
    ("ExperimentConfig", "reference"): ReferenceSpec,
    ("NetworkSpec", "graph"): GraphSpec,
}


def _build(cls, data, path, skip=()):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", f"expected an object, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls) if f.name not in skip}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(path or "<root>", f"unknown field(s) {unknown}; allowed: {sorted(names)}")
    kwargs = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        sub = _NESTED.get((cls.__name__, key))
        if sub is not None:
            kwargs[key] = _build(sub, value, where)
        elif cls is ExperimentConfig and key == "algorithms":
            if not isinstance(value, list):
                raise ConfigError(where, "expected a list of algorithm objects")
            kwargs[key] = [
                _build(AlgorithmSpec, {"name": v} if isinstance(v, str) else v, f"{where}[{i}]")
                for i, v in enumerate(value)
            ]
        else:
            kwargs[key] = _coerce(value, names[key], where)
    return cls(**kwargs)


def _coerce(value, f, where):
    default = f.default if f.default is not dataclasses.MISSING else None
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(where, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int) or f.name in ("T", "n", "samples_total", "rows", "cols", "seed", "beta_samples", "max_iter"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(where, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or f.name in ("a", "a_factor", "xi", "step_value", "tol"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(where, f"expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(where, f"expected a string, got {value!r}")
    return value
