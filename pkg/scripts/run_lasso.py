"""Constrained least squares (l1-ball) over a Bernoulli network.

DSM is left out because its subgradient step has no projection onto the ball.

    python3 scripts/run_lasso.py --T 3000 --iota 0.5
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from stochdda.algorithms import run_cdda, run_dda, run_p2d2, run_pg_extra, solve_reference
from stochdda.analysis import estimate_abar
from stochdda.cli import log_slope, write_csv
from stochdda.network import Bernoulli, Graph, beta_of_model
from stochdda.problems import generate_lasso_instance
from stochdda.streams import stream


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--xi", type=float, default=0.3, help="Erdos-Renyi edge probability of the base graph")
    p.add_argument("--iota", type=float, default=0.5, help="per-round edge activation probability")
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--T", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--a-factor", type=float, default=0.9)
    p.add_argument("--out", default="runs/lasso")
    p.add_argument("--plot", action="store_true")
    args = p.parse_args(argv)

    inst, x_sharp = generate_lasso_instance(args.seed, n=args.n, m=args.m, mu_target=args.mu)
    graph = Graph.erdos_renyi(args.n, args.xi, stream(args.seed, "graph"))
    model = Bernoulli(graph, args.iota)
    beta = beta_of_model(model, "monte_carlo", samples=20_000, rng=stream(args.seed, "beta"))
    abar = estimate_abar(inst.L, inst.mu, beta)
    ref = solve_reference(inst)
    print(f"beta~{beta:.4f} abar={abar:.3e} |E|={len(graph.edge_list)} ||x*-x#||={np.linalg.norm(ref.x_star - x_sharp):.3e}")

    kw = dict(seed=args.seed, x_star=ref.x_star, F_star=ref.F_star)
    traces = {"dda": run_dda(inst, model, args.a_factor * abar, args.T, monitors=False, **kw)}
    traces["cdda"] = run_cdda(inst, model, args.T, **kw)
    with np.errstate(all="ignore"):
        for name, fn in (("pg_extra", run_pg_extra), ("p2d2", run_p2d2)):
            try:
                traces[name] = fn(inst, model, 0.5 / inst.L, args.T, **kw)
            except FloatingPointError as e:
                print(f"  {name}: stopped ({e})")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, tr in traces.items():
        write_csv(out / f"{name}.csv", tr, {})
        print(f"  {name:9s} RSE(T)={tr['rse'][-1]:.3e} slope={log_slope(tr['rse'], tr['t']):.3e}")
    if args.plot:
        from plot_traces import plot_dir

        print("plot:", plot_dir(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
