"""Logistic regression over randomized gossip: DDA against the decentralized baselines.

Runs every algorithm on the same seeded network draws and prints the final RSE
and the log10-RSE slope. With ``--plot`` an SVG of RSE against rounds is written.

    python3 scripts/run_logistic.py --T 5000 --seeds 0 1 2
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from stochdda.algorithms import run_cdda, run_dda, run_dsm, run_p2d2, run_pg_extra, solve_reference
from stochdda.analysis import estimate_abar
from stochdda.cli import log_slope, write_csv
from stochdda.network import Gossip, Graph, TimeInvariant, beta_of_model
from stochdda.problems import generate_logistic_data, make_logistic_instance


def run_all(inst, model, ref, T, seed, a_factor):
    beta = beta_of_model(model)
    abar = estimate_abar(inst.L, inst.mu, beta)
    kw = dict(seed=seed, x_star=ref.x_star, F_star=ref.F_star)
    traces = {"dda": run_dda(inst, model, a_factor * abar, T, monitors=False, **kw)}
    traces["cdda"] = run_cdda(inst, model, T, **kw)
    traces["dsm"] = run_dsm(inst, model, T, **kw)
    with np.errstate(all="ignore"):
        for name, fn in (("pg_extra", run_pg_extra), ("p2d2", run_p2d2)):
            try:
                traces[name] = fn(inst, model, 0.5 / inst.L, T, **kw)
            except FloatingPointError as e:
                print(f"  {name}: stopped ({e})")
    return beta, abar, traces


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--T", type=int, default=5000)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--a-factor", type=float, default=0.9)
    p.add_argument("--fixed", action="store_true", help="Metropolis weights on the cycle instead of gossip")
    p.add_argument("--out", default="runs/logistic")
    p.add_argument("--plot", action="store_true")
    args = p.parse_args(argv)

    inst = make_logistic_instance(generate_logistic_data(0, n=args.n, samples_per_agent=50, m=args.m), mu=0.02, phi=0.001)
    ref = solve_reference(inst)
    graph = Graph.cycle(args.n)
    model = TimeInvariant.metropolis(graph) if args.fixed else Gossip(graph)
    for seed in args.seeds:
        beta, abar, traces = run_all(inst, model, ref, args.T, seed, args.a_factor)
        print(f"seed {seed}: beta={beta:.5f} abar={abar:.3e} L={inst.L:.4f} mu={inst.mu}")
        out = Path(args.out) / f"seed{seed}"
        out.mkdir(parents=True, exist_ok=True)
        for name, tr in traces.items():
            write_csv(out / f"{name}.csv", tr, {})
            print(f"  {name:9s} RSE(T)={tr['rse'][-1]:.3e} slope={log_slope(tr['rse'], tr['t']):.3e}")
        if args.plot:
            from plot_traces import plot_dir

            print("  plot:", plot_dir(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
