"""Command line entry point: ``check``, ``run``, ``reference`` and ``sweep``.

Exit codes: 0 success, 2 configuration error, 3 precondition violation
(non-contracting network, undefined step bound, infeasible step), 4 numerical
failure (non-finite iterates, schedule overflow, solver non-convergence).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import (
    NumericalError,
    ReferenceNotConverged,
    ReferenceSolution,
    ScheduleOverflowError,
    constant_step,
    inv_sqrt_step,
    run_cdda,
    run_dda,
    run_dsm,
    run_p2d2,
    run_pg_extra,
    solve_reference,
)
from .analysis import PreconditionError, bound_check, build_report, estimate_abar
from .config import AlgorithmSpec, ConfigError, ExperimentConfig
from .network import beta_of_model
from .problems import CSVFormatError, PowerIterationError
from .streams import stream

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_NUMERICAL = 0, 2, 3, 4

CSV_COLUMNS = (
    "t", "rse", "obj_gap_ybar", "obj_gap_mean_x", "consensus_residual_s",
    "consensus_residual_z", "lemma5_slack", "bound_margin_thm2", "bound_margin_cor1",
)

LEMMA5_TOL = 1e-12
CONSERVATION_TOL = 1e-9
BOUND_TOL = 1e-9


# -- shared plumbing -------------------------------------------------------------


def load_config(args):
    if not args.config:
        raise ConfigError("--config", "a config file is required")
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.T is not None:
        cfg.T = args.T
        for alg in cfg.algorithms:
            alg.T = None
    if args.algos:
        names = [s.strip() for s in args.algos.split(",") if s.strip()]
        by_name = {alg.name: alg for alg in cfg.algorithms}
        cfg.algorithms = [by_name.get(nm, AlgorithmSpec(name=nm)) for nm in names]
    cfg.validate()
    return cfg


def network_beta(cfg, model):
    nw = cfg.network
    if nw.beta_mode == "monte_carlo":
        return beta_of_model(model, "monte_carlo", nw.beta_samples, stream(cfg.seed, "beta"))
    return beta_of_model(model, "exact")


def reference_for(cfg, instance):
    """Reference solution, cached under the problem hash; returns ``(solution, cache_path, hit)``."""
    cache_dir = cfg.resolve(cfg.reference.cache_dir) if cfg.reference.cache_dir else Path(cfg.out) / "cache"
    path = cache_dir / f"reference-{cfg.problem_hash()}.json"
    if path.exists():
        return ReferenceSolution.from_dict(json.loads(path.read_text())), path, True
    ref = solve_reference(instance, cfg.reference.tol, cfg.reference.max_iter)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(ref.to_dict(), indent=2, sort_keys=True) + "\n")
    return ref, path, False


def resolve_step(alg, instance, beta):
    if alg.name == "dda":
        if alg.a is not None:
            a = alg.a
        else:
            if not beta < 1:
                raise PreconditionError(f"beta={beta:.6g} >= 1: step bound undefined")
            a = (alg.a_factor if alg.a_factor is not None else 0.5) * estimate_abar(instance.L, instance.mu, beta)
        if a * instance.mu >= 1:
            raise PreconditionError(f"dda step a={a} violates a*mu < 1")
        return a
    if alg.name in ("pg_extra", "p2d2"):
        return alg.a if alg.a is not None else (alg.a_factor if alg.a_factor is not None else 0.5) / instance.L
    return None


def step_rule_of(alg):
    return constant_step(alg.step_value) if alg.step_rule == "constant" else inv_sqrt_step


def run_algorithm(cfg, alg, instance, model, ref, beta):
    """Run one algorithm; returns ``(trace, margins, report)`` (margins/report only for dda)."""
    T = alg.T if alg.T is not None else cfg.T
    common = dict(seed=cfg.seed, x_star=ref.x_star, F_star=ref.F_star)
    a = resolve_step(alg, instance, beta)
    if alg.name == "dda":
        mon = cfg.monitors
        trace = run_dda(instance, model, a, T, monitors=mon.conservation or mon.lemma5 or mon.bounds, **common)
        report = build_report(a, instance.L, instance.mu, beta, instance.n, ref.sigma2, ref.d_xstar, ref.tol)
        margins = {}
        if mon.bounds and report.C is not None:
            thm2 = bound_check(trace, report, "theorem2")
            margins["bound_margin_thm2"] = np.fmin(*thm2.margins.values())
            if instance.mu > 0:
                margins["bound_margin_cor1"] = bound_check(trace, report, "corollary1").margins["cor1_distance"]
        return trace, margins, report
    if alg.name == "pg_extra":
        return run_pg_extra(instance, model, a, T, **common), {}, None
    if alg.name == "p2d2":
        return run_p2d2(instance, model, a, T, alpha=alg.alpha, **common), {}, None
    if alg.name == "dsm":
        return run_dsm(instance, model, T, step_rule=step_rule_of(alg), **common), {}, None
    return run_cdda(instance, model, T, step_rule=step_rule_of(alg), **common), {}, None


def _fmt(v):
    return format(float(v), ".17g")


def write_csv(path, trace, margins):
    nrows = trace.T + 1
    cols = []
    for name in CSV_COLUMNS:
        if name in margins:
            cols.append(margins[name])
        elif name in trace.columns:
            cols.append(trace.columns[name])
        else:
            cols.append(np.full(nrows, np.nan))
    lines = [",".join(CSV_COLUMNS)]
    for r in range(nrows):
        lines.append(",".join(str(int(cols[0][r])) if k == 0 else _fmt(cols[k][r]) for k in range(len(cols))))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def count_violations(trace, margins, monitors):
    out = {}
    if monitors.lemma5:
        out["lemma5"] = int(np.nansum(trace["lemma5_slack"] < -LEMMA5_TOL))
    if monitors.conservation:
        out["conservation"] = int(
            np.nansum(trace["conservation_s"] > CONSERVATION_TOL) + np.nansum(trace["conservation_z"] > CONSERVATION_TOL)
        )
    for k, m in margins.items():
        out[k] = int(np.nansum(m < -BOUND_TOL))
    return out


def log_slope(rse, t):
    """Least-squares slope of log10 RSE over the last three quarters of the run."""
    T = int(t[-1])
    sel = (t >= T / 4) & np.isfinite(rse) & (rse > 0)
    if sel.sum() < 2:
        return math.nan
    return float(np.polyfit(t[sel], np.log10(rse[sel]), 1)[0])


def _setup(cfg):
    instance = cfg.build_problem()
    model = cfg.build_network()
    if model.n != instance.n:
        raise ConfigError("network", f"network has {model.n} nodes, problem has {instance.n} agents")
    return instance, model, network_beta(cfg, model)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- commands ----------------------------------------------------------------------


def cmd_check(cfg, out=None):
    out = sys.stdout if out is None else out
    instance, model, beta = _setup(cfg)
    ref, _, _ = reference_for(cfg, instance)
    dda = next((a for a in cfg.algorithms if a.name == "dda"), None)
    a = None
    if dda is not None and dda.a is not None:
        a = dda.a
    elif dda is not None and dda.a_factor is not None and beta < 1:
        a = dda.a_factor * estimate_abar(instance.L, instance.mu, beta)
    report = build_report(a, instance.L, instance.mu, beta, instance.n, ref.sigma2, ref.d_xstar, ref.tol)
    text = report.to_text()
    out.write(text)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(text)
    _write_json(out_dir / "report.json", report.to_dict())
    if beta >= 1:
        raise PreconditionError(f"beta={beta:.6g} >= 1: network does not contract, step bound undefined")
    if not report.feasible:
        raise PreconditionError(f"step a={report.a} fails the step conditions")
    return report


def cmd_reference(cfg, out=None):
    out = sys.stdout if out is None else out
    instance = cfg.build_problem()
    ref, path, hit = reference_for(cfg, instance)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "reference.json", ref.to_dict())
    out.write(
        f"reference: {'cache hit' if hit else 'computed'} ({path})\n"
        f"F_star: {_fmt(ref.F_star)}\nd_xstar: {_fmt(ref.d_xstar)}\nsigma2: {_fmt(ref.sigma2)}\n"
        f"iterations: {ref.iterations}\nresidual: {ref.residual:.3e}\n"
    )
    return ref


def cmd_run(cfg, out=None):
    out = sys.stdout if out is None else out
    instance, model, beta = _setup(cfg)
    ref, _, _ = reference_for(cfg, instance)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "problem_hash": cfg.problem_hash(),
        "config": cfg.to_dict(),
        "problem": instance.describe(),
        "network": {"kind": model.kind, "beta": beta},
        "reference": {k: v for k, v in ref.to_dict().items() if k != "x_star"},
        "algorithms": {},
    }
    worst = EXIT_OK
    for alg in cfg.algorithms:
        entry = {}
        t0 = time.perf_counter()
        try:
            trace, margins, report = run_algorithm(cfg, alg, instance, model, ref, beta)
        except PreconditionError as e:
            entry.update(status="failed", error=str(e), kind="precondition")
            worst = max(worst, EXIT_PRECONDITION)
        except (NumericalError, ScheduleOverflowError, FloatingPointError) as e:
            entry.update(status="failed", error=str(e), kind="numerical")
            worst = max(worst, EXIT_NUMERICAL)
        except ValueError as e:
            entry.update(status="failed", error=str(e), kind="precondition")
            worst = max(worst, EXIT_PRECONDITION)
        else:
            csv_path = out_dir / f"{alg.name}.csv"
            write_csv(csv_path, trace, margins)
            rse = trace["rse"]
            entry.update(
                status="ok",
                csv=csv_path.name,
                T=trace.T,
                final_rse=float(rse[-1]),
                log10_rse_slope=log_slope(rse, trace["t"]),
                violations=count_violations(trace, margins, cfg.monitors) if alg.name == "dda" else {},
                meta=trace.meta,
            )
            if report is not None:
                entry["analysis"] = report.to_dict()
        entry["wall_time_s"] = time.perf_counter() - t0
        summary["algorithms"][alg.name] = entry
        status = entry["status"] if entry["status"] == "ok" else f"FAILED ({entry['error']})"
        rse_txt = f" final RSE {entry['final_rse']:.3e}" if entry.get("final_rse") is not None else ""
        out.write(f"{alg.name}: {status}{rse_txt}\n")
    _write_json(out_dir / "summary.json", json.loads(json.dumps(summary, default=_json_default)))
    return worst


def cmd_sweep(cfg, factors, out=None):
    out = sys.stdout if out is None else out
    instance, model, beta = _setup(cfg)
    if not beta < 1:
        raise PreconditionError(f"beta={beta:.6g} >= 1: step bound undefined")
    ref, _, _ = reference_for(cfg, instance)
    abar = estimate_abar(instance.L, instance.mu, beta)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["a_factor,a,final_rse,log10_rse_slope,cond16,cond19"]
    for f in factors:
        a = f * abar
        trace = run_dda(instance, model, a, cfg.T, seed=cfg.seed, x_star=ref.x_star, F_star=ref.F_star, monitors=False)
        rep = build_report(a, instance.L, instance.mu, beta, instance.n)
        rse = trace["rse"]
        lines.append(",".join([_fmt(f), _fmt(a), _fmt(rse[-1]), _fmt(log_slope(rse, trace["t"])),
                               str(int(rep.cond16)), str(int(rep.cond19))]))
        out.write(f"a={a:.4e} ({f:g} abar): final RSE {rse[-1]:.3e}\n")
    with open(out_dir / "sweep.csv", "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# -- argument parsing -----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="stochdda", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", help="override the output directory")
    common.add_argument("--algos", help="comma-separated algorithm list, e.g. dda,cdda")
    common.add_argument("--T", type=int, help="override the number of rounds")
    sub.add_parser("check", parents=[common], help="print the step-size analysis report")
    sub.add_parser("run", parents=[common], help="run the configured algorithms and write CSV traces")
    sub.add_parser("reference", parents=[common], help="solve for the reference minimizer")
    sw = sub.add_parser("sweep", parents=[common], help="run DDA over a grid of step sizes")
    sw.add_argument("--factors", default="0.1,0.25,0.5,0.75,0.9", help="multiples of the step bound")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "check":
            cmd_check(cfg)
            return EXIT_OK
        if args.command == "reference":
            cmd_reference(cfg)
            return EXIT_OK
        if args.command == "run":
            return cmd_run(cfg)
        factors = [float(x) for x in args.factors.split(",") if x.strip()]
        return cmd_sweep(cfg, factors)
    except (ConfigError, CSVFormatError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as e:
        print(f"precondition violated: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (NumericalError, ReferenceNotConverged, ScheduleOverflowError, PowerIterationError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
