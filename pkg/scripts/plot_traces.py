"""Plot RSE against rounds from the per-algorithm CSVs of a ``stochdda run`` output directory.

    python3 scripts/plot_traces.py runs/logistic_gossip            # writes rse.svg there

Needs matplotlib (``pip install .[plot]``).
"""

import argparse
from pathlib import Path

import numpy as np


def load_rse(csv_path):
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    return data["t"], data["rse"]


def plot_dir(run_dir, out=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run_dir = Path(run_dir)
    fig, ax = plt.subplots(figsize=(6, 4))
    for csv_path in sorted(run_dir.glob("*.csv")):
        if csv_path.name == "sweep.csv":
            continue
        t, rse = load_rse(csv_path)
        ok = np.isfinite(rse) & (rse > 0)
        ax.semilogy(t[ok], rse[ok], label=csv_path.stem)
    ax.set_xlabel("round t")
    ax.set_ylabel("RSE")
    ax.legend()
    fig.tight_layout()
    out = Path(out) if out else run_dir / "rse.svg"
    fig.savefig(out)
    plt.close(fig)
    return out


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("run_dir")
    p.add_argument("--out")
    args = p.parse_args()
    print(plot_dir(args.run_dir, args.out))
