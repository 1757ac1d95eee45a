"""Accuracy against switching period, overall and per policy.

    python3 scripts/accuracy_vs_period.py --runs 20 --out results/accuracy
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from jamrec.config import load_config
from jamrec.evaluation import sweep_switching_times
from jamrec.io import atomic_write_text, csv_text
from jamrec.sim import PolicyKind


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--k", type=int, nargs="+", default=[5, 45, 105, 185])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--users", type=int, default=2)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/accuracy"))
    args = ap.parse_args()

    cfg = load_config(args.config)
    cfg = replace(cfg, k_values=tuple(args.k), n_runs=args.runs,
                  sim=replace(cfg.sim, n_users=args.users)).validate()
    report = sweep_switching_times(cfg, threads=args.threads,
                                   progress=lambda r: print(f"K={r.switch_period:>3} run {r.run:>3}: {r.accuracy:.4f}"))
    args.out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(args.out / "sweep.csv", csv_text(report.csv_rows()))
    atomic_write_text(args.out / "sweep.json", report.dumps())

    print(f"\n{'K':>5} {'acc':>7} {'std':>7} " + " ".join(f"{p.name:>6}" for p in PolicyKind))
    for k in cfg.k_values:
        per = np.array(report.per_policy[k])
        print(f"{k:>5} {report.accuracy_mean[k]:7.4f} {report.accuracy_std[k]:7.4f} "
              + " ".join(f"{v:6.3f}" for v in per))


if __name__ == "__main__":
    main()
