"""Accuracy at one switching period for several user counts.

    python3 scripts/multi_user.py --k 45 --users 1 2 3 4
"""
import argparse
from dataclasses import replace
from pathlib import Path

from jamrec.config import load_config
from jamrec.evaluation import sweep_switching_times


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--k", type=int, default=45)
    ap.add_argument("--users", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    base = load_config(args.config)
    for n in args.users:
        cfg = replace(base, k_values=(args.k,), n_runs=args.runs,
                      sim=replace(base.sim, n_users=n)).validate()
        report = sweep_switching_times(cfg, threads=args.threads)
        print(f"N={n}: accuracy {report.accuracy_mean[args.k]:.4f} ± {report.accuracy_std[args.k]:.4f}")


if __name__ == "__main__":
    main()
