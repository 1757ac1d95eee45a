"""Row-normalised confusion matrix at one switching period.

    python3 scripts/confusion_table.py --k 100 --runs 20
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from jamrec.config import load_config
from jamrec.evaluation import row_normalized, sweep_switching_times
from jamrec.io import atomic_write_text
from jamrec.sim import PolicyKind


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/confusion"))
    args = ap.parse_args()

    cfg = replace(load_config(args.config), k_values=(args.k,), n_runs=args.runs).validate()
    report = sweep_switching_times(cfg, threads=args.threads)
    norm = row_normalized(report.confusion[args.k])
    args.out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(args.out / "sweep.json", report.dumps())

    names = [p.name for p in PolicyKind]
    print("true\\pred " + " ".join(f"{n:>6}" for n in names))
    for p in PolicyKind:
        print(f"{p.name:>9} " + " ".join(f"{v:6.1f}" for v in norm[p]))
    off = norm - np.diag(np.diag(norm))
    for p in PolicyKind:
        print(f"{p.name} most often mistaken for {PolicyKind(int(np.argmax(off[p]))).name}")


if __name__ == "__main__":
    main()
