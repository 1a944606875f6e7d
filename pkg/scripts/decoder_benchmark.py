#!/usr/bin/env python3
"""Decoder benchmark: the 60x200 row-weight-12 code across error rates and
arithmetic widths.

    python scripts/decoder_benchmark.py --trials 10000 --out out/decoder
"""

import argparse
from pathlib import Path

import numpy as np

from qframekit.ldpc import design_matrix, sweep_performance, write_alist, write_sweep_csv

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    HAS_MPL = True
except Exception:
    HAS_MPL = False

# calibrated reconstruction of the benchmark profile (see decisions notes)
REFERENCE_PROFILE = {2: 84, 3: 48, 6: 68}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--qber-grid", default="0.02,0.025,0.03,0.035,0.04")
    ap.add_argument("--arithmetics", default="float,fixed24,fixed16,fixed12")
    ap.add_argument("--error-model", default="fixed_count",
                    choices=("fixed_count", "bernoulli"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="out/decoder")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    h = design_matrix(n=200, target_qber=0.03, row_weight=12, m=60,
                      column_weights=REFERENCE_PROFILE,
                      rng=np.random.default_rng(args.seed))
    write_alist(h, out / "code.alist")
    grid = [float(x) for x in args.qber_grid.split(",")]

    curves = {}
    for arith in args.arithmetics.split(","):
        rows = sweep_performance(h, grid, trials=args.trials, arithmetic=arith,
                                 error_model=args.error_model,
                                 rng=np.random.default_rng(args.seed + 1))
        write_sweep_csv(out / f"sweep_{arith}.csv", rows)
        curves[arith] = rows
        for r in rows:
            print(f"{arith:8s} qber={r.qber:g}: success {100*r.success_rate:6.2f}% "
                  f"iters {r.mean_iterations:7.4f} (all {r.mean_iterations_all:7.4f}) "
                  f"throughput {r.throughput_mbps:8.4f} Mb/s")

    if HAS_MPL:
        fig, ax = plt.subplots(figsize=(6, 4))
        for arith, rows in curves.items():
            ax.plot([100 * r.qber for r in rows],
                    [100 * r.success_rate for r in rows], "o-", label=arith)
        ax.set_xlabel("error rate (%)")
        ax.set_ylabel("block success rate (%)")
        ax.legend()
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(out / "success_rates.png", dpi=150)
        print(f"plot in {out}")


if __name__ == "__main__":
    main()
