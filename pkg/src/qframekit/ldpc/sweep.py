"""Block-error performance sweeps and the hardware throughput model."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .decoder import decode_batch
from .matrix import ParityCheckMatrix, compute_parity

DEFAULT_CLOCK_HZ = 50e6
DEFAULT_CYCLES_PER_ITER = 46


def throughput_mbps(n: int, mean_iterations: float,
                    clock_hz: float = DEFAULT_CLOCK_HZ,
                    cycles_per_iter: int = DEFAULT_CYCLES_PER_ITER) -> float:
    """Decoded bits per second (Mb/s) of a fully parallel engine that spends
    ``cycles_per_iter`` clock cycles per iteration on an n-bit block."""
    if mean_iterations <= 0:
        raise ValueError("mean_iterations must be positive")
    return n * clock_hz / (cycles_per_iter * mean_iterations) / 1e6


@dataclass
class SweepRow:
    qber: float
    trials: int
    successes: int
    success_rate: float
    mean_iterations: float        # over successful blocks
    mean_iterations_all: float    # failures counted at the iteration cap
    throughput_mbps: float


def sweep_performance(h: ParityCheckMatrix, qber_grid, trials: int,
                      arithmetic: str = "float",
                      rng: np.random.Generator | None = None,
                      max_iter: int = 40, error_model: str = "fixed_count",
                      clock_hz: float = DEFAULT_CLOCK_HZ,
                      cycles_per_iter: int = DEFAULT_CYCLES_PER_ITER,
                      batch: int = 1000) -> list[SweepRow]:
    """Monte-Carlo block-error sweep.

    Per grid point: draw random keys, flip bits, decode against the true
    syndrome, and count blocks that converge to the exact original key.
    ``error_model`` selects how "a block at QBER q" is realized:
    "fixed_count" plants exactly round(q*n) errors per block (the benchmark
    convention this sweep is compared against), "bernoulli" flips each bit
    independently with probability q (the physical channel).  Trials are
    generated in fixed-size batches from a dedicated child generator per
    grid point, so results do not depend on how the work is chunked.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if error_model not in ("fixed_count", "bernoulli"):
        raise ValueError(f"unknown error model {error_model!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    rows = []
    for qber in qber_grid:
        point_rng = np.random.default_rng(rng.integers(0, 2 ** 63))
        successes = 0
        iter_success = 0
        iter_all = 0
        done = 0
        while done < trials:
            b = min(batch, trials - done)
            key = point_rng.integers(0, 2, size=(b, h.n), dtype=np.uint8)
            if error_model == "bernoulli":
                flips = (point_rng.random((b, h.n)) < qber).astype(np.uint8)
            else:
                k = int(round(qber * h.n))
                flips = np.zeros((b, h.n), dtype=np.uint8)
                for t in range(b):
                    flips[t, point_rng.choice(h.n, size=k, replace=False)] = 1
            received = key ^ flips
            parity = compute_parity(h, key)
            res = decode_batch(h, parity, received, qber,
                               max_iter=max_iter, arithmetic=arithmetic)
            good = res.converged & np.all(res.corrected == key, axis=1)
            successes += int(good.sum())
            iter_success += int(res.iterations[good].sum())
            iter_all += int(res.iterations.sum())
            done += b
        mean_succ = iter_success / successes if successes else float("nan")
        mean_all = iter_all / trials
        rows.append(SweepRow(
            qber=float(qber), trials=trials, successes=successes,
            success_rate=successes / trials,
            mean_iterations=mean_succ, mean_iterations_all=mean_all,
            throughput_mbps=throughput_mbps(h.n, mean_succ, clock_hz,
                                            cycles_per_iter)
            if successes else 0.0))
    return rows


SWEEP_CSV_FIELDS = ["qber", "trials", "successes", "success_rate",
                    "mean_iterations", "mean_iterations_all", "throughput_mbps"]


def write_sweep_csv(path, rows: list[SweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_CSV_FIELDS)
        for r in rows:
            w.writerow([f"{r.qber:.6g}", r.trials, r.successes,
                        f"{r.success_rate:.6g}", f"{r.mean_iterations:.6g}",
                        f"{r.mean_iterations_all:.6g}", f"{r.throughput_mbps:.6g}"])
