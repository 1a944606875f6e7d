"""Command-line front end.

Every command is a pure function of (config, seed, input files): rerunning
with the same arguments produces byte-identical output files.

Exit codes: 0 success; 2 configuration error; 3 input-data error;
4 decoder did not converge.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import decoy as decoy_mod
from . import ldpc as ldpc_mod
from .config import ConfigError, RunConfig, dump_default_config, load_config, rng_streams
from .decoy import MissingDataError, NoPositiveRateError
from .framing import measurement_sequence, run_session
from .photonics import read_detection_csv, write_detection_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NO_CONVERGENCE = 4

EPILOG = """exit codes:
  0  success
  2  configuration error (bad config file or flag values)
  3  data error (missing/odd input files, dimension mismatches)
  4  decoder failed to converge
"""


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _write_qber_csv(path, timeline) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_idx", "qber_window"])
        for i, q in enumerate(timeline):
            w.writerow([i, "" if math.isnan(q) else f"{q:.8g}"])


def _write_stokes_csv(path, locked, monitor) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_idx", "s1_locked", "s2_locked", "s3_locked",
                    "s1_monitor", "s2_monitor", "s3_monitor"])
        for i, (a, b) in enumerate(zip(locked, monitor)):
            w.writerow([i] + [f"{x:.8g}" for x in a] + [f"{x:.8g}" for x in b])


def cmd_simulate_link(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    streams = rng_streams(cfg.seed)
    result = run_session(cfg.schedule, cfg.link, cfg.drift, cfg.stabilizer,
                         cfg.duration_s, streams, decoys=cfg.decoys)
    write_detection_csv(result.records, out / "counts.csv")
    _write_qber_csv(out / "qber_timeline.csv", result.qber_timeline)
    _write_stokes_csv(out / "stokes.csv", result.stokes_locked, result.stokes_monitor)
    if args.format == "jsonl":
        result.write_jsonl(out / "session.jsonl")
    else:
        with open(out / "session.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame_idx", "type", "stab_basis", "module", "clicks",
                        "qber_window"])
            for rec in result.frame_log:
                w.writerow([rec["frame_idx"], rec["type"], rec["stab_basis"],
                            rec["module"], rec["clicks"],
                            "" if rec["qber_window"] is None else rec["qber_window"]])
    if cfg.schedule.pattern in ("two_detector", "four_detector"):
        with open(out / "sequence.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame_idx", "pol_cframe", "pol_qubit"])
            for i, (c, q) in enumerate(measurement_sequence(cfg.schedule.pattern)):
                w.writerow([i + 1, c, q])
    qber = result.mean_qber
    print(f"frames={len(result.frame_log)} sifted={result.sifted_correct + result.sifted_wrong} "
          f"mean_qber={qber:.6f}" if not math.isnan(qber) else "no sifted bits")
    return EXIT_OK


def cmd_keyrate(args) -> int:
    cfg = _load(args)
    try:
        records = read_detection_csv(args.counts)
        measured = decoy_mod.aggregate_measured(records)
    except (OSError, ValueError) as err:
        print(f"error: counts file: {err}", file=sys.stderr)
        return EXIT_DATA
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = [float(x) for x in cfg.keyrate.grid]
    mu_meas = cfg.link.mu
    if mu_meas not in grid:
        grid = sorted(set(grid) | {mu_meas})
    curve_set = decoy_mod.curves(cfg.link, grid, cfg.keyrate.nu,
                                 measured={mu_meas: measured})
    decoy_mod.write_rate_csv(out / "rates.csv", curve_set)
    try:
        mu_opt = decoy_mod.optimal_mu(cfg.link, cfg.keyrate.nu)
        print(f"mu_opt={mu_opt:.4f}")
    except NoPositiveRateError:
        print("mu_opt=none (no positive rate)")
    rate_c = next(r for r in curve_set["C"] if r.mu_used == mu_meas)
    sigma = decoy_mod.rate_measured_sigma(measured, mu_meas, cfg.keyrate.nu,
                                          cfg.link.f_ec)
    print(f"rate_C(mu={mu_meas:g}) = {rate_c.s:.8g} +- {sigma:.2g}")
    return EXIT_OK


def _read_bits(path, what: str) -> np.ndarray:
    try:
        text = Path(path).read_text().split()
        bits = np.array([int(c) for line in text for c in line], dtype=np.uint8)
    except (OSError, ValueError) as err:
        raise ValueError(f"{what}: {err}") from None
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError(f"{what}: not a 0/1 string")
    return bits


def cmd_ldpc(args) -> int:
    cfg = _load(args)
    lc = cfg.ldpc
    if args.ldpc_cmd == "design":
        rng = rng_streams(cfg.seed)["ldpc"]
        try:
            h = ldpc_mod.design_matrix(n=lc.n, target_qber=lc.target_qber,
                                       row_weight=lc.row_weight, m=lc.m,
                                       column_weights=lc.column_weights, rng=rng)
        except ldpc_mod.DesignInfeasibleError as err:
            print(f"error: design infeasible: {err}", file=sys.stderr)
            return EXIT_CONFIG
        ldpc_mod.write_alist(h, args.out)
        print(f"n={h.n} m={h.m} row_weight={h.row_weight} edges={h.n_edges} "
              f"four_cycles={h.four_cycles}")
        return EXIT_OK

    try:
        h = ldpc_mod.read_alist(args.alist)
    except (OSError, ValueError) as err:
        print(f"error: alist: {err}", file=sys.stderr)
        return EXIT_DATA

    if args.ldpc_cmd == "sim":
        grid = [float(x) for x in args.qber_grid.split(",")]
        rng = rng_streams(cfg.seed)["ldpc"]
        rows = ldpc_mod.sweep_performance(h, grid, trials=args.trials,
                                          arithmetic=lc.arithmetic,
                                          max_iter=lc.max_iter,
                                          error_model=lc.error_model, rng=rng)
        ldpc_mod.write_sweep_csv(args.out, rows)
        for r in rows:
            print(f"qber={r.qber:g} success={r.success_rate:.4f} "
                  f"mean_iter={r.mean_iterations:.4f} throughput={r.throughput_mbps:.4f}")
        return EXIT_OK

    if args.ldpc_cmd == "decode":
        try:
            received = _read_bits(args.received, "received key")
            syndrome = _read_bits(args.syndrome, "syndrome")
            if len(received) != h.n or len(syndrome) != h.m:
                raise ValueError(
                    f"dimensions: key {len(received)} vs n={h.n}, "
                    f"syndrome {len(syndrome)} vs m={h.m}")
        except ValueError as err:
            print(f"error: {err}", file=sys.stderr)
            return EXIT_DATA
        res = ldpc_mod.decode(h, syndrome, received, qber=args.qber,
                              max_iter=lc.max_iter, arithmetic=lc.arithmetic)
        Path(args.out).write_text("".join(str(int(b)) for b in res.corrected) + "\n")
        print(f"converged={res.converged} iterations={res.iterations}")
        return EXIT_OK if res.converged else EXIT_NO_CONVERGENCE
    raise AssertionError("unreachable")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qframekit",
        description="Framed polarization-QKD link simulator and post-processing tools",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="INI run configuration (defaults built in)")
    p.add_argument("--seed", type=int, help="override the config seed")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate-link", help="run a framed-link session")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--format", choices=("jsonl", "csv"), default="jsonl",
                   help="frame log format")
    s.set_defaults(func=cmd_simulate_link)

    k = sub.add_parser("keyrate", help="secret-key-rate curves from counts")
    k.add_argument("--counts", required=True, help="detection-record CSV")
    k.add_argument("--out", required=True, help="output directory")
    k.set_defaults(func=cmd_keyrate)

    l = sub.add_parser("ldpc", help="error-correction code tools")
    lsub = l.add_subparsers(dest="ldpc_cmd", required=True)
    d = lsub.add_parser("design", help="design a parity-check matrix")
    d.add_argument("--out", required=True, help="alist output path")
    sim = lsub.add_parser("sim", help="block-error performance sweep")
    sim.add_argument("--alist", required=True)
    sim.add_argument("--qber-grid", default="0.025,0.03,0.035")
    sim.add_argument("--trials", type=int, default=10_000)
    sim.add_argument("--out", required=True, help="sweep CSV path")
    dec = lsub.add_parser("decode", help="correct a received key")
    dec.add_argument("--alist", required=True)
    dec.add_argument("--received", required=True, help="received key bits file")
    dec.add_argument("--syndrome", required=True, help="syndrome bits file")
    dec.add_argument("--qber", type=float, required=True)
    dec.add_argument("--out", required=True, help="corrected key output path")
    for sp in (d, sim, dec):
        sp.set_defaults(func=cmd_ldpc)

    dump = sub.add_parser("print-config", help="print the built-in defaults as INI")
    dump.set_defaults(func=lambda args: (print(dump_default_config()), EXIT_OK)[1])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingDataError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
