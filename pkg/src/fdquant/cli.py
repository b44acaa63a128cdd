"""
Command-line front end.

``fdquant analyze-bits``  closed-form ADC bit budget of a single-antenna link
``fdquant table1``        quantization noise / input range / dynamic range table
``fdquant sweep``         Monte-Carlo sweep of one scenario parameter
``fdquant convergence``   per-iteration objective of the proposed alternation

Scenario values are resolved in increasing priority: built-in defaults
(8 antennas and 2+2 users, or the 16-antenna 4+4 scenario with
``--full-scale``), ``--config`` file, ``FDQ_*`` environment variables,
explicit flags.

Exit status: 0 on success, 1 if any trial hit a solver fault, 2 on bad
usage, 3 on I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import adc_analysis as aa
from .energy import load_power_model
from .harness import ALGORITHMS, AXES, SweepSpec, convergence_study, emit, run_sweep, summarize
from .scenario import (ScenarioConfig, dbm_to_watts, db_to_linear, desk_defaults, env_overrides,
                       load_config_file, load_paper_defaults, parse_bits, thermal_noise_dbm)

log = logging.getLogger("fdquant")

EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _parse_values(text: str) -> list[float]:
    """``"4,5,6"`` or an inclusive integer range ``"4:9"`` (optionally ``"a:b:step"``)."""
    text = text.strip()
    if ":" in text and "," not in text:
        parts = [float(p) for p in text.split(":")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1.0
        if step <= 0 or hi < lo:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [lo + i * step for i in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def _scenario_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--config", type=Path, help="flat key = value scenario file")
    g.add_argument("--full-scale", action="store_true",
                   help="start from 16 antennas and 4+4 users instead of 8 and 2+2")
    g.add_argument("--n-antennas", type=int, help="AP transmit and receive antennas")
    g.add_argument("--users", type=int, help="DL and UL users per group")
    g.add_argument("--p-dl-dbm", type=float)
    g.add_argument("--p-ul-dbm", type=float)
    g.add_argument("--kappa-a-db", type=float)
    g.add_argument("--bits", help="converter bits: an integer, inf, or a per-antenna list")
    g.add_argument("--duplex", choices=("fd", "hd"))
    g.add_argument("--d-cci-m", type=float)
    g.add_argument("--seed", type=int)


def resolve_scenario(args, environ=None) -> ScenarioConfig:
    base = load_paper_defaults() if args.full_scale else desk_defaults()
    if args.config is not None:
        base = load_config_file(args.config, base)
    env = env_overrides(environ)
    if env:
        base = base.replace(**env)
    flags = {}
    if args.n_antennas is not None:
        flags.update(n_tx=args.n_antennas, n_rx=args.n_antennas)
    if args.users is not None:
        flags.update(k_dl=args.users, k_ul=args.users)
    for key in ("p_dl_dbm", "p_ul_dbm", "kappa_a_db", "d_cci_m", "seed"):
        if getattr(args, key) is not None:
            flags[key] = getattr(args, key)
    if args.duplex is not None:
        flags["duplex_mode"] = args.duplex.upper()
    cfg = base.replace(**flags) if flags else base
    if args.bits is not None:
        cfg = cfg.replace(b_adc=parse_bits(args.bits, cfg.n_rx), b_dac=parse_bits(args.bits, cfg.n_tx))
    return cfg


# -- analyze-bits ------------------------------------------------------------

def cmd_analyze_bits(args) -> int:
    p_total = dbm_to_watts(args.p_dl_dbm) * db_to_linear(args.kappa_a_db)
    p_ul = dbm_to_watts(args.p_ul_dbm) * db_to_linear(args.rho_ul_db)
    p_total += p_ul
    b_min = aa.min_adc_bits(p_total, p_ul)
    b_apx = aa.min_adc_bits_approx(p_total, p_ul)
    print(f"SI-to-UL power ratio     : {10 * math.log10((p_total - p_ul) / p_ul):.2f} dB")
    print(f"minimum ADC bits         : {b_min:.2f}  (use {math.floor(b_min) + 1})")
    print(f"large-SI approximation   : {b_apx:.2f}")
    print(f"resolvability threshold  : {aa.RESOLVABILITY_THRESHOLD:.4f}")
    sigma2_dbm = (-math.inf if args.noise_dbm is None else args.noise_dbm)
    bits = [int(b) for b in _parse_values(args.bits_range)]
    print(f"{'b':>3} {'DR [dB]':>9} {'gap [dB]':>9} {'margin [dB]':>12} {'UL>floor':>9}")
    for b in bits:
        op = aa.SisoOperatingPoint.from_db(args.p_dl_dbm, args.p_ul_dbm, args.rho_ul_db,
                                           args.kappa_a_db, sigma2_dbm, b)
        gap = aa.range_gap(op, beta_mode="analytic")
        above = op.p_ul_rx > aa.noise_floor(op, beta_mode="analytic")
        print(f"{b:>3} {aa.dynamic_range_db(b):>9.2f} {gap:>9.2f} {aa.resolvability_margin(op):>12.2f} "
              f"{'yes' if above else 'no':>9}")
    return EXIT_OK


# -- table1 ------------------------------------------------------------------

def cmd_table1(args) -> int:
    rows = aa.generate_table1(p_ul_dbm=args.p_ul_dbm, trials=args.trials,
                              rng=np.random.default_rng(args.seed))
    header = ["kappa_a_db", "p_dl_dbm", "bits", "eta_dbm", "delta_db", "dr_db"]
    lines = [[r.kappa_a_db, r.p_dl_dbm, r.bits, r.eta_dbm, r.delta_db, r.dr_db] for r in rows]
    if args.out:
        with Path(args.out).open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            wr.writerows([[f"{x:.12g}" if isinstance(x, float) else x for x in ln] for ln in lines])
    print(f"{'kappa_a':>8} {'P_D':>5} {'b':>3} {'eta [dBm]':>10} {'delta [dB]':>11} {'DR [dB]':>8}")
    for ln in lines:
        print(f"{ln[0]:>8.0f} {ln[1]:>5.0f} {ln[2]:>3d} {ln[3]:>10.2f} {ln[4]:>11.2f} {ln[5]:>8.2f}")
    return EXIT_OK


# -- sweep -------------------------------------------------------------------

def cmd_sweep(args) -> int:
    cfg = resolve_scenario(args)
    algos = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    spec = SweepSpec(axis=args.axis, values=tuple(_parse_values(args.values)), algorithms=algos,
                     trials=args.trials, base=cfg, power=load_power_model(args.power_profile))
    records = run_sweep(spec, workers=args.workers)
    if args.out:
        emit(records, args.out, args.format, include_wall=not args.no_wall_time)
    for s in summarize(records):
        fail = f"  ({s.n_failed} failed)" if s.n_failed else ""
        print(f"{args.axis}={s.axis:g} {s.algo:<14} sum SE {s.se_mean:8.3f} +/- {s.se_ci:.3f}   "
              f"EE {s.ee_mean:8.4f}  n={s.n}{fail}")
    return EXIT_SOLVER if any(not r.ok for r in records) else EXIT_OK


# -- convergence -------------------------------------------------------------

def cmd_convergence(args) -> int:
    cfg = resolve_scenario(args)
    runs = convergence_study(cfg, args.trials)
    if args.trace_out:
        with Path(args.trace_out).open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["trial", "t", "n", "objective", "residual"])
            for run in runs:
                for t, n, obj, res in run.inner_trace:
                    wr.writerow([run.trial, t, n, f"{obj:.12g}", f"{res:.12g}"])
    for run in runs:
        inner = ",".join(str(i) for i in run.iters_inner)
        print(f"trial {run.trial}: outer {run.iters_outer}, inner [{inner}], "
              f"sum SE {run.trace[0]:.3f} -> {run.trace[-1]:.3f}")
    outer = np.array([r.iters_outer for r in runs])
    print(f"outer iterations: median {np.median(outer):g}, max {outer.max()}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdquant", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze-bits", help="minimum ADC bits and dynamic-range margin")
    a.add_argument("--p-dl-dbm", type=float, default=24.0)
    a.add_argument("--p-ul-dbm", type=float, default=23.0)
    a.add_argument("--kappa-a-db", type=float, default=-60.0)
    a.add_argument("--rho-ul-db", type=float, default=-90.0)
    a.add_argument("--noise-dbm", type=float, default=None,
                   help="thermal noise at the ADC (default: ignored); "
                        f"500 MHz with 5 dB NF is {thermal_noise_dbm(500e6, 5.0):.2f} dBm")
    a.add_argument("--bits-range", default="1:12", help="bits to tabulate, e.g. 4:9")
    a.set_defaults(func=cmd_analyze_bits)

    t = sub.add_parser("table1", help="ADC noise, input range and dynamic range table")
    t.add_argument("--p-ul-dbm", type=float, default=20.0)
    t.add_argument("--trials", type=int, default=10_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", type=Path)
    t.set_defaults(func=cmd_table1)

    s = sub.add_parser("sweep", help="Monte-Carlo sweep of one parameter")
    _scenario_args(s)
    s.add_argument("--axis", choices=AXES, required=True)
    s.add_argument("--values", required=True, help="comma list or inclusive range a:b[:step]")
    s.add_argument("--algorithms", default="proposed-fd,proposed-hd",
                   help=f"comma list from {', '.join(ALGORITHMS)}")
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--power-profile", type=Path, help="circuit power file with a [power] section")
    s.add_argument("--out", type=Path)
    s.add_argument("--format", choices=("csv", "gnuplot"), default="csv")
    s.add_argument("--no-wall-time", action="store_true", help="leave the wall_ms column empty")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("convergence", help="objective trace of the proposed alternation")
    _scenario_args(c)
    c.add_argument("--trials", type=int, default=1)
    c.add_argument("--trace-out", type=Path, help="CSV of (trial, t, n, objective, residual)")
    c.set_defaults(func=cmd_convergence)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"fdquant: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"fdquant: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
