"""
Monte-Carlo sweep driver, aggregation and file output.

A sweep varies one scenario parameter over a list of values. Every trial
index owns one random stream, so all algorithms and all axis values of the
same trial see the same user drops and fading (whenever the dimensions
agree), which makes the algorithm comparison paired.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .beamforming import SolverOptions, alternate, qrzf_qmmse
from .channel import sample_channels
from .energy import PowerModel, energy_efficiency, load_power_model, total_power
from .linkmodel import LinkSetup, link_budget
from .scenario import ScenarioConfig, desk_defaults, rng_stream

__all__ = [
    "AXES",
    "ALGORITHMS",
    "SweepSpec",
    "SweepRecord",
    "Summary",
    "apply_axis",
    "run_trial",
    "run_sweep",
    "summarize",
    "emit",
    "read_csv",
    "convergence_study",
]

log = logging.getLogger(__name__)

AXES = ("bits", "kappa_a", "n_antennas", "p_dl", "d_cci")
ALGORITHMS = ("proposed-fd", "qrzf-qmmse-fd", "proposed-hd", "qrzf-hd")
CSV_HEADER = ["axis", "algo", "trial", "seed", "se_dl_sum", "se_ul_sum", "se_total", "ee",
              "iters_outer", "iters_inner_total", "wall_ms"]
Z95 = 1.959963984540054


def _sig(x: float) -> float:
    """Round to the 12 significant digits kept in CSV files."""
    return float(f"{x:.12g}")


def apply_axis(base: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """Scenario with the swept parameter set to ``value``."""
    if axis == "bits":
        return base.with_bits(value)
    if axis == "kappa_a":
        return base.replace(kappa_a_db=float(value))
    if axis == "n_antennas":
        return base.replace(n_tx=int(value), n_rx=int(value))
    if axis == "p_dl":
        return base.replace(p_dl_dbm=float(value))
    if axis == "d_cci":
        return base.replace(d_cci_m=float(value))
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {AXES}")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    algorithms: tuple = ("proposed-fd", "proposed-hd")
    trials: int = 50
    base: ScenarioConfig = field(default_factory=desk_defaults)
    power: PowerModel | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; choose from {AXES}")
        values = tuple(self.values)
        if not values:
            raise ValueError("sweep needs at least one value")
        if list(values) != sorted(values):
            raise ValueError("sweep values must be sorted")
        object.__setattr__(self, "values", values)
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}; choose from {ALGORITHMS}")
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class SweepRecord:
    """One (axis value, algorithm, trial) outcome. Floats carry 12 significant digits."""

    axis: float
    algo: str
    trial: int
    seed: int
    se_dl: tuple
    se_ul: tuple
    se_total: float
    ee: float
    iters_outer: int
    iters_inner_total: int
    wall_ms: float
    ok: bool = True

    @property
    def se_dl_sum(self) -> float:
        return _sig(sum(self.se_dl)) if self.ok else math.nan

    @property
    def se_ul_sum(self) -> float:
        return _sig(sum(self.se_ul)) if self.ok else math.nan

    def key(self):
        return (self.axis, ALGORITHMS.index(self.algo), self.trial)


def _failed(value, algo, trial, seed, k_dl, k_ul, wall_ms) -> SweepRecord:
    nan = math.nan
    return SweepRecord(value, algo, trial, seed, (nan,) * k_dl, (nan,) * k_ul, nan, nan, 0, 0,
                       _sig(wall_ms), ok=False)


def run_trial(base: ScenarioConfig, axis: str, value, algorithms: Sequence[str], trial: int,
              power: PowerModel | None = None) -> list[SweepRecord]:
    """All requested algorithms on the channel draw of one trial."""
    power = power or load_power_model()
    out = []
    for algo in algorithms:
        cfg = apply_axis(base, axis, value)
        if algo.endswith("-hd"):
            cfg = cfg.replace(duplex_mode="HD")
        ch = sample_channels(cfg, rng_stream(base.seed, trial))
        t0 = time.perf_counter()
        try:
            setup = LinkSetup.from_config(cfg)
            opt = SolverOptions.from_config(cfg)
            state = alternate(ch, setup, opt) if algo.startswith("proposed") else qrzf_qmmse(ch, setup, opt)
            terms = link_budget(ch, state.w, state.f, setup)
            se_dl = np.log2(1.0 + terms.dl_sinr)
            se_ul = np.log2(1.0 + terms.ul_sinr)
            if setup.half_duplex:
                total = (1.0 - setup.hd_lambda) * se_dl.sum() + setup.hd_lambda * se_ul.sum()
            else:
                total = se_dl.sum() + se_ul.sum()
            ee = energy_efficiency(total, *total_power(cfg, power))
            if not (np.all(np.isfinite(se_dl)) and np.all(np.isfinite(se_ul)) and math.isfinite(ee)):
                raise FloatingPointError("non-finite spectral efficiency")
        except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            wall = 1e3 * (time.perf_counter() - t0)
            log.error("trial %d, %s=%s, %s failed: %s", trial, axis, value, algo, exc)
            out.append(_failed(float(value), algo, trial, base.seed, cfg.k_dl, cfg.k_ul, wall))
            continue
        wall = 1e3 * (time.perf_counter() - t0)
        out.append(SweepRecord(
            axis=float(value), algo=algo, trial=trial, seed=base.seed,
            se_dl=tuple(_sig(x) for x in se_dl), se_ul=tuple(_sig(x) for x in se_ul),
            se_total=_sig(total), ee=_sig(ee),
            iters_outer=state.iters_outer, iters_inner_total=state.iters_inner_total,
            wall_ms=_sig(wall)))
    return out


def _task(args):
    return run_trial(*args)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRecord]:
    """Run every (value, trial) pair; ``workers > 1`` uses a process pool.

    Records come back sorted by (axis value, algorithm, trial) regardless of
    the execution order.
    """
    power = spec.power or load_power_model()
    tasks = [(spec.base, spec.axis, v, spec.algorithms, t, power)
             for v in spec.values for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        chunks = [_task(t) for t in tasks]
    records = [r for chunk in chunks for r in chunk]
    return sorted(records, key=SweepRecord.key)


# -- aggregation -------------------------------------------------------------

@dataclass(frozen=True)
class Summary:
    axis: float
    algo: str
    n: int
    n_failed: int
    se_mean: float
    se_ci: float
    ee_mean: float
    ee_ci: float
    ci_valid: bool


def _mean_ci(x: np.ndarray):
    mean = float(np.mean(x))
    if x.size < 2:
        return mean, 0.0
    return mean, float(Z95 * np.std(x, ddof=1) / math.sqrt(x.size))


def summarize(records: Iterable[SweepRecord]) -> list[Summary]:
    """Mean and normal-approximation 95% half-width per (axis value, algorithm).

    Failed records are counted but excluded. A group with a single valid
    record reports a zero-width interval with ``ci_valid=False``.
    """
    groups: dict = {}
    for r in records:
        groups.setdefault((r.axis, r.algo), []).append(r)
    if not groups:
        raise ValueError("no records to summarize")
    out = []
    for (axis, algo), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], ALGORITHMS.index(kv[0][1]))):
        good = [r for r in rs if r.ok]
        if not good:
            raise ValueError(f"every trial failed for {algo} at {axis}")
        se_m, se_c = _mean_ci(np.array([r.se_total for r in good]))
        ee_m, ee_c = _mean_ci(np.array([r.ee for r in good]))
        out.append(Summary(axis, algo, len(good), len(rs) - len(good), se_m, se_c, ee_m, ee_c,
                           ci_valid=len(good) > 1))
    return out


# -- files -------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def emit(records: Sequence[SweepRecord], path, fmt: str = "csv", include_wall: bool = True) -> None:
    """Write raw records as CSV or per-algorithm aggregates for gnuplot.

    ``include_wall=False`` blanks the ``wall_ms`` column, which is the only
    field that is not a function of the inputs.
    """
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            if fmt == "csv":
                _write_csv(records, fh, include_wall)
            elif fmt == "gnuplot":
                _write_gnuplot(records, fh)
            else:
                raise ValueError(f"unknown output format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _write_csv(records, fh, include_wall):
    k_dl = max((len(r.se_dl) for r in records), default=0)
    k_ul = max((len(r.se_ul) for r in records), default=0)
    header = CSV_HEADER + [f"se_dl_{k + 1}" for k in range(k_dl)] + [f"se_ul_{k + 1}" for k in range(k_ul)]
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(header)
    for r in records:
        row = [_fmt(r.axis), r.algo, r.trial, r.seed, _fmt(r.se_dl_sum), _fmt(r.se_ul_sum),
               _fmt(r.se_total), _fmt(r.ee), r.iters_outer, r.iters_inner_total,
               _fmt(r.wall_ms) if include_wall else ""]
        row += [_fmt(x) for x in r.se_dl] + [""] * (k_dl - len(r.se_dl))
        row += [_fmt(x) for x in r.se_ul] + [""] * (k_ul - len(r.se_ul))
        wr.writerow(row)


def _write_gnuplot(records, fh):
    summary = summarize(records)
    for algo in ALGORITHMS:
        rows = [s for s in summary if s.algo == algo]
        if not rows:
            continue
        fh.write(f"# {algo}\n# axis se_mean se_ci95 ee_mean ee_ci95 n\n")
        for s in rows:
            fh.write(" ".join(_fmt(x) for x in (s.axis, s.se_mean, s.se_ci, s.ee_mean, s.ee_ci)) + f" {s.n}\n")
        fh.write("\n\n")


def read_csv(path) -> list[SweepRecord]:
    """Parse a file written by :func:`emit` with ``fmt="csv"``."""
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            dl = tuple(float(row[k]) for k in sorted((k for k in row if k.startswith("se_dl_") and k != "se_dl_sum"),
                                                     key=lambda k: int(k.rsplit("_", 1)[1])) if row[k] != "")
            ul = tuple(float(row[k]) for k in sorted((k for k in row if k.startswith("se_ul_") and k != "se_ul_sum"),
                                                     key=lambda k: int(k.rsplit("_", 1)[1])) if row[k] != "")
            total = float(row["se_total"])
            out.append(SweepRecord(
                axis=float(row["axis"]), algo=row["algo"], trial=int(row["trial"]), seed=int(row["seed"]),
                se_dl=dl, se_ul=ul, se_total=total, ee=float(row["ee"]),
                iters_outer=int(row["iters_outer"]), iters_inner_total=int(row["iters_inner_total"]),
                wall_ms=float(row["wall_ms"]) if row["wall_ms"] else math.nan,
                ok=not math.isnan(total)))
    return out


# -- convergence -------------------------------------------------------------

@dataclass
class ConvergenceRun:
    trial: int
    iters_outer: int
    iters_inner: list
    trace: list          # sum SE after initialization and after each outer iteration
    inner_trace: list    # (t, n, log2 lambda, step)


def convergence_study(config: ScenarioConfig, trials: int = 1) -> list[ConvergenceRun]:
    """Run the proposed alternation on ``trials`` draws and keep every trace."""
    setup = None
    runs = []
    opt = SolverOptions.from_config(config)
    for t in range(trials):
        ch = sample_channels(config, rng_stream(config.seed, t))
        setup = setup or LinkSetup.from_config(config)
        st = alternate(ch, setup, opt)
        runs.append(ConvergenceRun(t, st.iters_outer, list(st.iters_inner), list(st.trace), list(st.inner_trace)))
    return runs

