"""Batch runners for the convergence, connectivity and SNR studies.

Every run owns an RNG tree derived from ``(master_seed, point_index, seed)``,
so results do not depend on execution order or on how many worker processes
are used. Per-link SNR jitter is drawn from ``(master_seed, seed)`` only: an
SNR sweep shifts one fixed nonuniform link profile rather than redrawing it
at each point.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .. import crlb
from ..channel import LinkChannel, all_pairs, build_links, db_to_linear, integrated_snr, jittered_snrs, line_delays
from ..clock import drift_from_dict, init_coarse_alignment, make_clocks
from ..consensus import IterationRecord, SteadyState, detect_convergence, run_epochs, steady_state
from ..errors import ConfigurationError, SyncSimError
from ..topology import (
    TopologyGraph,
    complete_graph,
    drop_k_policy,
    max_edges,
    random_c_policy,
    static_policy,
)
from ..twtt import ExchangeContext
from ..waveform import generate_two_tone
from .config import ExperimentConfig, parse_pair

SCHEMA = "#schema=1"
_JITTER_STREAM = 1_000_003


@dataclass
class RunResult:
    seed: int
    point: int
    records: list[IterationRecord]
    initial_biases: np.ndarray
    links: dict[tuple[int, int], LinkChannel]
    zeta_sq: float
    pulse_len: int

    @property
    def initial_mean(self) -> float:
        return float(np.mean(self.initial_biases))

    def link_crlb_var(self) -> dict[tuple[int, int], float]:
        return {p: _crlb_var(self.zeta_sq, self.pulse_len, l) for p, l in self.links.items()}

    def crlb_average(self) -> float:
        """Average single-link bound over all links with finite SNR (0 if noiseless)."""
        snrs = [
            db_to_linear(integrated_snr(l, self.pulse_len))
            for l in self.links.values()
            if math.isfinite(l.snr_per_sample_db)
        ]
        return crlb.crlb_average(self.zeta_sq, snrs) if snrs else 0.0


def _crlb_var(zeta_sq: float, pulse_len: int, link: LinkChannel) -> float:
    if not math.isfinite(link.snr_per_sample_db):
        return 0.0
    return crlb.crlb_single(zeta_sq, db_to_linear(integrated_snr(link, pulse_len)))


def _snr_value(v: Any) -> float:
    return math.inf if v is None else float(v)


def link_snrs(config: ExperimentConfig, seed: int) -> dict[tuple[int, int], float]:
    pairs = all_pairs(config.n)
    s = config.snr
    if s["kind"] == "uniform":
        return {p: _snr_value(s.get("db")) for p in pairs}
    if s["kind"] == "jittered":
        rng = np.random.default_rng(np.random.SeedSequence(config.master_seed, spawn_key=(_JITTER_STREAM, seed)))
        return jittered_snrs(pairs, float(s["center_db"]), float(s["spread_db"]), rng)
    table = {parse_pair(k): _snr_value(v) for k, v in s.get("db", {}).items()}
    default = _snr_value(s.get("default_db"))
    return {p: table.get(p, default) for p in pairs}


def _delays(config: ExperimentConfig) -> dict[tuple[int, int], float]:
    delays = line_delays(config.n, config.spacing)
    for k, v in (config.delays or {}).items():
        delays[parse_pair(k)] = float(v)
    return delays


def _policy(config: ExperimentConfig, rng: np.random.Generator):
    t = config.topology
    if t["kind"] == "static":
        if "edges" in t:
            return static_policy(TopologyGraph.from_edges(config.n, t["edges"]))
        return static_policy(complete_graph(config.n))
    if t["kind"] == "random_C":
        return random_c_policy(config.n, int(t["C"]), rng)
    return drop_k_policy(config.n, int(t["k"]), rng)


def simulate(config: ExperimentConfig, seed: int, point: int = 0) -> RunResult:
    """One full run of ``config.iterations`` epochs."""
    root = np.random.SeedSequence(config.master_seed, spawn_key=(point, seed))
    coarse_ss, clock_ss, topo_ss, chan_ss = root.spawn(4)

    wf = config.waveform
    template = generate_two_tone(wf.bandwidth, wf.duration, wf.sample_rate)
    delays = _delays(config)
    links = build_links(config.n, link_snrs(config, seed), delays)
    ctx = ExchangeContext.for_array(template, config.coarse_window, max(delays.values()), config.upsample)

    clocks = make_clocks(
        config.n,
        seed=[int(x) for x in clock_ss.generate_state(2)],
        beta_model=drift_from_dict(config.drift),
        nu_std=config.nu_std,
    )
    init_coarse_alignment(clocks, config.coarse_window, np.random.default_rng(coarse_ss))
    initial = np.array([c.bias(0.0) for c in clocks])
    link_rngs = {p: np.random.default_rng(s) for p, s in zip(sorted(links), chan_ss.spawn(len(links)))}

    records = run_epochs(
        _policy(config, np.random.default_rng(topo_ss)),
        clocks,
        links,
        ctx,
        config.mode,
        config.iterations,
        link_rngs,
        config.slot_duration,
    )
    return RunResult(seed, point, records, initial, links, ctx.zeta_sq, len(template))


def _simulate_task(args):
    config, seed, point = args
    return simulate(config, seed, point)


def worker_count() -> int:
    raw = os.environ.get("SYNC_SIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"SYNC_SIM_THREADS must be an integer, got {raw!r}")


def run_many(tasks: Sequence[tuple[ExperimentConfig, int, int]]) -> list[RunResult]:
    """Run tasks, in parallel when SYNC_SIM_THREADS > 1; output order follows input order."""
    workers = min(worker_count(), len(tasks))
    if workers <= 1:
        return [_simulate_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_task, tasks))


def convergence_threshold(config: ExperimentConfig, result: RunResult) -> float:
    conv = config.convergence
    if conv.threshold is not None:
        return conv.threshold
    avg = result.crlb_average()
    return conv.crlb_multiple * math.sqrt(avg) if avg > 0 else conv.noiseless_threshold


def steady_window_start(config: ExperimentConfig) -> int:
    return min(config.steady_after, config.iterations // 2)


# ---------------------------------------------------------------------------
# CSV helpers


def _fmt(x: Any) -> str:
    if isinstance(x, float):
        if not math.isfinite(x):
            raise SyncSimError(f"refusing to write non-finite value {x!r}")
        return repr(float(x))
    return str(x)


def write_csv(path: str | Path | None, kind: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Write a schema-tagged CSV; returns its text. ``path=None`` only renders."""
    buf = io.StringIO()
    buf.write(f"{SCHEMA} kind={kind}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    return text


# ---------------------------------------------------------------------------
# Studies


@dataclass
class ConvergenceResult:
    runs: list[RunResult]
    steady: list[SteadyState | None]
    csv_text: str


def run_convergence(config: ExperimentConfig, out: str | Path | None = None) -> ConvergenceResult:
    """Per-iteration relative biases (vs node 0) and their mean for each seed."""
    runs = run_many([(config, s, 0) for s in config.seeds])
    after = steady_window_start(config)
    n = config.n
    header = ["seed", "iteration", "active_edges", "average_bias", "mean_bias", "spread", "max_abs_offset", "invalid"]
    header += [f"rel_bias_{i}" for i in range(1, n)]
    rows = []
    steady = []
    for r in runs:
        rel0 = r.initial_biases[1:] - r.initial_biases[0]
        rows.append(
            [r.seed, 0, 0, float(np.mean(rel0)), r.initial_mean, float(np.ptp(r.initial_biases)), 0.0, 0]
            + [float(x) for x in rel0]
        )
        for rec in r.records:
            rows.append(
                [r.seed, rec.k, rec.active_edges, rec.average_bias, rec.mean_bias, rec.spread, rec.max_abs_offset, rec.invalid]
                + [float(x) for x in rec.relative_biases]
            )
        steady.append(steady_state(r.records, r.initial_mean, after) if config.iterations - after >= 2 else None)
    text = write_csv(out, "convergence", header, rows)
    return ConvergenceResult(runs, steady, text)


@dataclass
class ConnectivityPoint:
    C: int
    connectivity: float
    iterations: list[int | None]
    threshold: float
    horizon: int

    @property
    def censored(self) -> int:
        return sum(v is None for v in self.iterations)

    @property
    def mean_iterations(self) -> float:
        """Seed average, counting censored runs as ``horizon + 1``."""
        return float(np.mean([self.horizon + 1 if v is None else v for v in self.iterations]))


@dataclass
class ConnectivityResult:
    points: list[ConnectivityPoint]
    csv_text: str


def run_connectivity_sweep(
    config: ExperimentConfig, c_values: Sequence[int], out: str | Path | None = None
) -> ConnectivityResult:
    """Seed-averaged iterations-to-converge for each active-link count C."""
    total = max_edges(config.n)
    for c in c_values:
        if not 1 <= c <= total:
            raise ConfigurationError(f"C={c} outside [1, {total}]")
    tasks = []
    for p, c in enumerate(c_values):
        cfg = config.with_overrides(topology={"kind": "random_C", "C": int(c)})
        tasks += [(cfg, s, p) for s in config.seeds]
    runs = run_many(tasks)

    points = []
    rows = []
    per = len(config.seeds)
    for p, c in enumerate(c_values):
        chunk = runs[p * per : (p + 1) * per]
        thr = convergence_threshold(config, chunk[0])
        its = [detect_convergence(r.records, thr, config.convergence.window) for r in chunk]
        pt = ConnectivityPoint(int(c), c / total, its, thr, config.iterations)
        points.append(pt)
        for r, v in zip(chunk, its):
            rows.append(
                [pt.C, pt.connectivity, r.seed, config.iterations + 1 if v is None else v, int(v is None), thr, pt.mean_iterations]
            )
    header = ["C", "connectivity", "seed", "iteration", "censored", "threshold", "mean_iterations"]
    return ConnectivityResult(points, write_csv(out, "connectivity", header, rows))


@dataclass
class SnrPoint:
    snr_db: float
    runs: list[RunResult]
    steady: list[SteadyState]

    @property
    def measured_std(self) -> float:
        """sqrt of the seed- and pair-averaged variance of measured offsets."""
        return math.sqrt(float(np.mean([s.measured_std**2 for s in self.steady])))

    @property
    def truth_std(self) -> float:
        return math.sqrt(float(np.mean([s.truth_std**2 for s in self.steady])))

    @property
    def crlb_std(self) -> float:
        return math.sqrt(float(np.mean([r.crlb_average() for r in self.runs])))

    @property
    def min_integrated_snr_db(self) -> float:
        return min(integrated_snr(l, r.pulse_len) for r in self.runs for l in r.links.values())

    def link_std(self) -> dict[tuple[int, int], float]:
        """Per-link measured offset std, pooled over seeds."""
        out: dict[tuple[int, int], list[float]] = {}
        for s in self.steady:
            for pair, v in s.pair_std.items():
                out.setdefault(pair, []).append(v**2)
        return {p: math.sqrt(float(np.mean(v))) for p, v in out.items()}

    def link_crlb_std(self) -> dict[tuple[int, int], float]:
        acc: dict[tuple[int, int], list[float]] = {}
        for r in self.runs:
            for pair, v in r.link_crlb_var().items():
                acc.setdefault(pair, []).append(v)
        return {p: math.sqrt(float(np.mean(v))) for p, v in acc.items()}


@dataclass
class SnrResult:
    points: list[SnrPoint]
    csv_text: str


def run_snr_sweep(
    config: ExperimentConfig,
    snr_values_db: Sequence[float],
    jitter_db: float | None = None,
    out: str | Path | None = None,
) -> SnrResult:
    """Steady-state offset std against the average CRLB at each per-sample SNR."""
    if not snr_values_db:
        raise ConfigurationError("SNR sweep needs at least one SNR value")
    after = steady_window_start(config)
    if config.iterations - after < 2:
        raise ConfigurationError("SNR sweep needs at least two iterations after the steady-state start")
    tasks = []
    for p, snr in enumerate(snr_values_db):
        if jitter_db:
            snr_cfg = {"kind": "jittered", "center_db": float(snr), "spread_db": float(jitter_db)}
        else:
            snr_cfg = {"kind": "uniform", "db": float(snr)}
        cfg = config.with_overrides(snr=snr_cfg)
        tasks += [(cfg, s, p) for s in config.seeds]
    runs = run_many(tasks)

    per = len(config.seeds)
    points = []
    rows = []
    for p, snr in enumerate(snr_values_db):
        chunk = runs[p * per : (p + 1) * per]
        steady = [steady_state(r.records, r.initial_mean, after) for r in chunk]
        pt = SnrPoint(float(snr), chunk, steady)
        points.append(pt)
        for r, s in zip(chunk, steady):
            invalid = sum(rec.invalid for rec in r.records)
            rows.append(
                [pt.snr_db, r.seed, config.iterations, s.measured_std, math.sqrt(r.crlb_average()), s.truth_std, invalid, pt.measured_std, pt.crlb_std]
            )
    header = ["snr_db", "seed", "iteration", "measured_std", "crlb_std", "truth_std", "invalid_exchanges", "point_measured_std", "point_crlb_std"]
    return SnrResult(points, write_csv(out, "snr", header, rows))
