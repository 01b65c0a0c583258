"""Offset-matrix assembly and the decentralized average-consensus time update.

Each epoch every node i applies

    t_i(k) = t_i(k-1) + sum_j w_ij * delta_ji(k-1)

where ``delta_ji`` is the offset of neighbour j measured by two-way time
transfer (positive when j is ahead). With a doubly stochastic ``W`` and an
antisymmetric offset matrix the corrections sum to zero, so the network
average is preserved exactly and every clock is pulled toward it.

Worked two-node example: clocks at 0 and 10 ns, single edge, so
``w_01 = w_10 = 1/2``. Node 0 measures ``delta_10 = +10 ns`` and corrects by
+5 ns; node 1 measures ``delta_01 = -10 ns`` and corrects by -5 ns. Both land
on 5 ns, the initial mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import LinkChannel
from .clock import LocalClock
from .errors import ContractViolation, InputError
from .topology import TopologyPolicy, mh_mixing_matrix
from .twtt import ExchangeContext, Mode, TimestampQuad, build_schedule, offset_from_quad, run_schedule


def assemble_offsets(quads: Sequence[TimestampQuad], n: int) -> np.ndarray:
    """n x n offset matrix; ``D[j, i]`` is the offset of j relative to i.

    Each exchange fills both ``D[j, i]`` and ``D[i, j] = -D[j, i]`` from its
    own measurement. Invalid quads and unmeasured pairs stay 0.
    """
    delta = np.zeros((n, n))
    seen = set()
    for q in quads:
        i, j = q.pair
        key = (min(i, j), max(i, j))
        if key in seen:
            raise InputError(f"duplicate measurement for pair {key}")
        seen.add(key)
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise InputError(f"quad pair {q.pair} invalid for n={n}")
        if not q.valid:
            continue
        d = offset_from_quad(q)
        delta[j, i] = d
        delta[i, j] = -d
    return delta


def local_correction(i: int, w_row: np.ndarray, delta_col: np.ndarray) -> float:
    """Node i's update from its own row of W and its own measurements only."""
    nbrs = np.flatnonzero(w_row)
    nbrs = nbrs[nbrs != i]
    return float(np.dot(w_row[nbrs], delta_col[nbrs]))


def consensus_step(delta: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Correction vector; entry i is ``sum_j w_ij * delta[j, i]``."""
    delta = np.asarray(delta, dtype=float)
    w = np.asarray(w, dtype=float)
    if delta.ndim != 2 or delta.shape[0] != delta.shape[1] or delta.shape != w.shape:
        raise ContractViolation(f"shape mismatch: offsets {delta.shape} vs weights {w.shape}")
    return np.array([local_correction(i, w[i], delta[:, i]) for i in range(w.shape[0])])


@dataclass
class IterationRecord:
    k: int
    biases: np.ndarray  # per node, local minus true time (s)
    active_edges: int
    max_abs_offset: float  # over measured links this epoch
    offsets: dict[tuple[int, int], float] = field(default_factory=dict)  # delta_ji keyed (i, j)
    invalid: int = 0

    @property
    def relative_biases(self) -> np.ndarray:
        """Bias of nodes 1..n-1 relative to node 0."""
        return self.biases[1:] - self.biases[0]

    @property
    def average_bias(self) -> float:
        return float(np.mean(self.relative_biases))

    @property
    def mean_bias(self) -> float:
        return float(np.mean(self.biases))

    @property
    def spread(self) -> float:
        return float(np.max(self.biases) - np.min(self.biases))


def run_epochs(
    policy: TopologyPolicy,
    clocks: Sequence[LocalClock],
    links: dict[tuple[int, int], LinkChannel],
    ctx: ExchangeContext,
    mode: Mode,
    iterations: int,
    rngs: dict[tuple[int, int], np.random.Generator],
    slot_duration: float,
    epoch_interval: float | None = None,
) -> list[IterationRecord]:
    """Run ``iterations`` synchronization epochs and record ground-truth metrics.

    Epoch k starts at local time ``(k - 1) * epoch_interval`` on every node
    (default: the length of a full-graph schedule). Biases are read from the
    clocks' noiseless state at the end of the epoch.
    """
    if iterations < 1:
        raise ContractViolation("iterations must be >= 1")
    n = len(clocks)
    if epoch_interval is None:
        epoch_interval = n * (n - 1) * slot_duration
    records = []
    for k in range(1, iterations + 1):
        graph = policy(k)
        if graph.n != n:
            raise ContractViolation("topology size does not match clock count")
        w = mh_mixing_matrix(graph)
        start = (k - 1) * epoch_interval
        schedule = build_schedule(graph.edges, slot_duration)
        quads = run_schedule(schedule, links, clocks, mode, ctx, rngs, start)
        delta = assemble_offsets(quads, n)
        corrections = consensus_step(delta, w)
        for clock, c in zip(clocks, corrections):
            clock.apply_correction(c)

        t_end = k * epoch_interval
        offsets = {q.pair: offset_from_quad(q) for q in quads if q.valid}
        records.append(
            IterationRecord(
                k=k,
                biases=np.array([c.bias(t_end) for c in clocks]),
                active_edges=len(graph.edges),
                max_abs_offset=max((abs(v) for v in offsets.values()), default=0.0),
                offsets=offsets,
                invalid=sum(not q.valid for q in quads),
            )
        )
    return records


def detect_convergence(records: Sequence[IterationRecord], threshold: float, window: int = 3) -> int | None:
    """First iteration from which the bias spread stays below ``threshold`` for ``window`` iterations."""
    if not threshold > 0 or window < 1:
        raise ContractViolation("threshold must be > 0 and window >= 1")
    run = 0
    for idx, rec in enumerate(records):
        run = run + 1 if rec.spread < threshold else 0
        if run >= window:
            return records[idx - window + 1].k
    return None


@dataclass(frozen=True)
class SteadyState:
    measured_std: float  # sqrt of the pair-averaged variance of measured offsets
    measured_mean_std: float  # arithmetic mean of per-pair stds
    truth_std: float  # same statistic on ground-truth pairwise offsets
    mean_bias: float  # network-mean bias minus its initial value
    average_bias: float  # mean over the window of the bias relative to node 0
    samples: int
    pair_std: dict[tuple[int, int], float]


def steady_state(records: Sequence[IterationRecord], initial_mean: float, after: int = 50) -> SteadyState:
    """Precision and bias statistics over iterations ``k > after``."""
    window = [r for r in records if r.k > after]
    if len(window) < 2:
        raise ContractViolation(f"need at least two iterations after {after}")
    by_pair: dict[tuple[int, int], list[float]] = {}
    for r in window:
        for pair, d in r.offsets.items():
            by_pair.setdefault(pair, []).append(d)
    pair_var = {p: float(np.var(v, ddof=1)) for p, v in by_pair.items() if len(v) >= 2}
    if not pair_var:
        raise ContractViolation("no pair measured twice in the steady-state window")
    biases = np.array([r.biases for r in window])
    n = biases.shape[1]
    truth_var = [np.var(biases[:, j] - biases[:, i], ddof=1) for i in range(n) for j in range(i + 1, n)]
    return SteadyState(
        measured_std=math.sqrt(float(np.mean(list(pair_var.values())))),
        measured_mean_std=float(np.mean(np.sqrt(list(pair_var.values())))),
        truth_std=math.sqrt(float(np.mean(truth_var))),
        mean_bias=float(np.mean(biases.mean(axis=1)) - initial_mean),
        average_bias=float(np.mean([r.average_bias for r in window])),
        samples=len(window),
        pair_std={p: math.sqrt(v) for p, v in pair_var.items()},
    )
