"""Two-way time transfer over a TDMA schedule.

For a link (i, j) node i transmits first and node j answers in the next
slot. The four timestamps give the clock offset of j relative to i,

    delta_ji = ([T_j(rx_j) - T_i(tx_i)] - [T_i(rx_i) - T_j(tx_j)]) / 2,

in which the propagation delay cancels when the channel is reciprocal.
Transmit timestamps are the nodes' own scheduled emission times and carry no
error; all estimation error enters through the receive timestamps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from . import crlb
from .channel import LinkChannel, db_to_linear, integrated_snr, propagate
from .clock import LocalClock, max_coarse_offset
from .errors import EstimationError, InvalidQuadError, SchedulingError
from .waveform import (
    DEFAULT_UPSAMPLE,
    SampledWaveform,
    estimate_toa,
    mean_square_bandwidth,
    template_spectrum,
)

Mode = Literal["signal", "timestamp"]
DEFAULT_SLOT = 50e-6

# FFT-friendly capture lengths (2^a 3^b 5^c)
_FAST = sorted(
    2**a * 3**b * 5**c for a in range(16) for b in range(8) for c in range(6) if 2**a * 3**b * 5**c <= 1 << 20
)


class NegativeTofWarning(UserWarning):
    """Time-of-flight estimate came out negative (noise dominated)."""


@dataclass(frozen=True)
class TimestampQuad:
    t_rx_j: float
    t_tx_i: float
    t_rx_i: float
    t_tx_j: float
    pair: tuple[int, int]
    valid: bool = True
    reason: str = ""


@dataclass(frozen=True)
class Slot:
    index: int
    transmitter: int
    receivers: frozenset[int]


@dataclass(frozen=True)
class TdmaSchedule:
    slots: tuple[Slot, ...]
    slot_duration: float

    @property
    def duration(self) -> float:
        return len(self.slots) * self.slot_duration

    def __len__(self) -> int:
        return len(self.slots)


def canonical_edges(edges: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    return sorted({(min(e), max(e)) for e in edges})


def build_schedule(active_edges: Iterable[tuple[int, int]], slot_duration: float = DEFAULT_SLOT) -> TdmaSchedule:
    """Two consecutive slots per edge (i->j, then j->i), edges in (min, max) order."""
    edges = canonical_edges(active_edges)
    if not edges:
        raise SchedulingError("cannot schedule an empty edge set")
    if not slot_duration > 0:
        raise SchedulingError("slot duration must be positive")
    slots = []
    for i, j in edges:
        slots.append(Slot(len(slots), i, frozenset({j})))
        slots.append(Slot(len(slots), j, frozenset({i})))
    return TdmaSchedule(tuple(slots), slot_duration)


def offset_from_quad(q: TimestampQuad) -> float:
    """Offset of node j relative to node i (seconds)."""
    if not q.valid:
        raise InvalidQuadError(f"quad for pair {q.pair} is invalid: {q.reason}")
    return ((q.t_rx_j - q.t_tx_i) - (q.t_rx_i - q.t_tx_j)) / 2.0


def tof_from_quad(q: TimestampQuad) -> float:
    """One-way time of flight (seconds). Warns with NegativeTofWarning if negative."""
    if not q.valid:
        raise InvalidQuadError(f"quad for pair {q.pair} is invalid: {q.reason}")
    tof = ((q.t_rx_j - q.t_tx_i) + (q.t_rx_i - q.t_tx_j)) / 2.0
    if tof < 0:
        warnings.warn(f"negative time of flight {tof:.3e} s on {q.pair}", NegativeTofWarning, stacklevel=2)
    return tof


def check_quad(q: TimestampQuad, epoch_duration: float) -> TimestampQuad:
    """Flag a quad whose one-way differences are non-finite or exceed the epoch."""
    if not q.valid:
        return q
    for d in (q.t_rx_j - q.t_tx_i, q.t_rx_i - q.t_tx_j):
        if not math.isfinite(d) or abs(d) >= epoch_duration:
            return _invalid(q.pair, q.t_tx_i, q.t_tx_j, "one-way difference outside the epoch")
    return q


def _invalid(pair, t_tx_i, t_tx_j, reason) -> TimestampQuad:
    return TimestampQuad(math.nan, t_tx_i, math.nan, t_tx_j, pair, valid=False, reason=reason)


@dataclass
class ExchangeContext:
    """Waveform and receiver settings shared by every exchange of a run.

    ``guard`` samples are added on each side of the pulse in every capture
    window; the default covers twice the largest coarse offset plus the
    longest time of flight. The total window is rounded up to an FFT-friendly
    length.
    """

    template: SampledWaveform
    guard: int
    upsample: int = DEFAULT_UPSAMPLE
    size: int = field(init=False)
    zeta_sq: float = field(init=False)
    _tspec: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        need = len(self.template) + 2 * self.guard
        self.size = next(s for s in _FAST if s >= need)
        self.zeta_sq = mean_square_bandwidth(self.template)
        self._tspec = template_spectrum(self.template, self.size)

    @classmethod
    def for_array(
        cls,
        template: SampledWaveform,
        coarse_window: float,
        max_delay: float = 0.0,
        upsample: int = DEFAULT_UPSAMPLE,
    ) -> "ExchangeContext":
        span = 2 * max_coarse_offset(coarse_window) + max_delay
        guard = int(math.ceil(span * template.sample_rate)) + 4
        return cls(template, guard, upsample)

    def toa_std(self, link: LinkChannel) -> float:
        """Single-link CRLB standard deviation at the link's integrated SNR."""
        if math.isinf(link.snr_per_sample_db):
            return 0.0
        snr = db_to_linear(integrated_snr(link, len(self.template)))
        return math.sqrt(crlb.crlb_single(self.zeta_sq, snr))

    def receive(
        self,
        src: int,
        dst: int,
        t_local_tx: float,
        link: LinkChannel,
        clocks: Sequence[LocalClock],
        mode: Mode,
        rng: np.random.Generator,
    ) -> float:
        """Receive timestamp (dst's local time) for a pulse src emits at its local ``t_local_tx``."""
        t_emit = clocks[src].true_time(t_local_tx)
        if mode == "timestamp":
            arrival = t_emit + link.delay(src, dst)
            err = rng.normal(0.0, self.toa_std(link)) if self.toa_std(link) > 0 else 0.0
            return clocks[dst].read(arrival) + err
        if mode != "signal":
            raise ValueError(f"unknown exchange mode {mode!r}")
        fs = self.template.sample_rate
        local_start = t_local_tx - self.guard / fs
        rx = propagate(
            self.template.with_epoch(t_emit),
            link,
            (src, dst),
            rng,
            rx_start=clocks[dst].true_time(local_start),
            size=self.size,
        )
        est = estimate_toa(rx.with_epoch(local_start), self.template, self.upsample, tspec=self._tspec)
        return est.toa + clocks[dst].noise()


def exchange(
    i: int,
    j: int,
    link: LinkChannel,
    clocks: Sequence[LocalClock],
    mode: Mode,
    ctx: ExchangeContext,
    rng: np.random.Generator,
    t_tx_i: float = 0.0,
    t_tx_j: float | None = None,
) -> TimestampQuad:
    """One bidirectional exchange: i transmits at local ``t_tx_i``, j answers at local ``t_tx_j``.

    Estimation failures (ambiguous peak, pulse outside the capture window)
    produce a quad flagged invalid rather than an exception.
    """
    if t_tx_j is None:
        t_tx_j = t_tx_i + DEFAULT_SLOT
    pair = (i, j)
    try:
        t_rx_j = ctx.receive(i, j, t_tx_i, link, clocks, mode, rng)
        t_rx_i = ctx.receive(j, i, t_tx_j, link, clocks, mode, rng)
    except EstimationError as exc:
        return _invalid(pair, t_tx_i, t_tx_j, str(exc))
    return TimestampQuad(t_rx_j, t_tx_i, t_rx_i, t_tx_j, pair)


def run_schedule(
    schedule: TdmaSchedule,
    links: dict[tuple[int, int], LinkChannel],
    clocks: Sequence[LocalClock],
    mode: Mode,
    ctx: ExchangeContext,
    rngs: dict[tuple[int, int], np.random.Generator],
    epoch_start: float,
) -> list[TimestampQuad]:
    """Execute one synchronization epoch; slot ``s`` starts at local ``epoch_start + s * slot``."""
    quads = []
    slots = schedule.slots
    for k in range(0, len(slots), 2):
        fwd, back = slots[k], slots[k + 1]
        i, j = fwd.transmitter, back.transmitter
        t_i = epoch_start + fwd.index * schedule.slot_duration
        t_j = epoch_start + back.index * schedule.slot_duration
        q = exchange(i, j, links[(i, j)], clocks, mode, ctx, rngs[(i, j)], t_i, t_j)
        quads.append(check_quad(q, schedule.duration))
    return quads
