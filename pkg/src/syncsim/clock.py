"""Per-node local clocks.

A node's local time is modelled as

    T_i(t) = t + alpha_i + beta_i(t) + nu_i(t)

with ``alpha`` a static offset, ``beta`` a slow dynamic bias (temperature
driven group delay, off by default because the array is frequency
syntonized) and ``nu`` zero-mean read noise.

Time representation
-------------------
All times are float64 seconds measured from the simulation epoch (t = 0 at
run start). A run spans well under a second of simulated time, and the
spacing of doubles near 1 s is about 2.2e-16 s, so the representation keeps
sub-femtosecond resolution, three orders of magnitude below the picosecond
effects being studied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ContractViolation

#: Default PPS coarse-alignment spread (seconds).
DEFAULT_COARSE_WINDOW = 20e-9
#: Offsets are drawn uniformly within +/- this many window_std.
COARSE_HALF_WIDTH = 2.5


@dataclass(frozen=True)
class NoDrift:
    kind = "none"

    def value(self, t: float, clock: "LocalClock") -> float:
        return 0.0


@dataclass(frozen=True)
class LinearDrift:
    """beta(t) = slope * t."""

    slope: float
    kind = "linear"

    def value(self, t: float, clock: "LocalClock") -> float:
        return self.slope * t


@dataclass(frozen=True)
class RandomWalkDrift:
    """Piecewise-constant random walk, one Gaussian step per ``step_interval``."""

    step_std: float
    step_interval: float = 1.5e-3
    kind = "random_walk"

    def value(self, t: float, clock: "LocalClock") -> float:
        return clock._walk_value(max(0, int(t // self.step_interval)), self.step_std)


BetaModel = Union[NoDrift, LinearDrift, RandomWalkDrift]


def drift_from_dict(desc: dict | None) -> BetaModel:
    """Build a drift model from its config form, e.g. ``{"kind": "linear", "slope": 1e-12}``."""
    if not desc or desc.get("kind", "none") == "none":
        return NoDrift()
    kind = desc["kind"]
    if kind == "linear":
        return LinearDrift(float(desc["slope"]))
    if kind == "random_walk":
        return RandomWalkDrift(float(desc["step_std"]), float(desc.get("step_interval", 1.5e-3)))
    raise ContractViolation(f"unknown drift model {kind!r}")


class LocalClock:
    """Local clock of one node.

    Parameters
    ----------
    node_id : int
        Node index in ``[0, n)``.
    alpha : float
        Static offset in seconds.
    beta_model : NoDrift | LinearDrift | RandomWalkDrift
        Slow dynamic bias.
    nu_std : float
        Standard deviation of the read noise in seconds.
    rng_stream : int
        Identifier of the clock's random stream. Together with ``seed`` it
        fully determines every random draw the clock makes.
    seed : int
        Run-level seed the stream is derived from.
    """

    def __init__(
        self,
        node_id: int,
        alpha: float = 0.0,
        beta_model: BetaModel | None = None,
        nu_std: float = 0.0,
        rng_stream: int = 0,
        seed: int | Sequence[int] = 0,
    ):
        if nu_std < 0:
            raise ContractViolation("nu_std must be non-negative")
        self.node_id = int(node_id)
        self.alpha = float(alpha)
        self.beta_model = beta_model if beta_model is not None else NoDrift()
        self.nu_std = float(nu_std)
        self.rng_stream = int(rng_stream)
        entropy = list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]
        noise_ss, drift_ss = np.random.SeedSequence(entropy, spawn_key=(self.rng_stream,)).spawn(2)
        self._noise_rng = np.random.default_rng(noise_ss)
        self._drift_rng = np.random.default_rng(drift_ss)
        self._walk = [0.0]

    def __repr__(self) -> str:
        return (
            f"LocalClock(node_id={self.node_id}, alpha={self.alpha!r}, "
            f"beta_model={self.beta_model!r}, nu_std={self.nu_std!r})"
        )

    def _walk_value(self, m: int, step_std: float) -> float:
        # steps are drawn in epoch order regardless of query order
        while len(self._walk) <= m:
            self._walk.append(self._walk[-1] + self._drift_rng.normal(0.0, step_std))
        return self._walk[m]

    def beta(self, t: float) -> float:
        return self.beta_model.value(t, self)

    def bias(self, t: float) -> float:
        """Noiseless offset ``T_i(t) - t`` (the ground truth used for metrics)."""
        return self.alpha + self.beta(t)

    def read(self, t: float) -> float:
        """Local time at true time ``t``, including read noise."""
        nu = self._noise_rng.normal(0.0, self.nu_std) if self.nu_std > 0 else 0.0
        return t + self.bias(t) + nu

    def read_noiseless(self, t: float) -> float:
        return t + self.bias(t)

    def noise(self) -> float:
        """One draw of the read noise ``nu``."""
        return self._noise_rng.normal(0.0, self.nu_std) if self.nu_std > 0 else 0.0

    def true_time(self, local: float) -> float:
        """Invert the noiseless clock: the true time at which it shows ``local``."""
        if isinstance(self.beta_model, LinearDrift):
            return (local - self.alpha) / (1.0 + self.beta_model.slope)
        t = local - self.alpha
        for _ in range(3):
            t = local - self.bias(t)
        return t

    def apply_correction(self, correction: float) -> "LocalClock":
        """Add ``correction`` seconds to the static offset; returns the clock."""
        if not math.isfinite(correction):
            raise ContractViolation(f"non-finite clock correction {correction!r}")
        self.alpha += correction
        return self


def make_clocks(
    n: int,
    seed: int | Sequence[int] = 0,
    beta_model: BetaModel | None = None,
    nu_std: float = 0.0,
) -> list[LocalClock]:
    """``n`` zero-offset clocks, each on its own random stream."""
    return [LocalClock(i, 0.0, beta_model, nu_std, rng_stream=i, seed=seed) for i in range(n)]


def init_coarse_alignment(
    clocks: list[LocalClock],
    window_std: float = DEFAULT_COARSE_WINDOW,
    rng: np.random.Generator | None = None,
) -> list[LocalClock]:
    """Apply the one-off PPS coarse alignment.

    Each clock's static offset is redrawn uniformly in
    ``[-2.5 * window_std, 2.5 * window_std]``. The receive capture windows are
    sized from the same bound, so every pulse lands inside its window.
    """
    if window_std < 0 or not math.isfinite(window_std):
        raise ContractViolation("window_std must be finite and non-negative")
    rng = rng if rng is not None else np.random.default_rng()
    half = COARSE_HALF_WIDTH * window_std
    offsets = rng.uniform(-half, half, size=len(clocks)) if half > 0 else np.zeros(len(clocks))
    for clock, a in zip(clocks, offsets):
        clock.alpha = float(a)
    return clocks


def max_coarse_offset(window_std: float) -> float:
    return COARSE_HALF_WIDTH * window_std
