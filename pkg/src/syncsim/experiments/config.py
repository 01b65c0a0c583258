"""Experiment configuration (JSON) and its validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from ..errors import ConfigurationError, InputError
from ..topology import max_edges

MODES = ("signal", "timestamp")
TOPOLOGY_KINDS = ("static", "random_C", "drop_k")
SNR_KINDS = ("uniform", "jittered", "per_link")


@dataclass
class WaveformConfig:
    bandwidth: float = 40e6
    duration: float = 10e-6
    sample_rate: float = 200e6


@dataclass
class ConvergenceConfig:
    threshold: float | None = None  # None: 5x CRLB steady-state std, or 1 ps when noiseless
    window: int = 3
    crlb_multiple: float = 5.0
    noiseless_threshold: float = 1e-12


@dataclass
class ExperimentConfig:
    """Declarative description of a batch of synchronization runs.

    ``topology`` is ``{"kind": "static"}`` (complete graph, or ``"edges"``
    for an explicit edge list), ``{"kind": "random_C", "C": c}`` or
    ``{"kind": "drop_k", "k": k}``. ``snr`` is ``{"kind": "uniform", "db": x}``,
    ``{"kind": "jittered", "center_db": x, "spread_db": s}`` or
    ``{"kind": "per_link", "db": {"i-j": x, ...}, "default_db": y}``; every
    value is per-sample SNR in dB, ``null`` meaning noiseless.
    """

    n: int = 6
    mode: str = "signal"
    iterations: int = 80
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    master_seed: int = 0
    topology: dict[str, Any] = field(default_factory=lambda: {"kind": "static"})
    snr: dict[str, Any] = field(default_factory=lambda: {"kind": "uniform", "db": 33.0})
    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    coarse_window: float = 20e-9
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    slot_duration: float = 50e-6
    spacing: float = 0.45
    delays: dict[str, float] | None = None
    drift: dict[str, Any] = field(default_factory=lambda: {"kind": "none"})
    nu_std: float = 0.0
    steady_after: int = 50
    upsample: int = 32
    output_dir: str = "out"

    def __post_init__(self):
        if isinstance(self.waveform, dict):
            self.waveform = WaveformConfig(**self.waveform)
        if isinstance(self.convergence, dict):
            self.convergence = ConvergenceConfig(**self.convergence)
        self.validate()

    def validate(self) -> None:
        if self.n < 2:
            raise ConfigurationError("n must be >= 2")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if not self.seeds:
            raise ConfigurationError("seeds must be non-empty")
        wf = self.waveform
        if not (wf.sample_rate > 0 and 0 <= wf.bandwidth < wf.sample_rate):
            raise ConfigurationError("waveform bandwidth violates Nyquist")
        if round(wf.duration * wf.sample_rate) < 2:
            raise ConfigurationError("pulse shorter than two samples")
        if self.coarse_window < 0 or self.slot_duration <= 0:
            raise ConfigurationError("coarse_window must be >= 0 and slot_duration > 0")
        if self.convergence.window < 1:
            raise ConfigurationError("convergence window must be >= 1")
        if self.convergence.threshold is not None and not self.convergence.threshold > 0:
            raise ConfigurationError("convergence threshold must be positive")
        kind = self.topology.get("kind")
        if kind not in TOPOLOGY_KINDS:
            raise ConfigurationError(f"topology kind must be one of {TOPOLOGY_KINDS}")
        if kind == "random_C" and not 1 <= int(self.topology.get("C", 0)) <= max_edges(self.n):
            raise ConfigurationError(f"topology C outside [1, {max_edges(self.n)}]")
        if kind == "drop_k" and not 0 <= int(self.topology.get("k", -1)) < max_edges(self.n):
            raise ConfigurationError("topology k outside range")
        if self.snr.get("kind") not in SNR_KINDS:
            raise ConfigurationError(f"snr kind must be one of {SNR_KINDS}")
        if self.upsample < 1:
            raise ConfigurationError("upsample must be >= 1")

    # -- serialization -------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: top-level JSON value must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def with_overrides(self, **kw: Any) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    # -- derived -------------------------------------------------------
    def snr_is_noiseless(self) -> bool:
        s = self.snr
        if s["kind"] == "uniform":
            return s.get("db") is None or math.isinf(float(s["db"]))
        return False


def parse_pair(key: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in key.split("-"))
    except ValueError as exc:
        raise ConfigurationError(f"link key {key!r} must look like 'i-j'") from exc
    return (min(a, b), max(a, b))
