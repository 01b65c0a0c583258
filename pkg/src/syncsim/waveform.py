"""Two-tone synchronization pulse and matched-filter time-of-arrival estimation.

All processing is complex baseband. The pulse is two equal tones at
``+/- bandwidth / 2`` with zero relative phase and a rectangular envelope,
normalized to unit peak amplitude. Concentrating the energy at the band
edges maximizes the mean-square bandwidth and therefore minimizes the
delay-estimation bound, at the price of correlation ambiguities spaced
``1 / bandwidth`` apart.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import AmbiguityError, ConfigurationError, EstimationError, InputError

#: Default fine-grid factor used before the three-point peak fit.
DEFAULT_UPSAMPLE = 32
_FINE_HALF_SPAN = 6


@dataclass(frozen=True)
class SampledWaveform:
    """Complex baseband samples with their sample rate and the time of sample 0."""

    samples: np.ndarray
    sample_rate: float
    epoch_offset: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise InputError("waveform samples must be a non-empty 1-D array")
        if not self.sample_rate > 0:
            raise InputError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_epoch(self, epoch_offset: float) -> "SampledWaveform":
        return SampledWaveform(self.samples, self.sample_rate, epoch_offset)


@dataclass(frozen=True)
class ToaEstimate:
    toa: float
    lag: float  # fractional lag in samples
    peak_index: int
    peak_value: float
    peak_to_sidelobe: float


def generate_two_tone(bandwidth: float, duration: float, sample_rate: float) -> SampledWaveform:
    """Two unit tones at ``+/- bandwidth / 2``, normalized to unit peak.

    >>> w = generate_two_tone(40e6, 10e-6, 200e6)
    >>> len(w)
    2000
    """
    if not (0 <= bandwidth < sample_rate):
        raise ConfigurationError(
            f"two-tone bandwidth {bandwidth} Hz violates Nyquist for {sample_rate} Sa/s"
        )
    n = int(round(duration * sample_rate))
    if n < 2:
        raise ConfigurationError("pulse must span at least two samples")
    t = np.arange(n) / sample_rate
    x = np.exp(1j * np.pi * bandwidth * t) + np.exp(-1j * np.pi * bandwidth * t)
    return SampledWaveform(x / np.max(np.abs(x)), sample_rate)


def mean_square_bandwidth(w: SampledWaveform) -> float:
    """Second moment of the discrete spectrum, in rad^2/s^2."""
    psd = np.abs(np.fft.fft(w.samples)) ** 2
    total = psd.sum()
    if total == 0:
        raise InputError("mean-square bandwidth undefined for an all-zero waveform")
    omega = 2 * np.pi * np.fft.fftfreq(len(w), d=1.0 / w.sample_rate)
    return float(np.sum(omega**2 * psd) / total)


def template_spectrum(template: SampledWaveform, size: int) -> np.ndarray:
    """Conjugate spectrum of ``template`` zero-padded to ``size``; reusable across calls."""
    return np.conj(np.fft.fft(template.samples, size))


def _cross_spectrum(
    rx: SampledWaveform, template: SampledWaveform, tspec: np.ndarray | None = None
) -> np.ndarray:
    if len(rx) < len(template):
        raise InputError(
            f"received window ({len(rx)} samples) shorter than template ({len(template)})"
        )
    if tspec is None or tspec.size != len(rx):
        tspec = template_spectrum(template, len(rx))
    return np.fft.fft(rx.samples) * tspec


def matched_filter(rx: SampledWaveform, template: SampledWaveform) -> np.ndarray:
    """|cross-correlation| of ``rx`` with ``template`` at lags 0 .. len(rx)-len(template)."""
    corr = np.fft.ifft(_cross_spectrum(rx, template))
    return np.abs(corr[: len(rx) - len(template) + 1])


def qls_peak_refine(y_minus: float, y_0: float, y_plus: float) -> float:
    """Vertex offset of the parabola through three equally spaced samples.

    ``y_0`` must be the largest of the three. Returns 0 for a flat triple.
    """
    if y_0 < y_minus or y_0 < y_plus:
        raise EstimationError("centre sample is not a local maximum; peak misdetected")
    den = y_minus - 2.0 * y_0 + y_plus
    if den == 0:
        return 0.0
    return 0.5 * (y_minus - y_plus) / den


@lru_cache(maxsize=16)
def _fine_kernel(size: int, upsample: int) -> np.ndarray:
    freqs = np.fft.fftfreq(size)
    steps = np.arange(-upsample, upsample + 1) / upsample
    return np.exp(2j * np.pi * np.outer(steps, freqs))


@lru_cache(maxsize=16)
def _roots(size: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(size) / size)


def integer_shift_ramp(size: int, k: int) -> np.ndarray:
    """``exp(2j*pi*f*k)`` over the FFT bins of length ``size`` for integer ``k``."""
    return _roots(size)[(np.arange(size) * k) % size]


def _fine_peak(cross: np.ndarray, k0: int, start: float, upsample: int) -> float:
    """Fine-grid maximum plus three-point fit, searched on rows around ``start``."""
    size = cross.size
    kernel = _fine_kernel(size, upsample)
    shifted = cross * integer_shift_ramp(size, k0)
    centre = int(round(start * upsample)) + upsample
    lo, hi = max(0, centre - _FINE_HALF_SPAN), min(kernel.shape[0], centre + _FINE_HALF_SPAN + 1)
    fine = np.abs(kernel[lo:hi] @ shifted)
    u = int(np.argmax(fine))
    if (u == 0 and lo > 0) or (u == fine.size - 1 and hi < kernel.shape[0]):
        # optimum outside the local search: fall back to the full +/- 1 sample grid
        lo, hi = 0, kernel.shape[0]
        fine = np.abs(kernel @ shifted)
        u = int(np.argmax(fine))
    if 0 < u < fine.size - 1:
        u_frac = u + qls_peak_refine(fine[u - 1], fine[u], fine[u + 1])
    else:
        u_frac = float(u)
    return (u_frac + lo - upsample) / upsample


def _main_lobe_psr(mag: np.ndarray, k0: int) -> float:
    lo = k0
    while lo > 0 and mag[lo - 1] <= mag[lo]:
        lo -= 1
    hi = k0
    while hi < mag.size - 1 and mag[hi + 1] <= mag[hi]:
        hi += 1
    outside = np.concatenate([mag[:lo], mag[hi + 1 :]])
    if outside.size == 0 or outside.max() == 0:
        return math.inf
    return float(mag[k0] / outside.max())


def estimate_toa(
    rx: SampledWaveform,
    template: SampledWaveform,
    upsample: int = DEFAULT_UPSAMPLE,
    *,
    tspec: np.ndarray | None = None,
) -> ToaEstimate:
    """Time of arrival of ``template`` inside ``rx``.

    The integer matched-filter peak is located first. The correlation is then
    evaluated on a grid ``1/upsample`` of a sample wide around it (exact
    band-limited interpolation from the cross spectrum), and the three-point
    quadratic fit is applied to the fine-grid maximum and its two neighbours.
    ``upsample=1`` applies the fit directly to the integer lags. ``tspec``
    may carry a precomputed :func:`template_spectrum` for ``len(rx)``.

    Raises
    ------
    AmbiguityError
        If the peak lies on the first or last admissible lag.
    """
    if upsample < 1:
        raise InputError("upsample must be >= 1")
    cross = _cross_spectrum(rx, template, tspec)
    size = len(rx)
    mag = np.abs(np.fft.ifft(cross)[: size - len(template) + 1])
    k0 = int(np.argmax(mag))
    if k0 == 0 or k0 == mag.size - 1:
        raise AmbiguityError(f"matched-filter peak on window boundary (lag {k0})")

    coarse = qls_peak_refine(mag[k0 - 1], mag[k0], mag[k0 + 1])
    if upsample == 1:
        lag = k0 + coarse
    else:
        lag = k0 + _fine_peak(cross, k0, coarse, upsample)

    return ToaEstimate(
        toa=rx.epoch_offset + lag / rx.sample_rate,
        lag=lag,
        peak_index=k0,
        peak_value=float(mag[k0]),
        peak_to_sidelobe=_main_lobe_psr(mag, k0),
    )


def write_waveform_csv(w: SampledWaveform, path: str | Path) -> None:
    """Debug dump: one ``index,re,im`` row per sample."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "re", "im"])
        for i, s in enumerate(w.samples):
            writer.writerow([i, repr(float(s.real) + 0.0), repr(float(s.imag) + 0.0)])
