"""Cramer-Rao lower bounds on time-delay estimation.

For a single link, var(tau_hat - tau) >= 1 / (2 * zeta_sq * snr) with
``zeta_sq`` the mean-square bandwidth (rad^2/s^2) and ``snr`` the integrated
E_s/N_0. For a network of D links the reported bound is the mean of the
per-link bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolation


def crlb_single(zeta_sq: float, snr_linear: float) -> float:
    """Delay-variance bound (s^2) for one link."""
    if not (zeta_sq > 0 and snr_linear > 0):
        raise ContractViolation("CRLB needs positive mean-square bandwidth and SNR")
    return 1.0 / (2.0 * zeta_sq * snr_linear)


def crlb_average(zeta_sq: float, snrs_linear: Sequence[float]) -> float:
    """Average delay-variance bound (s^2) over D links."""
    snrs = np.asarray(snrs_linear, dtype=float)
    if snrs.size == 0:
        raise ContractViolation("crlb_average needs at least one link")
    if not zeta_sq > 0 or np.any(snrs <= 0):
        raise ContractViolation("CRLB needs positive mean-square bandwidth and SNRs")
    return float(np.sum(1.0 / snrs) / (2.0 * zeta_sq * snrs.size))


@dataclass(frozen=True)
class BoundReport:
    link_variances: tuple[float, ...]
    average_variance: float

    @property
    def link_stds(self) -> tuple[float, ...]:
        return tuple(math.sqrt(v) for v in self.link_variances)

    @property
    def average_std(self) -> float:
        return math.sqrt(self.average_variance)


def bound_report(zeta_sq: float, snrs_linear: Sequence[float]) -> BoundReport:
    per_link = tuple(crlb_single(zeta_sq, s) for s in snrs_linear)
    return BoundReport(per_link, crlb_average(zeta_sq, snrs_linear))
