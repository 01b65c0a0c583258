"""Experiment runners, CSV output and SVG plots."""

from .config import ConvergenceConfig, ExperimentConfig, WaveformConfig
from .plots import emit_plots, read_study_csv, render_svg
from .runner import (
    run_connectivity_sweep,
    run_convergence,
    run_snr_sweep,
    simulate,
)

__all__ = [
    "ConvergenceConfig",
    "ExperimentConfig",
    "WaveformConfig",
    "emit_plots",
    "read_study_csv",
    "render_svg",
    "run_connectivity_sweep",
    "run_convergence",
    "run_snr_sweep",
    "simulate",
]
