"""Decentralized wireless time synchronization: two-way time transfer plus
average consensus over dynamic connectivity graphs."""

from .channel import LinkChannel, integrated_snr, propagate
from .clock import LocalClock, init_coarse_alignment, make_clocks
from .consensus import assemble_offsets, consensus_step, detect_convergence, run_epochs
from .crlb import crlb_average, crlb_single
from .topology import TopologyGraph, complete_graph, mh_mixing_matrix, random_subgraph
from .twtt import TimestampQuad, build_schedule, exchange, offset_from_quad, tof_from_quad
from .waveform import (
    SampledWaveform,
    estimate_toa,
    generate_two_tone,
    matched_filter,
    mean_square_bandwidth,
    qls_peak_refine,
)

__version__ = "0.1.0"
