import math

import numpy as np
import pytest

from syncsim.channel import LinkChannel, propagate
from syncsim.crlb import crlb_single
from syncsim.errors import AmbiguityError, ConfigurationError, EstimationError, InputError
from syncsim.waveform import (
    SampledWaveform,
    estimate_toa,
    generate_two_tone,
    matched_filter,
    mean_square_bandwidth,
    qls_peak_refine,
    write_waveform_csv,
)

from _helpers import GUARD, WINDOW, per_sample_db

FS = 200e6
TWO_TONE_ZETA_SQ = (2 * math.pi * 20e6) ** 2  # equal tones at +/-B/2: zeta = 2*pi*B/2


def padded(w, lead, total):
    buf = np.zeros(total, complex)
    buf[lead : lead + len(w)] = w.samples
    return SampledWaveform(buf, w.sample_rate)


def direct_correlation(rx, template):
    """Brute-force |sum_n rx[n + lag] conj(t[n])| over every admissible lag."""
    n = len(template)
    return np.array(
        [abs(np.sum(rx.samples[lag : lag + n] * np.conj(template.samples))) for lag in range(len(rx) - n + 1)]
    )


def toa_errors(pulse, delay, snr_db, trials, rng, antithetic=False):
    link = LinkChannel((0, 1), delay, snr_db)
    clean = propagate(pulse, LinkChannel((0, 1), delay), (0, 1), guard=GUARD, size=WINDOW)
    errs = []
    for _ in range(trials):
        noisy = propagate(pulse, link, (0, 1), rng, guard=GUARD, size=WINDOW)
        noise = noisy.samples - clean.samples
        variants = [noise, -noise] if antithetic else [noise]
        for nz in variants:
            rx = SampledWaveform(clean.samples + nz, FS, clean.epoch_offset)
            errs.append(estimate_toa(rx, pulse).toa - delay)
    return np.array(errs)


# -- generation -------------------------------------------------------------


def test_reference_pulse_length_and_peaks(pulse):
    assert len(pulse) == 2000
    assert np.max(np.abs(pulse.samples)) == pytest.approx(1.0)
    mag = np.abs(np.fft.fft(pulse.samples))
    freqs = np.fft.fftfreq(2000, 1 / FS)
    top = sorted(freqs[np.argsort(mag)[-2:]])
    assert top == pytest.approx([-20e6, 20e6])


def test_zero_bandwidth_is_dc():
    w = generate_two_tone(0.0, 10e-6, 200e6)
    assert np.allclose(w.samples, 1.0)


def test_autocorrelation_ambiguity_spacing(pulse):
    r = direct_correlation(padded(pulse, 60, 2120), pulse)
    # local maxima of |R| (interior points)
    peaks = [k for k in range(1, r.size - 1) if r[k] >= r[k - 1] and r[k] > r[k + 1]]
    spacing = np.diff(peaks) / FS
    assert np.allclose(spacing, 25e-9)


def test_nyquist_violation_rejected():
    with pytest.raises(ConfigurationError):
        generate_two_tone(250e6, 10e-6, 200e6)
    with pytest.raises(ConfigurationError):
        generate_two_tone(10e6, 1e-9, 200e6)


def test_waveform_validation():
    with pytest.raises(InputError):
        SampledWaveform(np.array([]), 1.0)
    with pytest.raises(InputError):
        SampledWaveform(np.ones(3), 0.0)


# -- mean-square bandwidth -------------------------------------------------


def test_mean_square_bandwidth_two_tone(pulse):
    assert mean_square_bandwidth(pulse) == pytest.approx(TWO_TONE_ZETA_SQ, rel=1e-9)
    assert mean_square_bandwidth(pulse) == pytest.approx(1.579e16, rel=1e-3)


def test_mean_square_bandwidth_dc_is_zero():
    assert mean_square_bandwidth(generate_two_tone(0.0, 10e-6, 200e6)) == pytest.approx(0.0, abs=1e-3)


def test_mean_square_bandwidth_scales_quadratically():
    a = mean_square_bandwidth(generate_two_tone(20e6, 10e-6, 200e6))
    b = mean_square_bandwidth(generate_two_tone(40e6, 10e-6, 200e6))
    assert b / a == pytest.approx(4.0, rel=1e-9)


def test_mean_square_bandwidth_zero_waveform():
    with pytest.raises(InputError):
        mean_square_bandwidth(SampledWaveform(np.zeros(8), 1.0))


# -- matched filter ----------------------------------------------------------


def test_matched_filter_agrees_with_direct_sum(pulse, rng):
    rx = SampledWaveform(padded(pulse, 13, 2050).samples + 0.3 * rng.standard_normal(2050), FS)
    assert np.allclose(matched_filter(rx, pulse), direct_correlation(rx, pulse), rtol=1e-9, atol=1e-9)


def test_matched_filter_zero_lag(pulse):
    mf = matched_filter(pulse, pulse)
    assert mf.size == 1 and mf[0] == pytest.approx(np.sum(np.abs(pulse.samples) ** 2))


@pytest.mark.parametrize("k", [0, 1, 7, 40])
def test_matched_filter_integer_shift(pulse, k):
    rx = padded(pulse, k, 2050)
    mf = matched_filter(rx, pulse)
    assert mf.size == 51
    assert int(np.argmax(mf)) == k


def test_matched_filter_short_rx(pulse):
    with pytest.raises(InputError):
        matched_filter(SampledWaveform(pulse.samples[:10], FS), pulse)


def test_fractional_delay_refined(pulse, rng):
    delay = 3.4 / FS
    rx = propagate(pulse, LinkChannel((0, 1), delay, 40.0), (0, 1), rng, rx_start=0.0, size=2050)
    mf = matched_filter(rx, pulse)
    assert int(np.argmax(mf)) == 3
    assert estimate_toa(rx, pulse).lag == pytest.approx(3.4, abs=0.05)


# -- QLS -----------------------------------------------------------------------


@pytest.mark.parametrize(
    "triple, expected",
    [((3, 4, 3), 0.0), ((1, 4, 3), 0.25), ((4, 4, 4), 0.0), ((3, 4, 1), -0.25)],
)
def test_qls(triple, expected):
    assert qls_peak_refine(*triple) == pytest.approx(expected)


def test_qls_matches_parabola_vertex():
    # parabola y = -(x - 0.3)^2 + 5 sampled at -1, 0, 1
    y = [-((x - 0.3) ** 2) + 5 for x in (-1, 0, 1)]
    assert qls_peak_refine(*y) == pytest.approx(0.3)


def test_qls_rejects_non_peak():
    with pytest.raises(EstimationError):
        qls_peak_refine(5, 4, 3)


# -- time of arrival ---------------------------------------------------------


def test_toa_noiseless_integer_delay(pulse):
    rx = padded(pulse, 20, 2100).with_epoch(-1e-6)
    assert estimate_toa(rx, pulse).toa == pytest.approx(-1e-6 + 100e-9, abs=1e-18)


@pytest.mark.parametrize("frac", [0.1, 0.3, 0.5, 0.77])
def test_toa_noiseless_fractional_delay(pulse, frac):
    rx = propagate(pulse, LinkChannel((0, 1), (10 + frac) / FS), (0, 1), rx_start=0.0, size=WINDOW)
    assert estimate_toa(rx, pulse).toa == pytest.approx((10 + frac) / FS, abs=1e-14)


def test_raw_integer_qls_is_biased_on_two_tone(pulse):
    # parabolic fit on 5-samples-per-cycle lobes; why the fine grid exists
    rx = propagate(pulse, LinkChannel((0, 1), 10.3 / FS), (0, 1), rx_start=0.0, size=WINDOW)
    raw = estimate_toa(rx, pulse, upsample=1).toa - 10.3 / FS
    fine = estimate_toa(rx, pulse).toa - 10.3 / FS
    assert abs(raw) > 5e-12 and abs(fine) < 1e-14


def test_toa_peak_on_boundary(pulse):
    with pytest.raises(AmbiguityError):
        estimate_toa(padded(pulse, 0, 2040), pulse)


def test_toa_shift_equivariant(pulse):
    base = propagate(pulse, LinkChannel((0, 1), 20e-9), (0, 1), rx_start=0.0, size=WINDOW)
    t0 = estimate_toa(base, pulse).toa
    for dt in (0.37e-9, 4.1e-9, 33.3e-9):
        moved = propagate(pulse, LinkChannel((0, 1), 20e-9 + dt), (0, 1), rx_start=0.0, size=WINDOW)
        assert estimate_toa(moved, pulse).toa - t0 == pytest.approx(dt, abs=1e-14)


def test_quality_report(pulse):
    rx = propagate(pulse, LinkChannel((0, 1), 12e-9), (0, 1), rx_start=0.0, size=WINDOW)
    est = estimate_toa(rx, pulse)
    # neighbouring ambiguity lobe is 25 ns / 10 us = 0.25 % lower
    assert est.peak_to_sidelobe == pytest.approx(1 / (1 - 25e-9 / 10e-6), rel=2e-3)


@pytest.mark.slow
def test_toa_monte_carlo_at_60db(pulse, rng):
    errs = toa_errors(pulse, 100e-9, per_sample_db(60), 1000, rng)
    sigma = math.sqrt(crlb_single(TWO_TONE_ZETA_SQ, 1e6))
    assert abs(np.mean(errs)) < 0.5e-12
    assert np.std(errs) == pytest.approx(sigma, rel=0.15)


@pytest.mark.slow
def test_toa_unbiased_at_60db(pulse, rng):
    # antithetic noise pairs cancel the odd-order error terms; what is left is the bias
    errs = toa_errors(pulse, 1.5e-9, per_sample_db(60), 1000, rng, antithetic=True)
    assert abs(np.mean(errs)) < 0.1e-12


@pytest.mark.slow
@pytest.mark.parametrize("snr_db", [40, 50, 60, 70])
def test_toa_std_tracks_bound(pulse, rng, snr_db):
    errs = toa_errors(pulse, 1.5e-9, per_sample_db(snr_db), 400, rng)
    sigma = math.sqrt(crlb_single(mean_square_bandwidth(pulse), 10 ** (snr_db / 10)))
    assert 0.8 * sigma <= np.std(errs) <= 2 * sigma


@pytest.mark.slow
@pytest.mark.parametrize("snr_db", [20, 30])
def test_toa_fine_error_tracks_bound_below_ambiguity_threshold(pulse, rng, snr_db):
    # at these SNRs the lobe choice is unreliable; the within-lobe error still follows the bound
    errs = toa_errors(pulse, 1.5e-9, per_sample_db(snr_db), 400, rng)
    sigma = math.sqrt(crlb_single(mean_square_bandwidth(pulse), 10 ** (snr_db / 10)))
    within = errs - 25e-9 * np.round(errs / 25e-9)
    assert 0.8 * sigma <= np.std(within) <= 2 * sigma
    assert np.std(errs) >= 0.8 * sigma


@pytest.mark.slow
def test_low_snr_gross_errors_on_ambiguity_lattice(pulse, rng):
    link = LinkChannel((0, 1), 1.5e-9, per_sample_db(9))
    errs = []
    for _ in range(400):
        try:
            errs.append(estimate_toa(propagate(pulse, link, (0, 1), rng, guard=GUARD, size=WINDOW), pulse).toa - 1.5e-9)
        except AmbiguityError:
            pass
    errs = np.array(errs)
    gross = errs[np.abs(errs) > 12.5e-9]
    assert gross.size > 0.5 * errs.size
    residual = gross - 25e-9 * np.round(gross / 25e-9)
    sigma = math.sqrt(crlb_single(mean_square_bandwidth(pulse), 10 ** 0.9))
    assert np.std(residual) < 2 * sigma  # clustered near multiples of 25 ns
    assert np.std(errs) > 10 * sigma


def test_csv_dump(tmp_path):
    w = SampledWaveform(np.array([1 + 2j, -0.5j]), 10.0)
    p = tmp_path / "w.csv"
    write_waveform_csv(w, p)
    assert p.read_text().splitlines() == ["index,re,im", "0,1.0,2.0", "1,0.0,-0.5"]


def test_noiseless_fractional_delay_round_trip(pulse):
    rx = propagate(pulse, LinkChannel((0, 1), 1.5e-9), (0, 1), guard=GUARD, size=WINDOW)
    assert estimate_toa(rx, pulse).toa == pytest.approx(1.5e-9, abs=0.01e-12)


def test_unit_lag_zero_peak(pulse):
    assert int(np.argmax(matched_filter(pulse, pulse))) == 0
