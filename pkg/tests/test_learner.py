import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from sctsn import learner
from sctsn.learner import (InsufficientData, StreamLearner, Verdict, autocorrelation,
                           build_time_sequence, estimate_from_timestamps, grid_confidence,
                           jitter_tolerance, mean_interarrival, periodogram_candidates,
                           validate_period)

from helpers import read_trace_us


def naive_power(x):
    # direct DFT, independent of the FFT route
    n = len(x)
    out = []
    for f in range(1, n // 2 + 1):
        re = sum(x[t] * math.cos(2 * math.pi * f * t / n) for t in range(n))
        im = sum(x[t] * math.sin(2 * math.pi * f * t / n) for t in range(n))
        out.append(re * re + im * im)
    return out


def naive_acf(x):
    n = len(x)
    r0 = sum(v * v for v in x)
    return [sum(x[t] * x[t + k] for t in range(n - k)) / r0 for k in range(n // 2 + 1)]


def test_time_sequence_binning():
    seq = build_time_sequence([0.0, 1.0, 2.5, 4.0], 0.5)
    assert list(seq.bins) == [1, 0, 1, 0, 0, 1, 0, 0, 1]
    with pytest.raises(ValueError):
        build_time_sequence([0.0, 0.0], 0.5)
    with pytest.raises(InsufficientData):
        build_time_sequence([0.0], 0.5)


def test_acf_of_alternating_sequence():
    # hand computed: overlaps 4/4, 0, 3/4, 0, 2/4
    assert list(autocorrelation([1, 0, 1, 0, 1, 0, 1, 0])) == [1.0, 0.0, 0.75, 0.0, 0.5]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=8, max_size=64))
def test_acf_matches_direct_sum(bits):
    assume(sum(bits) > 0)
    assert np.allclose(autocorrelation(bits), naive_acf(bits), atol=1e-12)


def naive_candidates(x, n_perm=100, q=0.99, seed=0, limit=5):
    # same shuffles (seeded generator), everything else recomputed by direct DFT
    x = np.asarray(x, dtype=float)
    n = x.size
    shuffled = np.random.default_rng(seed).permuted(np.broadcast_to(x, (n_perm, n)), axis=1)
    null = [max(naive_power(list(row))) for row in shuffled]
    thr = np.quantile(null, q)
    power = naive_power(list(x))
    floor = 1e-9 * max(x.sum() ** 2, 1.0)
    keep = [(f, p) for f, p in enumerate(power, start=1) if f >= 2 and p > thr and p > floor]
    if not keep:
        return []
    top = max(p for _, p in keep)
    keep.sort(key=lambda fp: (-round(fp[1] / top, 9), fp[0]))
    return [n / f for f, _ in keep[:limit]]


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=8, max_size=40))
def test_candidates_match_direct_dft_route(bits):
    assume(sum(bits) > 0)
    assert periodogram_candidates(bits) == pytest.approx(naive_candidates(bits))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(16, 40), st.integers(0, 11))
def test_whole_period_pulse_train_peaks_at_its_period(period, reps, phase):
    # at least as many pulses as the learner ever estimates from; with fewer,
    # shuffles can tie the pulse train's harmonic power by chance
    x = np.zeros(period * reps)
    x[phase % period::period] = 1
    cands = periodogram_candidates(x)
    assert cands and cands[0] == pytest.approx(period)


def test_pulse_train_validation_rejects_subharmonic_lag():
    x = np.zeros(5000)
    x[::50] = 1
    cands = periodogram_candidates(x)
    assert [round(c, 2) for c in cands[:3]] == [50.0, 25.0, 16.67]
    acf = autocorrelation(x)
    assert validate_period(50, acf) == 50
    assert validate_period(25, acf) is None


def test_jitter_tolerance():
    assert jitter_tolerance(200e-6, 25e-6) == pytest.approx(25e-6)
    assert jitter_tolerance(200e-6, 5e-6) == pytest.approx(20e-6)


def test_missing_frame_trace():
    ts = np.array(read_trace_us("missing_frame.trace")) * 1e-6
    est = estimate_from_timestamps(ts)
    assert est.valid
    assert abs(est.period - 200e-6) <= est.bin_width
    assert est.confidence == 1.0
    assert mean_interarrival(ts) == pytest.approx(3800e-6 / 18)


def test_displaced_frame_trace():
    ts = np.array(read_trace_us("late_frame.trace")) * 1e-6
    est = estimate_from_timestamps(ts)
    assert est.valid
    assert abs(est.period - 50e-6) <= est.bin_width
    assert est.confidence == pytest.approx(14 / 15)  # (19/20 - 1/4) / (1 - 1/4)


def test_regime_change_trace():
    ts = np.array(read_trace_us("regime_change.trace")) * 1e-6
    assert mean_interarrival(ts) == pytest.approx(62e-6)
    est = estimate_from_timestamps(ts[-16:])
    assert abs(est.period - 25e-6) <= est.bin_width


def test_too_few_arrivals():
    with pytest.raises(InsufficientData):
        estimate_from_timestamps(np.arange(15) * 0.01)


def test_confidence_is_chance_corrected():
    # every arrival is on a 2-bin grid, but that agreement is what chance gives
    ts = np.cumsum(np.random.default_rng(3).exponential(1.0, 64))
    assert grid_confidence(ts, 0.5, 0.25) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 0.05), st.floats(0, 1), st.floats(0, 0.03), st.integers(16, 64),
       st.integers(0, 2 ** 31))
def test_periodic_trains_are_recovered(period, phase, jitter, n, seed):
    rng = np.random.default_rng(seed)
    ts = (np.arange(n) + phase) * period + rng.uniform(-jitter, jitter, n) * period
    est = estimate_from_timestamps(ts)
    assert est.valid
    assert abs(est.period - period) <= est.bin_width + 1e-12
    assert est.confidence >= 0.8


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 0.05), st.floats(0.1, 1000), st.floats(-10, 10))
def test_estimate_equivariant_under_time_scale_and_shift(period, scale, shift):
    ts = np.arange(32) * period
    ts = np.delete(ts, 7)
    a = estimate_from_timestamps(ts)
    b = estimate_from_timestamps(ts * scale + shift)
    assert b.valid == a.valid
    assert b.period == pytest.approx(a.period * scale, rel=1e-6)


def test_noise_false_positive_rate():
    # Monte-Carlo over seeded exponential windows; measured rate is 0/300
    hits = 0
    for s in range(200):
        ts = np.cumsum(np.random.default_rng(1000 + s).exponential(0.01, 64))
        est = estimate_from_timestamps(ts)
        hits += est.valid and est.confidence >= 0.8
    assert hits <= 4


def test_learner_classifies_periodic_stream_after_min_arrivals():
    sl = StreamLearner("s")
    verdicts = [sl.observe(k * 0.005) for k in range(20)]
    assert verdicts[:15] == [None] * 15
    assert verdicts[15] is Verdict.TT
    assert sl.estimate.period == pytest.approx(0.005, rel=0.13)


def test_learner_marks_noise_best_effort_once_window_fills():
    sl = StreamLearner("s")
    ts = np.cumsum(np.random.default_rng(7).exponential(0.01, 200))
    out = [sl.observe(t) for t in ts]
    assert Verdict.TT not in out
    assert out.index(Verdict.BE) == 63
    assert sl.verdict is Verdict.BE


def test_learner_flags_deviation_and_relearns():
    sl = StreamLearner("s")
    ts = list(np.arange(32) * 0.004)
    ts += list(ts[-1] + 0.0065 * np.arange(1, 60))
    out = [sl.observe(t) for t in ts]
    assert "deviation" in out
    i = out.index("deviation")
    assert Verdict.TT in out[i + 1:]
    assert sl.estimate.period == pytest.approx(0.0065, rel=0.13)


def test_arrivals_must_increase():
    sl = StreamLearner("s")
    sl.observe(1.0)
    with pytest.raises(ValueError):
        sl.observe(1.0)
