"""Edge-switch stream learner.

Turns per-stream arrival timestamps into a period estimate and a TT/BE
verdict. The estimator bins arrivals into a 0/1 sequence, takes the
significant peaks of its periodogram as candidate periods and keeps the
first candidate that sits on a hill of the autocorrelation function.

All times are in seconds.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import signal


class InsufficientData(ValueError):
    pass


class Verdict(str, Enum):
    UNDECIDED = "undecided"
    TT = "TT"
    BE = "BE"


@dataclass(frozen=True)
class LearnerConfig:
    min_arrivals: int = 16        # N_min
    window: int = 64              # W
    bins_per_interarrival: int = 8
    max_bins: int = 1 << 16
    max_candidates: int = 5
    n_permutations: int = 100
    significance: float = 0.99
    permutation_seed: int = 0
    confidence_threshold: float = 0.8
    deviation_threshold: float = 0.3
    jitter_fraction: float = 0.1


DEFAULT_CONFIG = LearnerConfig()


@dataclass(frozen=True)
class TimeSeq:
    bin_width: float
    origin: float
    bins: np.ndarray

    def __len__(self):
        return len(self.bins)


@dataclass(frozen=True)
class PeriodEstimate:
    period: float
    valid: bool
    p_max: float
    confidence: float
    bin_width: float
    # least-squares slope of the arrival grid; used for deviation checks so
    # that quantization of ``period`` to the bin width does not drift
    grid_period: float = 0.0

    @property
    def tolerance(self):
        return jitter_tolerance(self.period, self.bin_width)


def build_time_sequence(timestamps, bin_width):
    """Bin arrivals relative to the first timestamp; bin k covers k*Δ ± Δ/2."""
    ts = np.asarray(timestamps, dtype=float)
    if ts.size < 2:
        raise InsufficientData("need at least two timestamps")
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    origin = ts[0]
    span = ts[-1] - origin
    n = int(math.ceil(span / bin_width - 1e-9)) + 1
    idx = np.rint((ts - origin) / bin_width).astype(np.int64)
    bins = np.zeros(n, dtype=np.uint8)
    bins[idx] = 1
    return TimeSeq(bin_width, origin, bins)


def _power(x):
    return np.abs(np.fft.rfft(x, axis=-1)) ** 2


def periodogram_candidates(seq, max_candidates=5, n_permutations=100,
                           significance=0.99, seed=0):
    """Candidate periods (in bins) whose spectral power beats a permutation test.

    The threshold is the ``significance`` quantile of the maximum non-DC
    power over ``n_permutations`` shuffles of the sequence. Candidates are
    ``N / f`` for the surviving frequency bins, strongest first; equal powers
    list the longer period first.
    """
    x = np.asarray(seq.bins if isinstance(seq, TimeSeq) else seq, dtype=float)
    n = x.size
    if n < 8:
        return []
    power = _power(x)[1:]
    rng = np.random.default_rng(seed)
    shuffled = rng.permuted(np.broadcast_to(x, (n_permutations, n)), axis=1)
    null_max = _power(shuffled)[:, 1:].max(axis=1)
    threshold = np.quantile(null_max, significance)
    floor = 1e-9 * max(float(x.sum()) ** 2, 1.0)
    freqs = np.arange(1, power.size + 1)
    keep = (power > threshold) & (power > floor) & (freqs >= 2)
    if not keep.any():
        return []
    p = power[keep]
    f = freqs[keep]
    rel = np.round(p / p.max(), 9)
    order = np.lexsort((f, -rel))
    return [n / float(f[i]) for i in order[:max_candidates]]


def autocorrelation(seq):
    """Normalized autocorrelation ``acf[lag]`` for lags 0..N//2 (acf[0] == 1)."""
    x = np.asarray(seq.bins if isinstance(seq, TimeSeq) else seq, dtype=float)
    n = x.size
    full = signal.correlate(x, x, mode="full", method="auto")
    acf = full[n - 1:n - 1 + n // 2 + 1]
    if acf[0] <= 0:
        return np.zeros(n // 2 + 1)
    acf = acf / acf[0]
    # FFT correlation leaves ~1e-16 noise where the exact value is zero
    acf[np.abs(acf) < 1e-12] = 0.0
    return acf


def validate_period(candidate, acf):
    """Return the refined lag if ``candidate`` lies on an ACF hill, else None.

    Hill test: within lags [ℓ - ℓ/4, ℓ + ℓ/4] the maximum must be interior
    and larger than the mean ACF over lags 1..N/2.
    """
    max_lag = len(acf) - 1
    lag = int(round(candidate))
    if lag < 1 or lag + 1 > max_lag:
        return None
    lo = max(1, min(lag - 1, int(math.floor(lag - lag / 4))))
    hi = min(max_lag, max(lag + 1, int(math.ceil(lag + lag / 4))))
    window = acf[lo:hi + 1]
    best = lo + int(np.argmax(window))
    if best in (lo, hi):
        return None
    if not acf[best] > acf[1:].mean():
        return None
    return best


def jitter_tolerance(period, bin_width, fraction=DEFAULT_CONFIG.jitter_fraction):
    return max(bin_width, fraction * period)


def default_bin_width(timestamps, config=DEFAULT_CONFIG):
    """Median interarrival split into a fixed number of bins, capped in length."""
    ts = np.asarray(timestamps, dtype=float)
    gaps = np.diff(ts)
    width = float(np.median(gaps)) / config.bins_per_interarrival
    span = ts[-1] - ts[0]
    return max(width, span / (config.max_bins - 1))


def grid_fit(timestamps, period):
    """Assign grid indices from consecutive gaps, then fit the grid line.

    Returns ``(slope, residuals)``. Gaps spanning several periods (missing
    frames) advance the index by more than one.
    """
    ts = np.asarray(timestamps, dtype=float)
    steps = np.maximum(1, np.rint(np.diff(ts) / period)).astype(np.int64)
    k = np.concatenate(([0], np.cumsum(steps)))
    if k[-1] > 0:
        slope = float(np.polyfit(k, ts, 1)[0])
    else:
        slope = period
    phase = float(np.median(ts - k * slope))
    return slope, ts - (phase + k * slope)


def grid_confidence(timestamps, period, tolerance):
    """On-grid fraction of arrivals, corrected for chance agreement.

    A random arrival lands within ``tolerance`` of some grid point with
    probability ``2*tolerance/period``; that baseline is removed so that
    aperiodic traffic scores near zero whatever the candidate period.
    """
    _, resid = grid_fit(timestamps, period)
    raw = float(np.mean(np.abs(resid) <= tolerance * (1 + 1e-9)))
    chance = min(1.0, 2 * tolerance / period)
    if chance >= 1.0:
        return 0.0
    return max(0.0, (raw - chance) / (1 - chance))


def mean_interarrival(timestamps):
    """Naive baseline: the average gap between consecutive arrivals."""
    ts = np.asarray(timestamps, dtype=float)
    if ts.size < 2:
        raise InsufficientData("need at least two timestamps")
    return float(np.mean(np.diff(ts)))


def estimate_from_timestamps(timestamps, bin_width=None, config=DEFAULT_CONFIG):
    ts = np.asarray(timestamps, dtype=float)
    if ts.size < config.min_arrivals:
        raise InsufficientData(f"need {config.min_arrivals} arrivals, have {ts.size}")
    width = default_bin_width(ts, config) if bin_width is None else float(bin_width)
    seq = build_time_sequence(ts, width)
    p_max = float(np.max(np.diff(ts)))
    candidates = periodogram_candidates(seq, config.max_candidates, config.n_permutations,
                                        config.significance, config.permutation_seed)
    acf = autocorrelation(seq) if candidates else None
    for cand in candidates:
        lag = validate_period(cand, acf)
        if lag is None:
            continue
        period = lag * width
        tol = jitter_tolerance(period, width, config.jitter_fraction)
        slope, _ = grid_fit(ts, period)
        conf = grid_confidence(ts, period, tol)
        return PeriodEstimate(period, True, p_max, conf, width, slope)
    return PeriodEstimate(0.0, False, p_max, 0.0, width, 0.0)


@dataclass
class StreamObservation:
    stream_id: object
    config: LearnerConfig = DEFAULT_CONFIG
    arrivals: deque = field(default=None)
    verdict: Verdict = Verdict.UNDECIDED
    estimate: PeriodEstimate | None = None
    since_attempt: int = 0
    window_filled: bool = False

    def __post_init__(self):
        if self.arrivals is None:
            self.arrivals = deque(maxlen=self.config.window)

    def add(self, t):
        if self.arrivals and t <= self.arrivals[-1]:
            raise ValueError("arrival timestamps must be strictly increasing")
        self.arrivals.append(t)
        self.since_attempt += 1
        if len(self.arrivals) == self.config.window:
            self.window_filled = True

    def reset(self):
        self.arrivals.clear()
        self.verdict = Verdict.UNDECIDED
        self.estimate = None
        self.since_attempt = 0
        self.window_filled = False


def estimate_period(obs, bin_width=None):
    """Estimate the period from the observation window (see module docstring)."""
    if isinstance(obs, StreamObservation):
        return estimate_from_timestamps(list(obs.arrivals), bin_width, obs.config)
    return estimate_from_timestamps(obs, bin_width)


def classify_stream(obs):
    cfg = obs.config
    est = obs.estimate
    if est is not None and est.valid and est.confidence >= cfg.confidence_threshold:
        return Verdict.TT
    if len(obs.arrivals) >= cfg.window:
        return Verdict.BE
    return Verdict.UNDECIDED


def detect_deviation(obs, estimate=None):
    """True when too many recent arrivals fall off the learned grid."""
    est = estimate if estimate is not None else obs.estimate
    if est is None or not est.valid:
        return False
    recent = list(obs.arrivals)[-obs.config.min_arrivals:]
    if len(recent) < 3:
        return False
    period = est.grid_period or est.period
    tol = jitter_tolerance(est.period, est.bin_width, obs.config.jitter_fraction)
    ts = np.asarray(recent)
    steps = np.maximum(1, np.rint(np.diff(ts) / period)).astype(np.int64)
    k = np.concatenate(([0], np.cumsum(steps)))
    phase = float(np.median(ts - k * period))
    off = np.abs(ts - (phase + k * period)) > tol * (1 + 1e-9)
    return float(off.mean()) > obs.config.deviation_threshold


class StreamLearner:
    """Online policy driving one stream's observation at its ingress switch.

    Estimation runs every ``min_arrivals`` new arrivals while undecided,
    once per window refill after a BE verdict, and a TT verdict is
    re-checked for deviation every ``min_arrivals`` arrivals.
    ``observe`` returns the new verdict when it changes, or ``"deviation"``
    when a TT stream drifts off its grid and learning restarts.
    """

    def __init__(self, stream_id, config=DEFAULT_CONFIG):
        self.obs = StreamObservation(stream_id, config)
        self.estimates = 0

    @property
    def verdict(self):
        return self.obs.verdict

    @property
    def estimate(self):
        return self.obs.estimate

    def observe(self, t):
        obs = self.obs
        cfg = obs.config
        obs.add(t)
        if obs.verdict is Verdict.TT:
            if obs.since_attempt >= cfg.min_arrivals:
                obs.since_attempt = 0
                if detect_deviation(obs):
                    obs.reset()
                    return "deviation"
            return None
        due = cfg.window if obs.verdict is Verdict.BE else cfg.min_arrivals
        if len(obs.arrivals) < cfg.min_arrivals or obs.since_attempt < due:
            return None
        obs.since_attempt = 0
        self.estimates += 1
        obs.estimate = estimate_period(obs)
        verdict = classify_stream(obs)
        if verdict is Verdict.UNDECIDED and obs.verdict is Verdict.BE:
            verdict = Verdict.BE
        if verdict is not obs.verdict:
            obs.verdict = verdict
            return verdict
        return None
