"""Monte Carlo Hanbury-Brown-Twiss experiment for a CW pair source.

Random numbers come from numpy's PCG64 generator.  A master seed is
expanded with ``numpy.random.SeedSequence``; every chunk of the
acquisition and every stochastic stage (emission, routing, detection,
jitter, dark counts) draws from its own spawned child stream, so the
result depends only on the seed and the (fixed) chunk count, never on how
many threads execute the chunks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSidebands

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_count_rate: float = 0.0
    jitter_sigma: float = 0.0
    dead_time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        if min(self.dark_count_rate, self.jitter_sigma, self.dead_time) < 0:
            raise ValueError("detector parameters must be nonnegative")


@dataclass(frozen=True, eq=False)
class TimeTagStream:
    times: np.ndarray          # seconds, nondecreasing
    channel: int
    duration: float

    def __post_init__(self):
        t = np.array(self.times, dtype=float)  # own copy; frozen below
        if self.channel not in (1, 2):
            raise ValueError("channel must be 1 or 2")
        if t.size:
            if np.any(np.diff(t) < 0):
                raise ValueError("time tags must be nondecreasing")
            if t[0] < 0 or t[-1] > self.duration:
                raise ValueError("time tags must lie in [0, duration]")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    @property
    def rate(self) -> float:
        return self.times.size / self.duration

    def reversed(self) -> "TimeTagStream":
        return TimeTagStream((self.duration - self.times)[::-1], self.channel, self.duration)


@dataclass(frozen=True, eq=False)
class CorrelationHistogram:
    bin_width: float
    window: float
    counts: np.ndarray         # int64, length 2K + 1, bin k centred on k * bin_width
    singles: tuple = (0, 0)
    duration: float = 0.0

    @property
    def half_bins(self) -> int:
        return (self.counts.size - 1) // 2

    @property
    def centers(self) -> np.ndarray:
        k = np.arange(-self.half_bins, self.half_bins + 1)
        return k * self.bin_width

    def __eq__(self, other):
        return (isinstance(other, CorrelationHistogram) and self.bin_width == other.bin_width
                and np.array_equal(self.counts, other.counts))


@dataclass(frozen=True)
class CarResult:
    peak_counts: int
    accidental_mean: float      # accidentals expected in the peak window
    car: float
    car_stderr: float
    g2_zero_minus_1: float
    peak_bins: int
    sideband_bins: int


def _seedseq(seed) -> np.random.SeedSequence:
    # fresh copy: spawn() mutates its receiver, which would break repeatability
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key,
                                      pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)


def generate_pairs(pair_rate: float, duration: float, seed) -> np.ndarray:
    """Sorted emission times of a homogeneous Poisson process."""
    if pair_rate < 0 or duration <= 0:
        raise ValueError("need pair_rate >= 0 and duration > 0")
    rng = np.random.default_rng(_seedseq(seed))
    n = rng.poisson(pair_rate * duration)
    return np.sort(rng.uniform(0.0, duration, n))


def apply_dead_time(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Non-paralysable dead time: drop tags closer than ``dead_time`` to the
    previously accepted tag.  ``times`` must be sorted."""
    if dead_time <= 0 or times.size < 2:
        return times
    keep = np.ones(times.size, dtype=bool)
    last_ref = 0.0
    # only tags closer than dead_time to their predecessor can be dropped
    for i in np.flatnonzero(np.diff(times) < dead_time) + 1:
        ref = times[i - 1] if keep[i - 1] else last_ref
        if times[i] - ref < dead_time:
            keep[i] = False
            last_ref = ref
    return times[keep]


def _detect_chunk(pairs, detectors, split, t0, t1, seq):
    """Routing, efficiency, jitter and dark counts for pairs emitted in [t0, t1)."""
    s_route, s_eff, s_jit, s_dark = [np.random.default_rng(s) for s in seq.spawn(4)]
    n = pairs.size
    # each photon of a pair goes to channel 1 with probability `split`
    to_ch1 = s_route.random((n, 2)) < split
    photons = np.concatenate([pairs, pairs])
    chan1 = np.concatenate([to_ch1[:, 0], to_ch1[:, 1]])
    u = s_eff.random(2 * n)
    out = []
    for ch, det in ((1, detectors[0]), (2, detectors[1])):
        mask = chan1 if ch == 1 else ~chan1
        t = photons[mask]
        t = t[u[mask] < det.efficiency]
        if det.jitter_sigma > 0:
            t = t + s_jit.normal(0.0, det.jitter_sigma, t.size)
        nd = s_dark.poisson(det.dark_count_rate * (t1 - t0))
        dark = s_dark.uniform(t0, t1, nd)
        out.append(np.concatenate([t, dark]))
    return out


def route_and_detect(pairs, detectors, seed, duration: float | None = None,
                     split: float = 0.5, chunks: int = 1, threads: int = 1):
    """Beam-splitter routing and detection; returns (stream1, stream2).

    Dark counts are independent Poisson processes over [0, duration]; tags
    pushed outside that interval by jitter are discarded.  ``chunks`` fixes
    the substream layout; ``threads`` only changes how chunks are executed.
    """
    pairs = np.asarray(pairs, dtype=float)
    if duration is None:
        duration = float(pairs[-1]) if pairs.size else 1.0
    if not 0.0 <= split <= 1.0:
        raise ValueError("split must lie in [0, 1]")
    ss = _seedseq(seed)
    edges = np.linspace(0.0, duration, chunks + 1)
    idx = np.searchsorted(pairs, edges)
    idx[-1] = pairs.size
    children = ss.spawn(chunks)

    def work(c):
        return _detect_chunk(pairs[idx[c]:idx[c + 1]], detectors, split,
                             edges[c], edges[c + 1], children[c])

    if threads > 1 and chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(chunks)))
    else:
        parts = [work(c) for c in range(chunks)]
    streams = []
    for ch, det in ((1, detectors[0]), (2, detectors[1])):
        t = np.sort(np.concatenate([p[ch - 1] for p in parts]), kind="stable")
        t = t[(t >= 0.0) & (t <= duration)]
        t = apply_dead_time(t, det.dead_time)
        streams.append(TimeTagStream(t, ch, duration))
    return streams[0], streams[1]


def simulate(pair_rate: float, duration: float, detectors, seed, split: float = 0.5,
             chunks: int = 1, threads: int = 1):
    """Emission plus detection with substreams derived from one master seed."""
    ss = _seedseq(seed)
    s_emit, s_detect = ss.spawn(2)
    emit_children = s_emit.spawn(chunks)
    edges = np.linspace(0.0, duration, chunks + 1)
    parts = []
    for c in range(chunks):
        span = edges[c + 1] - edges[c]
        parts.append(edges[c] + generate_pairs(pair_rate, span, emit_children[c]))
    pairs = np.concatenate(parts) if parts else np.empty(0)
    return route_and_detect(pairs, detectors, s_detect, duration, split, chunks, threads)


def correlate(streams, bin_width: float, window: float) -> CorrelationHistogram:
    """Histogram of t2 - t1 over |tau| <= window (plus half a bin).

    Bin k covers [(k - 1/2) w, (k + 1/2) w).  For each tag in stream 1 the
    matching slice of stream 2 is located by binary search on the sorted
    tags, so the cost scales with the number of in-window pairs.
    """
    if bin_width <= 0 or window < bin_width:
        raise ValueError("need bin_width > 0 and window >= bin_width")
    s1, s2 = streams
    t1, t2 = s1.times, s2.times
    K = int(round(window / bin_width))
    span = (K + 0.5) * bin_width
    counts = np.zeros(2 * K + 1, dtype=np.int64)
    if t1.size and t2.size:
        lo = np.searchsorted(t2, t1 - span, side="left")
        hi = np.searchsorted(t2, t1 + span, side="left")
        n = hi - lo
        total = int(n.sum())
        if total:
            owner = np.repeat(np.arange(t1.size), n)
            offs = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
            tau = t2[lo[owner] + offs] - t1[owner]
            k = np.floor(tau / bin_width + 0.5).astype(np.int64)
            ok = (k >= -K) & (k <= K)
            counts += np.bincount(k[ok] + K, minlength=2 * K + 1)
    return CorrelationHistogram(bin_width, K * bin_width, counts,
                                (len(s1), len(s2)), s1.duration)


def peak_window_bins(hist: CorrelationHistogram, peak_halfwidth: float) -> np.ndarray:
    return np.abs(hist.centers) <= peak_halfwidth + 1e-9 * hist.bin_width


def car(hist: CorrelationHistogram, peak_halfwidth: float,
        sideband_exclusion: float | None = None) -> CarResult:
    """Coincidences-to-accidentals ratio from a correlation histogram.

    Peak: bins whose centre lies within ``peak_halfwidth`` of zero.
    Sidebands: bins farther than ``sideband_exclusion`` (default twice the
    peak half-width) from zero.  Standard error is propagated from Poisson
    counts in both regions.
    """
    peak = peak_window_bins(hist, peak_halfwidth)
    excl = 2.0 * peak_halfwidth if sideband_exclusion is None else sideband_exclusion
    side = np.abs(hist.centers) > excl
    n_peak = int(peak.sum())
    n_side = int(side.sum())
    if n_side == 0:
        raise InsufficientSidebands("no histogram bins outside the peak exclusion region")
    if n_peak == 0:
        raise ValueError("peak half-width selects no bins")
    peak_counts = int(hist.counts[peak].sum())
    side_total = int(hist.counts[side].sum())
    acc = side_total / n_side * n_peak
    if acc == 0:
        ratio = float("inf") if peak_counts else float("nan")
        return CarResult(peak_counts, 0.0, ratio, float("nan"), ratio - 1.0, n_peak, n_side)
    ratio = peak_counts / acc
    rel = math.sqrt((1.0 / peak_counts if peak_counts else 0.0) + 1.0 / side_total)
    return CarResult(peak_counts, acc, ratio, ratio * rel if peak_counts else 1.0 / acc,
                     ratio - 1.0, n_peak, n_side)


def analytic_car(pair_rate_detected: float, singles_rates, bin_width: float) -> float:
    """1 + R_cc / (R1 R2 tau) for a coincidence window of width ``tau``."""
    r1, r2 = singles_rates
    if r1 <= 0 or r2 <= 0 or bin_width <= 0:
        raise ValueError("rates and window must be positive")
    return 1.0 + pair_rate_detected / (r1 * r2 * bin_width)


def expected_coincidence_rate(pair_rate: float, detectors, split: float = 0.5,
                              window=None, singles_rates=None) -> float:
    """True cross-channel coincidence rate.

    ``window`` (lo, hi) restricts to a delay window using the Gaussian
    jitter of both detectors.  ``singles_rates`` (measured, Hz) applies the
    non-paralysable dead-time survival 1 - R tau_dead per channel.
    """
    d1, d2 = detectors
    rate = pair_rate * 2.0 * split * (1.0 - split) * d1.efficiency * d2.efficiency
    if singles_rates is not None:
        rate *= (1.0 - singles_rates[0] * d1.dead_time) * (1.0 - singles_rates[1] * d2.dead_time)
    if window is None:
        return rate
    sig = math.hypot(d1.jitter_sigma, d2.jitter_sigma)
    lo, hi = window
    if sig == 0:
        return rate if lo <= 0.0 < hi else 0.0
    cdf = lambda x: 0.5 * (1.0 + math.erf(x / (sig * math.sqrt(2.0))))
    return rate * (cdf(hi) - cdf(lo))


def peak_fwhm(hist: CorrelationHistogram, baseline: float = 0.0) -> float:
    """FWHM of the zero-delay peak by linear interpolation between bins."""
    y = hist.counts.astype(float) - baseline
    x = hist.centers
    i0 = int(np.argmax(y))
    half = y[i0] / 2.0
    left = i0
    while left > 0 and y[left] > half:
        left -= 1
    right = i0
    while right < y.size - 1 and y[right] > half:
        right += 1
    xl = x[left] + (half - y[left]) * (x[left + 1] - x[left]) / (y[left + 1] - y[left])
    xr = x[right - 1] + (half - y[right - 1]) * (x[right] - x[right - 1]) / (y[right] - y[right - 1])
    return float(xr - xl)


def polarization_scan(angles, rate_model, duration: float, detectors, seed,
                      bin_width: float = 100e-12, window: float = 50e-9,
                      peak_halfwidth: float | None = None, split: float = 0.5,
                      simulate_counts: bool = True, chunks: int = 1):
    """Zero-delay peak versus pump polarization angle.

    ``rate_model(angle_deg)`` gives the emitted pair rate.  With
    ``simulate_counts=False`` the expected (noiseless) coincidence counts
    are returned instead of a Monte Carlo draw.  Rows are
    (angle_deg, pair_rate, peak_minus_accidentals, CarResult | None).
    """
    if peak_halfwidth is None:
        peak_halfwidth = 3.0 * math.hypot(detectors[0].jitter_sigma, detectors[1].jitter_sigma)
    children = _seedseq(seed).spawn(len(angles))
    rows = []
    for ang, child in zip(angles, children):
        rate = float(rate_model(float(ang)))
        if not simulate_counts:
            K = int(round(peak_halfwidth / bin_width + 1e-9))
            win = ((-K - 0.5) * bin_width, (K + 0.5) * bin_width)
            rows.append((float(ang), rate,
                         expected_coincidence_rate(rate, detectors, split, win) * duration, None))
            continue
        s1, s2 = simulate(rate, duration, detectors, child, split, chunks)
        res = car(correlate((s1, s2), bin_width, window), peak_halfwidth)
        rows.append((float(ang), rate, res.peak_counts - res.accidental_mean, res))
    return rows


def cos2_rate_model(max_rate: float, theta0_deg: float, floor: float = 0.0):
    def model(angle_deg):
        return floor + max_rate * math.cos(math.radians(angle_deg - theta0_deg)) ** 2
    return model


def table_rate_model(angles_deg, values, max_rate: float):
    """Interpolated (period 360 deg) model from an efficiency sweep table,
    normalized so its maximum equals ``max_rate``."""
    a = np.asarray(angles_deg, dtype=float)
    v = np.asarray(values, dtype=float)
    vmax = v.max()
    scale = max_rate / vmax if vmax > 0 else 0.0

    def model(angle_deg):
        return float(np.interp(angle_deg % 360.0, a % 360.0, v, period=360.0)) * scale
    return model


# ---- serialization ---------------------------------------------------------

TAG_DTYPE = np.dtype([("t", "<i8"), ("c", "u1")])  # 9 bytes per record, packed


def tags_to_binary(streams) -> bytes:
    """Merged tags as little-endian records: int64 picoseconds + uint8 channel."""
    times, chans = _merge(streams)
    ps = np.rint(times * 1e12).astype("<i8")
    rec = np.empty(ps.size, dtype=TAG_DTYPE)
    rec["t"] = ps
    rec["c"] = chans
    return rec.tobytes()


def tags_from_binary(data: bytes, duration: float):
    rec = np.frombuffer(data, dtype=TAG_DTYPE)
    t = np.clip(rec["t"].astype(float) * 1e-12, 0.0, duration)
    return tuple(TimeTagStream(np.sort(t[rec["c"] == ch]), ch, duration) for ch in (1, 2))


def tags_to_csv_rows(streams):
    times, chans = _merge(streams)
    return list(zip(times.tolist(), chans.tolist()))


def _merge(streams):
    times = np.concatenate([s.times for s in streams])
    chans = np.concatenate([np.full(len(s), s.channel, dtype=np.uint8) for s in streams])
    order = np.lexsort((chans, times))
    return times[order], chans[order]
