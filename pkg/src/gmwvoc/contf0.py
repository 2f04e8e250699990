"""Continuous F0: autocorrelation pitch observations and Kalman smoothing.

Every frame receives an F0 observation with a variance that grows as
periodicity weakens, so unvoiced and silent frames are never missing; a
random-walk Kalman smoother over log-F0 then bridges them.
"""

from dataclasses import dataclass

import numpy as np

from .audio_io import frame_count

F0_MIN = 50.0
F0_MAX = 500.0
OBS_VAR_SCALE = 1.0  # v0, log-Hz^2
OBS_VAR_FLOOR = 1e-4
PROCESS_NOISE = 5e-4  # per frame, log-Hz^2
UNVOICED_F0 = float(np.sqrt(F0_MIN * F0_MAX))
PEAK_RATIO = 0.9


@dataclass
class PitchObservations:
    f0_hz: np.ndarray
    variance: np.ndarray
    clarity: np.ndarray


@dataclass
class ContF0Track:
    f0_hz: np.ndarray
    variance: np.ndarray
    frame_hop_s: float = 0.005

    def __len__(self):
        return self.f0_hz.size


def _nccf(frames, segments):
    """Normalised cross-correlation of each frame with its lagged copies.

    ``frames`` is (F, L); ``segments`` is (F, L + max_lag) starting at the
    same sample. Returns (F, max_lag + 1).
    """
    L = frames.shape[1]
    n_lag = segments.shape[1] - L + 1
    nfft = 1 << int(np.ceil(np.log2(segments.shape[1] + L)))
    cross_spectrum = np.fft.rfft(segments, nfft) * np.conj(np.fft.rfft(frames, nfft))
    cross = np.fft.irfft(cross_spectrum, nfft)[:, :n_lag]
    sq = np.concatenate([np.zeros((segments.shape[0], 1)), np.cumsum(segments ** 2, axis=1)], axis=1)
    e_lag = sq[:, L:L + n_lag] - sq[:, :n_lag]
    e0 = e_lag[:, :1]
    denom = np.sqrt(np.maximum(e0 * e_lag, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 1e-12, cross / denom, 0.0)
    return np.clip(r, -1.0, 1.0)


def _pick_lag(r, lo, hi):
    """First local peak reaching PEAK_RATIO of the best peak, refined parabolically."""
    seg = r[lo:hi + 1]
    best = seg.max()
    if best <= 0:
        return None, 0.0
    inner = np.flatnonzero((seg[1:-1] >= seg[:-2]) & (seg[1:-1] >= seg[2:])) + 1
    cands = [i for i in inner if seg[i] >= PEAK_RATIO * best]
    i = cands[0] if cands else int(np.argmax(seg))
    k = lo + i
    lag = float(k)
    if 0 < k < r.size - 1:
        y0, y1, y2 = r[k - 1], r[k], r[k + 1]
        den = y0 - 2 * y1 + y2
        if den < 0:
            lag = k + 0.5 * (y0 - y2) / den
    return lag, float(r[k])


def estimate_pitch_candidates(waveform, hop_samples, win_samples, f0_min=F0_MIN,
                              f0_max=F0_MAX, v0=OBS_VAR_SCALE, v_floor=OBS_VAR_FLOOR):
    """Per-frame F0 observation and its log-domain variance.

    Clarity is the height of the selected normalised autocorrelation peak,
    clipped to [0, 1]; the variance is ``v0 * (1 - clarity)**2 + v_floor``.
    Frames with no positive peak report the geometric centre of the F0
    range at the maximal variance.
    """
    x = waveform.samples
    fs = waveform.sample_rate_hz
    lo = int(np.floor(fs / f0_max))
    hi = int(np.ceil(fs / f0_min))
    n = frame_count(x.size, hop_samples, win_samples)
    total = (n - 1) * hop_samples + win_samples + hi
    padded = np.zeros(total)
    padded[: x.size] = x
    starts = np.arange(n) * hop_samples
    frames = padded[starts[:, None] + np.arange(win_samples)]
    segments = padded[starts[:, None] + np.arange(win_samples + hi)]
    r = _nccf(frames, segments)
    f0 = np.full(n, UNVOICED_F0)
    clarity = np.zeros(n)
    for i in range(n):
        lag, c = _pick_lag(r[i], lo, hi)
        if lag is not None:
            f0[i] = np.clip(fs / lag, f0_min, f0_max)
            clarity[i] = min(max(c, 0.0), 1.0)
    return PitchObservations(f0, v0 * (1.0 - clarity) ** 2 + v_floor, clarity)


def rts_smooth(y, r, q=PROCESS_NOISE):
    """Random-walk Kalman filter plus Rauch-Tung-Striebel smoother.

    The first state has a flat prior, so its filtered estimate is the
    first observation. Returns ``(smoothed_mean, smoothed_var,
    filtered_mean, filtered_var)``.
    """
    y = np.asarray(y, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    T = y.size
    if T < 1:
        raise ValueError("need at least one observation")
    xf = np.empty(T)
    pf = np.empty(T)
    xf[0], pf[0] = y[0], r[0]
    for t in range(1, T):
        pp = pf[t - 1] + q
        s = pp + r[t]
        k = pp / s if s > 0 else 1.0
        xf[t] = xf[t - 1] + k * (y[t] - xf[t - 1])
        pf[t] = (1.0 - k) * pp
    xs = xf.copy()
    ps = pf.copy()
    for t in range(T - 2, -1, -1):
        pp = pf[t] + q
        c = pf[t] / pp if pp > 0 else 1.0
        xs[t] = xf[t] + c * (xs[t + 1] - xf[t])
        ps[t] = pf[t] + c * c * (ps[t + 1] - pp)
    return xs, np.maximum(ps, 0.0), xf, pf


def kalman_smooth(f0_obs_hz, obs_var, q=PROCESS_NOISE, f0_min=F0_MIN, f0_max=F0_MAX,
                  frame_hop_s=0.005):
    """Smooth per-frame F0 observations into a gap-free :class:`ContF0Track`."""
    xs, ps, _, _ = rts_smooth(np.log(np.asarray(f0_obs_hz, float)), obs_var, q)
    return ContF0Track(np.clip(np.exp(xs), f0_min, f0_max), ps, frame_hop_s)


def continuous_f0(waveform, hop_samples, win_samples, q=PROCESS_NOISE):
    obs = estimate_pitch_candidates(waveform, hop_samples, win_samples)
    return kalman_smooth(obs.f0_hz, obs.variance, q,
                         frame_hop_s=hop_samples / waveform.sample_rate_hz), obs

