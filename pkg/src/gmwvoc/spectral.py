"""Spectral envelope estimation, cepstral liftering and mel-cepstra.

Envelopes are linear-magnitude arrays over the ``fft_size // 2 + 1`` bins
of a real FFT; batched inputs carry frames on the leading axis.
"""

import numpy as np
from scipy.signal import get_window

ENV_FLOOR = 1e-9
MCEP_ORDER = 24
WARP_ALPHA = 0.42
F0_MIN = 50.0
F0_MAX = 500.0


def _check_fft_size(fft_size, win_length):
    if fft_size < win_length:
        raise ValueError(f"fft_size {fft_size} is shorter than the window ({win_length})")
    if fft_size & (fft_size - 1):
        raise ValueError(f"fft_size {fft_size} is not a power of two")


def hann(n):
    """Periodic Hann window (constant overlap-add at hops of n/R)."""
    return get_window("hann", n, fftbins=True)


def magnitude_spectrum(frame, fft_size):
    """Magnitude of the Hann-windowed, zero-padded half spectrum."""
    frame = np.asarray(frame, dtype=np.float64)
    _check_fft_size(fft_size, frame.shape[-1])
    return np.abs(np.fft.rfft(frame * hann(frame.shape[-1]), n=fft_size))


def _smooth_power(power, width_bins):
    """Rectangular moving average of ``power`` with fractional widths.

    Uses linear interpolation of the cumulative sum over a mirrored
    spectrum, so widths need not be whole bins.
    """
    n_bins = power.shape[-1]
    pad = int(np.ceil(np.max(width_bins))) + 2
    ext = np.concatenate([power[..., pad:0:-1], power, power[..., -2:-pad - 2:-1]], axis=-1)
    cum = np.concatenate([np.zeros(ext.shape[:-1] + (1,)), np.cumsum(ext, axis=-1)], axis=-1)
    # cum[j] integrates ext over [j - 0.5, ...) in bin-centred coordinates
    grid = np.arange(cum.shape[-1]) - 0.5
    centres = np.arange(n_bins) + pad
    out = np.empty_like(power)
    for i in np.ndindex(power.shape[:-1]):
        half = 0.5 * width_bins[i]
        hi = np.interp(centres + half, grid, cum[i])
        lo = np.interp(centres - half, grid, cum[i])
        out[i] = (hi - lo) / (2 * half)
    return out


def cepstral_lifter(envelope, lifter_order):
    """Keep only quefrencies below ``lifter_order`` of the log envelope.

    ``lifter_order=1`` keeps c(0) alone, which is the geometric mean level
    over the full (two-sided) spectrum.
    """
    if np.any(np.asarray(lifter_order) < 1):
        raise ValueError("lifter_order must be >= 1")
    env = np.maximum(np.asarray(envelope, dtype=np.float64), ENV_FLOOR)
    n_fft = 2 * (env.shape[-1] - 1)
    ceps = np.fft.irfft(np.log(env), n=n_fft, axis=-1)
    order = np.broadcast_to(np.asarray(lifter_order), env.shape[:-1])
    q = np.minimum(np.arange(n_fft), n_fft - np.arange(n_fft))
    ceps = np.where(q < order[..., None], ceps, 0.0)
    return np.maximum(np.exp(np.fft.rfft(ceps, axis=-1).real), ENV_FLOOR)


def lifter_order_for_f0(f0_hz, sample_rate):
    """Cut-off at quefrency 0.5/f0 seconds, in samples."""
    return np.maximum(1, np.round(0.5 * sample_rate / np.asarray(f0_hz, float))).astype(int)


def estimate_envelope(frames, f0_hz, fft_size, sample_rate=16000, lifter=True):
    """Smooth spectral envelope H(w) of one frame or a batch of frames.

    Three steps: Hann power spectrum, moving average of width 2*f0/3 Hz
    across frequency, then cepstral liftering at quefrency 0.5/f0. The
    result is a linear magnitude floored at ``ENV_FLOOR``; a silent frame
    returns the floor exactly.
    """
    frames = np.asarray(frames, dtype=np.float64)
    single = frames.ndim == 1
    frames = np.atleast_2d(frames)
    f0 = np.clip(np.broadcast_to(np.asarray(f0_hz, float), frames.shape[:1]), F0_MIN, F0_MAX)
    power = magnitude_spectrum(frames, fft_size) ** 2
    bin_hz = sample_rate / fft_size
    smoothed = _smooth_power(power, 2.0 * f0 / 3.0 / bin_hz)
    env = np.maximum(np.sqrt(np.maximum(smoothed, 0.0)), ENV_FLOOR)
    if lifter:
        env = cepstral_lifter(env, lifter_order_for_f0(f0, sample_rate))
    silent = ~np.any(frames != 0.0, axis=-1)
    env[silent] = ENV_FLOOR
    return env[0] if single else env


def _warp(omega, alpha):
    """All-pass (bilinear) frequency warping and its derivative."""
    warped = omega + 2.0 * np.arctan(alpha * np.sin(omega) / (1.0 - alpha * np.cos(omega)))
    slope = (1.0 - alpha ** 2) / (1.0 - 2.0 * alpha * np.cos(omega) + alpha ** 2)
    return warped, slope


def envelope_to_melcepstrum(envelope, order=MCEP_ORDER, warp_alpha=WARP_ALPHA):
    """Mel-cepstrum c(0..order) of the log envelope on a warped axis.

    With warped frequency W(w), the coefficients satisfy
    log H(w) = c0 + 2 * sum_m c_m cos(m W(w)); they are obtained by
    changing variables in the cosine integral and applying the trapezoid
    rule on the linear FFT grid, which is spectrally accurate for this
    periodic integrand.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    log_env = np.log(np.maximum(np.asarray(envelope, dtype=np.float64), ENV_FLOOR))
    n_bins = log_env.shape[-1]
    omega = np.linspace(0.0, np.pi, n_bins)
    warped, slope = _warp(omega, warp_alpha)
    weights = np.full(n_bins, 2.0)
    weights[[0, -1]] = 1.0
    weights /= 2.0 * (n_bins - 1)
    basis = np.cos(np.arange(order + 1)[:, None] * warped[None, :]) * (slope * weights)[None, :]
    return log_env @ basis.T


def melcepstrum_to_envelope(mcep, n_bins, warp_alpha=WARP_ALPHA):
    """Linear-magnitude envelope on ``n_bins`` FFT bins from mel-cepstra."""
    mcep = np.asarray(mcep, dtype=np.float64)
    omega = np.linspace(0.0, np.pi, n_bins)
    warped, _ = _warp(omega, warp_alpha)
    m = np.arange(mcep.shape[-1])
    scale = np.where(m == 0, 1.0, 2.0)
    basis = np.cos(m[:, None] * warped[None, :]) * scale[:, None]
    return np.exp(mcep @ basis)
