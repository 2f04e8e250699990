"""Source-filter resynthesis from GMM envelopes and a CWT F0 contour."""

from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform
from .cwt import CwtDecomposition, cwt_reconstruct
from .gmm import GmmEnvelope, freq_grid, gmm_eval
from .spectral import ENV_FLOOR, F0_MAX, F0_MIN, hann

PEAK_LIMIT = 0.95
DEFAULT_SPLIT_HZ = 4000.0
DEFAULT_SEED = 42


@dataclass
class ExcitationPlan:
    f0_hz: np.ndarray  # per frame
    hop_samples: int
    win_samples: int
    voicing_split_hz: float = DEFAULT_SPLIT_HZ
    noise_seed: int = DEFAULT_SEED
    frame_gains: np.ndarray | None = None


def _per_sample(track, n_samples, hop, win):
    centres = np.arange(len(track)) * hop + win / 2.0
    return np.interp(np.arange(n_samples), centres, np.asarray(track, dtype=np.float64))


def pulse_positions(f0_per_sample, sample_rate):
    """Sample indices of glottal pulses from a running phase accumulator.

    A pulse is emitted at n = 0 and wherever the accumulated phase
    sum_{m<n} f0[m] / fs crosses an integer, so non-integer periods never
    accumulate rounding drift.
    """
    inc = np.asarray(f0_per_sample, dtype=np.float64) / sample_rate
    phase = np.concatenate([[0.0], np.cumsum(inc)[:-1]])
    cycle = np.floor(phase + 1e-9)
    return np.flatnonzero(np.diff(cycle, prepend=-1.0) > 0)


def build_excitation(plan, n_samples, sample_rate):
    """Pulse train below the split frequency, seeded white noise above it.

    The bands are joined with a complementary zero-phase brick-wall split
    over the whole signal.  Pulses have amplitude sqrt(period) so both
    components have unit power.
    """
    f0 = np.clip(_per_sample(plan.f0_hz, n_samples, plan.hop_samples, plan.win_samples),
                 F0_MIN, F0_MAX)
    pulses = np.zeros(n_samples)
    pos = pulse_positions(f0, sample_rate)
    pulses[pos] = np.sqrt(sample_rate / f0[pos])
    noise = np.random.default_rng(plan.noise_seed).standard_normal(n_samples)
    split = plan.voicing_split_hz
    nyquist = sample_rate / 2.0
    if split > nyquist:
        raise ValueError("voicing split above Nyquist")
    if split >= nyquist:
        exc = pulses
    elif split <= 0:
        exc = noise
    else:
        low = np.fft.rfftfreq(n_samples, 1.0 / sample_rate) < split
        spectrum = np.where(low, np.fft.rfft(pulses), np.fft.rfft(noise))
        exc = np.fft.irfft(spectrum, n_samples)
    if plan.frame_gains is not None:
        exc = exc * _per_sample(plan.frame_gains, n_samples, plan.hop_samples, plan.win_samples)
    return exc


def envelope_filter(excitation, envelopes, hop_samples, win_samples, peak=PEAK_LIMIT):
    """Zero-phase per-frame magnitude filtering with Hann overlap-add.

    Frame i covers samples [i * hop, i * hop + win).  Extra frames carrying
    the edge envelopes are run past both ends so every output sample gets
    the full overlap-add sum, which is divided out.  If ``peak`` is given
    and the result exceeds it, the output is scaled down to that peak;
    quieter output is left alone.
    """
    exc = np.asarray(excitation, dtype=np.float64)
    env = np.atleast_2d(np.asarray(envelopes, dtype=np.float64))
    n_frames, n_bins = env.shape
    hop, win = int(hop_samples), int(win_samples)
    expected = (n_frames - 1) * hop + win
    if exc.size != expected:
        raise ValueError(f"frame count mismatch: {n_frames} envelopes need {expected} "
                         f"samples, excitation has {exc.size}")
    nfft = 2 * (n_bins - 1)
    if nfft < win:
        raise ValueError("envelope resolution is coarser than the window")
    extra = -(-win // hop) - 1
    lead = extra * hop
    x = np.concatenate([np.zeros(lead), exc, np.zeros(lead + hop)])
    window = hann(win)
    offset = (nfft - win) // 2
    out = np.zeros(x.size + nfft)
    wsum = np.zeros(x.size + nfft)
    total = n_frames + 2 * extra
    starts = np.arange(total) * hop
    env_idx = np.clip(np.arange(total) - extra, 0, n_frames - 1)
    segs = x[starts[:, None] + np.arange(win)] * window
    buf = np.zeros((total, nfft))
    buf[:, offset:offset + win] = segs
    filtered = np.fft.irfft(np.fft.rfft(buf, axis=1) * env[env_idx], nfft, axis=1)
    # out is indexed by sample + offset so no frame spills below zero
    for j, s in enumerate(starts):
        out[s:s + nfft] += filtered[j]
        wsum[s:s + win] += window
    y = out[lead + offset:lead + offset + exc.size] / wsum[lead:lead + exc.size]
    if peak is not None:
        m = np.max(np.abs(y)) if y.size else 0.0
        if m > peak:
            y = y * (peak / m)
    return y


def _frame_params(ff, hmm_restore=False, hmm_residual=False):
    gains = ff.gains.astype(np.float64)
    weights = ff.weights.astype(np.float64)
    means = ff.means.astype(np.float64)
    sigmas = ff.sigmas.astype(np.float64)
    if hmm_restore:
        path = ff.state_path.astype(np.intp)
        obs = ff.state_means.astype(np.float64)[path]
        if hmm_residual and ff.hmm_residuals is not None:
            obs = obs + ff.hmm_residuals.astype(np.float64)
        gains, weights = np.maximum(obs[:, 0], 0.0), np.maximum(obs[:, 1:], 0.0)
        order = np.argsort(means, axis=1, kind="stable")
        means = np.take_along_axis(means, order, axis=1)
        sigmas = np.take_along_axis(sigmas, order, axis=1)
        for s in np.unique(path):
            sel = path == s
            means[sel] = means[sel].mean(axis=0)
            sigmas[sel] = sigmas[sel].mean(axis=0)
    return GmmEnvelope(weights, means, sigmas, gains)


def filter_envelopes(ff, hmm_restore=False, hmm_residual=False):
    """Per-frame filter magnitudes on the synthesis FFT grid.

    The analysis envelope of white noise through a filter H is |H| times
    the window's RMS gain sqrt(sum w^2); that factor is divided out here.
    """
    params = _frame_params(ff, hmm_restore, hmm_residual)
    freqs = freq_grid(ff.fft_size // 2 + 1, ff.sample_rate)
    G = gmm_eval(params, freqs)
    norm = np.sqrt(np.sum(hann(ff.win_samples) ** 2))
    return np.maximum(G / norm, ENV_FLOOR)


def log_f0_contour(ff, f0_residual=True, f0_shift_semitones=0.0):
    decomp = CwtDecomposition(ff.scales.astype(np.float64), ff.cwt_coefficients.astype(np.float64),
                              ff.cwt_residual.astype(np.float64), float(ff.mean_level),
                              ff.hop_samples / ff.sample_rate)
    return cwt_reconstruct(decomp, include_residual=f0_residual) + f0_shift_semitones * np.log(2.0) / 12.0


def synthesize(ff, seed=DEFAULT_SEED, split_hz=DEFAULT_SPLIT_HZ, f0_residual=True,
               hmm_restore=False, hmm_residual=False, f0_shift_semitones=0.0, peak=PEAK_LIMIT):
    """Render a feature file to a waveform of (n_frames - 1) * hop + win samples."""
    env = filter_envelopes(ff, hmm_restore, hmm_residual)
    f0 = np.clip(np.exp(log_f0_contour(ff, f0_residual, f0_shift_semitones)), F0_MIN, F0_MAX)
    plan = ExcitationPlan(f0, ff.hop_samples, ff.win_samples, split_hz, seed)
    n_samples = (ff.n_frames - 1) * ff.hop_samples + ff.win_samples
    exc = build_excitation(plan, n_samples, ff.sample_rate)
    y = envelope_filter(exc, env, ff.hop_samples, ff.win_samples, peak=peak)
    return Waveform(y, ff.sample_rate)


def anchor_range(K):
    """0-based component indices replaced by their average in the anchor."""
    if K == 16:
        return np.arange(8, 16)
    if K < 16:
        return np.arange(-(-K // 2) - 1, K)
    return np.arange(K // 2, K)


def apply_anchor_distortion(ff):
    """Degrade the upper half of each frame's mixture (sorted by mean).

    For K = 16, components 9..16 each get the average weight, mean and
    sigma of that group.
    """
    order = np.argsort(ff.means, axis=1, kind="stable")
    w = np.take_along_axis(ff.weights, order, axis=1).copy()
    mu = np.take_along_axis(ff.means, order, axis=1).copy()
    sig = np.take_along_axis(ff.sigmas, order, axis=1).copy()
    idx = anchor_range(ff.n_components)
    for arr in (w, mu, sig):
        arr[:, idx] = arr[:, idx].astype(np.float64).mean(axis=1, keepdims=True)
    return ff.replace(weights=w, means=mu, sigmas=sig)
