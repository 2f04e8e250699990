"""Analysis, copy-synthesis and MCD measurement built from the modules."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import features as ffmt
from .audio_io import PCM_SCALE, Waveform, frame_signal, quantize
from .contf0 import continuous_f0
from .cwt import cwt_decompose, dyadic_scales
from .gmm import fit_gmm
from .hmm import reduce_restore
from .metrics import mcd
from .spectral import MCEP_ORDER, envelope_to_melcepstrum, estimate_envelope
from .synthesis import apply_anchor_distortion, synthesize

SAMPLE_RATE = 16000
HOP = 80  # 5 ms
WIN = 400  # 25 ms
FFT_SIZE = 1024
CHUNK_FRAMES = 64
GMM_ITERS = 30  # analysis budget; fit_gmm itself defaults to 200


def _require_rate(waveform):
    if waveform.sample_rate_hz != SAMPLE_RATE:
        raise ValueError(f"expected {SAMPLE_RATE} Hz input, got {waveform.sample_rate_hz} Hz "
                         "(resample before analysis)")


def _chunked(fn, n, workers):
    """Apply ``fn(slice)`` to fixed-size frame chunks, in order.

    Chunk boundaries do not depend on ``workers``, so results are identical
    for any worker count.
    """
    slices = [slice(i, min(i + CHUNK_FRAMES, n)) for i in range(0, n, CHUNK_FRAMES)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, slices))
    return [fn(s) for s in slices]


def analyze_waveform(waveform, K=16, n_states=2, n_scales=10, scale0=0.02, fft_size=FFT_SIZE,
                     hop=HOP, win=WIN, workers=1, gmm_iters=GMM_ITERS):
    """Run the full analysis chain and return an in-memory FeatureFile.

    framing -> pitch observations -> Kalman smoothing -> envelopes (using
    the smoothed F0) with liftering -> per-frame mixture fits -> HMM over
    (gain, weights) -> CWT of log-F0.  Stored values are float32, exactly
    as they will be written.
    """
    _require_rate(waveform)
    fs = waveform.sample_rate_hz
    frames = frame_signal(waveform, hop, win).frames
    n = frames.shape[0]
    if n < n_states:
        raise ValueError(f"signal has {n} frames, fewer than the {n_states} HMM states")
    track, _ = continuous_f0(waveform, hop, win)

    def fit_chunk(sl):
        env = estimate_envelope(frames[sl], track.f0_hz[sl], fft_size, fs)
        return fit_gmm(env, K, max_iters=gmm_iters, sample_rate=fs)

    parts = _chunked(fit_chunk, n, workers)
    gains = np.concatenate([p.gain for p in parts])
    w = np.concatenate([p.weights for p in parts])
    mu = np.concatenate([p.means for p in parts])
    sig = np.concatenate([p.sigmas for p in parts])
    order = np.argsort(mu, axis=1, kind="stable")
    w, mu, sig = (np.take_along_axis(a, order, axis=1).astype(np.float32) for a in (w, mu, sig))
    gains = gains.astype(np.float32)

    obs = np.column_stack([gains, w]).astype(np.float64)
    centre = obs.mean(axis=0)
    spread = obs.std(axis=0)
    spread = np.where(spread > 0, spread, 1.0)
    path, model, _ = reduce_restore((obs - centre) / spread, n_states)
    state_means = (model.means * spread + centre).astype(np.float32)
    state_vars = (model.variances * spread ** 2).astype(np.float32)
    residuals = (obs - state_means.astype(np.float64)[path]).astype(np.float32)

    hop_s = hop / fs
    decomp = cwt_decompose(np.log(track.f0_hz), hop_s, dyadic_scales(scale0, n_scales))
    energy = np.sqrt(np.mean(frames ** 2, axis=1))

    return ffmt.FeatureFile(
        sample_rate=fs, hop_samples=hop, win_samples=win, fft_size=fft_size,
        scale0=np.float32(scale0), gains=gains, weights=w, means=mu, sigmas=sig,
        transmat=model.transmat.astype(np.float32), state_means=state_means,
        state_vars=state_vars, state_path=path.astype(np.uint32), hmm_residuals=residuals,
        scales=decomp.scales.astype(np.float32),
        cwt_coefficients=decomp.coefficients.astype(np.float32),
        cwt_residual=decomp.residual.astype(np.float32),
        mean_level=np.float32(decomp.mean_level), energy=energy.astype(np.float32))


def as_written(waveform):
    """The waveform exactly as it reads back after a 16-bit WAV round trip."""
    return Waveform(quantize(waveform.samples).astype(np.float64) / PCM_SCALE,
                    waveform.sample_rate_hz)


def melcepstra(waveform, hop=HOP, win=WIN, fft_size=FFT_SIZE, order=MCEP_ORDER):
    """Per-frame mel-cepstra from envelopes estimated with the signal's own F0."""
    frames = frame_signal(waveform, hop, win).frames
    track, _ = continuous_f0(waveform, hop, win)
    env = estimate_envelope(frames, track.f0_hz, fft_size, waveform.sample_rate_hz)
    return envelope_to_melcepstrum(env, order)


def mcd_between(ref, test, hop=HOP, win=WIN):
    """MCD of ``test`` against ``ref`` on identical framing (no time warping).

    Durations must agree within one frame hop; the test signal is trimmed
    or zero-padded to the reference length.
    """
    if ref.sample_rate_hz != test.sample_rate_hz:
        raise ValueError("sample rates differ")
    if abs(len(ref) - len(test)) > hop:
        raise ValueError(f"durations differ by {abs(len(ref) - len(test))} samples "
                         f"(more than one {hop}-sample frame)")
    y = np.zeros(len(ref))
    m = min(len(ref), len(test))
    y[:m] = test.samples[:m]
    return mcd(melcepstra(ref, hop, win), melcepstra(Waveform(y, test.sample_rate_hz), hop, win))


def copysynth(waveform, anchor=False, seed=42, workers=1, **analysis_options):
    """Analyse then resynthesise ``waveform``; returns (output, McdReport).

    The output is trimmed to the input length and already quantised to
    16-bit, so the report equals an MCD measured from the written file.
    """
    ff = analyze_waveform(waveform, workers=workers, **analysis_options)
    if anchor:
        ff = apply_anchor_distortion(ff)
    out = synthesize(ff, seed=seed)
    out = as_written(Waveform(out.samples[:len(waveform)], out.sample_rate_hz))
    return out, mcd_between(waveform, out, ff.hop_samples, ff.win_samples)
