"""Gaussian-mixture approximation of spectral envelopes.

A frame's envelope H(w) on a linear frequency grid (Hz) is approximated by

    G(w) = gain * sum_k w_k / sqrt(2 pi s_k^2) * exp(-(w - m_k)^2 / (2 s_k^2))

with parameters chosen to minimise the I-divergence
sum_w [H log(H/G) - H + G].  The gain is fixed to sum_w H(w) * dw so the
mixture itself models spectral shape.

All routines accept a single envelope of shape (n_bins,) or a batch of
shape (n_frames, n_bins); batched fits are computed row by row in lock
step and give bit-identical results to fitting each row alone.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .spectral import ENV_FLOOR

SIGMA_MIN = 10.0
N_COMPONENTS = 16
MAX_HALVINGS = 20
_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass
class GmmEnvelope:
    weights: np.ndarray
    means: np.ndarray  # Hz
    sigmas: np.ndarray  # Hz
    gain: np.ndarray

    @property
    def n_components(self):
        return self.weights.shape[-1]

    def frame(self, i):
        return GmmEnvelope(self.weights[i], self.means[i], self.sigmas[i], self.gain[i])


def freq_grid(n_bins, sample_rate):
    return np.linspace(0.0, sample_rate / 2.0, n_bins)


def _densities(freqs, means, sigmas):
    # in place: this is the hot loop of the fit
    z = freqs - means[..., None]
    z *= (1.0 / sigmas)[..., None]
    np.square(z, out=z)
    z *= -0.5
    np.exp(z, out=z)
    z *= (1.0 / (_SQRT_2PI * sigmas))[..., None]
    return z


def _mixture(freqs, weights, means, sigmas):
    comp = weights[..., None] * _densities(freqs, means, sigmas)
    return comp.sum(axis=-2), comp


def _combine(weights, dens):
    """Sum of weighted component densities over the component axis."""
    return (weights[..., None, :] @ dens)[..., 0, :]


def gmm_eval(params, freqs):
    """Evaluate G(w) (including gain) on ``freqs``."""
    freqs = np.asarray(freqs, dtype=np.float64)
    w = np.asarray(params.weights, float)
    curve, _ = _mixture(freqs, w, np.asarray(params.means, float), np.asarray(params.sigmas, float))
    return np.maximum(np.asarray(params.gain, float)[..., None] * curve, 0.0)


def i_divergence(H, G):
    """I-divergence sum [H ln(H/G) - H + G] with 0 ln 0 = 0.

    Reduces over the last axis. ``G`` is floored at ``ENV_FLOOR`` where H > 0.
    """
    H = np.asarray(H, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    pos = H > 0
    Gf = np.where(pos, np.maximum(G, ENV_FLOOR), G)
    log_term = np.where(pos, H * np.log(np.where(pos, H, 1.0) / np.where(pos, Gf, 1.0)), 0.0)
    return np.maximum((log_term - H + Gf).sum(axis=-1), 0.0)


def _init_one(env, freqs, K, nyquist):
    peaks, _ = find_peaks(env)
    # highest first, ties towards lower frequency
    order = sorted(peaks, key=lambda p: (-env[p], p))[:K]
    mu = list(freqs[order])
    rest = K - len(mu)
    if rest:
        mu += list((np.arange(rest) + 0.5) * nyquist / rest)
    return np.sort(np.asarray(mu, dtype=np.float64))


def init_gmm(envelope, K=N_COMPONENTS, sample_rate=16000):
    """Initial mixture: means at the K largest local maxima of the envelope.

    Missing peaks are filled with means spread uniformly over [0, Nyquist].
    Each weight is the (gain-normalised) envelope amplitude at its mean and
    every sigma starts at Nyquist / (2K).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    env = np.asarray(envelope, dtype=np.float64)
    single = env.ndim == 1
    env = np.atleast_2d(env)
    n_bins = env.shape[-1]
    nyquist = sample_rate / 2.0
    freqs = freq_grid(n_bins, sample_rate)
    dw = freqs[1] - freqs[0]
    gain = env.sum(axis=-1) * dw
    shape = env / np.where(gain > 0, gain, 1.0)[:, None]
    means = np.stack([_init_one(e, freqs, K, nyquist) for e in env])
    weights = np.stack([np.interp(m, freqs, s) for m, s in zip(means, shape)])
    sigmas = np.full_like(means, nyquist / (2.0 * K))
    out = GmmEnvelope(weights, means, sigmas, gain)
    return out.frame(0) if single else out


def _surrogate(V, M, mean_m, mu, sigma, support):
    """Per-component majoriser of the divergence (constants dropped)."""
    with np.errstate(divide="ignore"):
        return ((V + M * (mean_m - mu) ** 2) / (2.0 * sigma ** 2)
                + M * np.log(sigma) + M * np.log(support))


def fit_gmm(envelope, K=N_COMPONENTS, max_iters=200, tol=1e-6, sample_rate=16000,
            return_trace=False):
    """Fit the mixture to one envelope or a batch by I-divergence EM.

    Each iteration is a majorise-minimise step. The E-step splits h(w)
    among components by responsibility; the M-step moves each component's
    mean and sigma towards the responsibility-weighted moments, halving
    the move (up to 20 times) until that component's majoriser does not
    increase and freezing the component otherwise, then sets each weight
    to its exact minimiser. The divergence therefore never increases;
    an update that would raise it through round-off ends the fit for that
    frame. Iteration stops when the relative improvement falls below
    ``tol``. Silent envelopes (all at the floor) give a zero-weight
    mixture with zero gain.

    With ``return_trace=True`` also returns, per frame, the divergence of
    the shape-normalised fit at every accepted iterate.
    """
    env = np.asarray(envelope, dtype=np.float64)
    single = env.ndim == 1
    env = np.atleast_2d(env)
    nyquist = sample_rate / 2.0
    freqs = freq_grid(env.shape[-1], sample_rate)

    init = init_gmm(env, K, sample_rate)
    w, mu, sig, gain = init.weights, init.means, init.sigmas, init.gain
    silent = np.all(env <= ENV_FLOOR * (1 + 1e-9), axis=-1)
    h = env / np.where(gain > 0, gain, 1.0)[:, None]

    dens = _densities(freqs, mu, sig)
    support = dens.sum(axis=-1)
    G = _combine(w, dens)
    div = i_divergence(h, G)
    traces = [[d] for d in div]
    active = ~silent
    powers = np.stack([np.ones_like(freqs), freqs, freqs * freqs], axis=-1)
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        cmu, csig, csup = mu[idx], sig[idx], support[idx]
        ratio = h[idx] / np.maximum(G[idx], ENV_FLOOR)
        # zeroth to second moments of h(w) * responsibility, per component
        mom = w[idx][..., None] * (dens[idx] @ (ratio[..., None] * powers))
        M = mom[..., 0]
        safe = np.where(M > 0, M, 1.0)
        mean_m = mom[..., 1] / safe
        V = np.maximum(mom[..., 2] - M * mean_m * mean_m, 0.0)
        target_mu = np.clip(mean_m, 0.0, nyquist)
        target_sig = np.maximum(np.sqrt(V / safe), SIGMA_MIN)
        f_cur = _surrogate(V, M, mean_m, cmu, csig, csup)

        nmu, nsig, nsup = cmu.copy(), csig.copy(), csup.copy()
        ndens = dens[idx]
        pend_f, pend_k = np.nonzero(M > 0)
        step = 1.0
        for _h in range(MAX_HALVINGS + 1):
            if pend_f.size == 0:
                break
            tmu = cmu[pend_f, pend_k] + step * (target_mu[pend_f, pend_k] - cmu[pend_f, pend_k])
            tsig = csig[pend_f, pend_k] + step * (target_sig[pend_f, pend_k] - csig[pend_f, pend_k])
            tdens = _densities(freqs, tmu, tsig)
            tsup = tdens.sum(axis=-1)
            tf = _surrogate(V[pend_f, pend_k], M[pend_f, pend_k], mean_m[pend_f, pend_k],
                            tmu, tsig, tsup)
            ok = tf <= f_cur[pend_f, pend_k]
            of, ok_k = pend_f[ok], pend_k[ok]
            nmu[of, ok_k], nsig[of, ok_k], nsup[of, ok_k] = tmu[ok], tsig[ok], tsup[ok]
            ndens[of, ok_k] = tdens[ok]
            pend_f, pend_k = pend_f[~ok], pend_k[~ok]
            step *= 0.5
        nw = np.where(M > 0, M / np.maximum(nsup, 1e-300), 0.0)
        nG = _combine(nw, ndens)
        ndiv = i_divergence(h[idx], nG)

        old = div[idx]
        ok = ndiv <= old
        acc = idx[ok]
        w[acc], mu[acc], sig[acc], support[acc] = nw[ok], nmu[ok], nsig[ok], nsup[ok]
        dens[acc], G[acc], div[acc] = ndens[ok], nG[ok], ndiv[ok]
        for f, d in zip(acc, ndiv[ok]):
            traces[f].append(d)
        rel = (old - ndiv) / np.maximum(old, 1e-300)
        active[idx[~ok | (rel < tol)]] = False

    w = np.where(silent[:, None], 0.0, w)
    gain = np.where(silent, 0.0, gain)
    out = GmmEnvelope(w, mu, sig, gain)
    if single:
        out = out.frame(0)
        traces = traces[0]
    return (out, traces) if return_trace else out
