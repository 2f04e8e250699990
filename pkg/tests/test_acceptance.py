"""Acceptance criteria, each run at its stated tolerance and time budget.

Every test prints one PASS/FAIL line (repeated in the pytest terminal
summary) and then asserts the same condition.
"""

import time

import numpy as np
import pytest

from conftest import FIXTURE_NAMES, fixture_path, record_acceptance
from oracles import (gaussian_mixture, hmm_oracle, random_walk_filtered, random_walk_posterior,
                     separated_mixture, stationary_direct)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False

    @property
    def ok(self):
        return self.elapsed < self.seconds

    def __str__(self):
        return f"runtime {self.elapsed:.1f}s < {self.seconds}s: {'ok' if self.ok else 'EXCEEDED'}"


def verdict(number, title, checks, budget):
    """Print the criterion line and assert every check and the time budget."""
    ok = all(c[1] for c in checks) and budget.ok
    parts = "; ".join(f"{name}: {'ok' if good else 'FAILED'} ({detail})"
                      for name, good, detail in checks)
    record_acceptance(f"[{'PASS' if ok else 'FAIL'}] criterion {number} {title} | {parts} | {budget}")
    assert ok, parts


def test_criterion_1_hmm_oracle_equivalence():
    from gmwvoc.hmm import HmmModel, backward, forward, posterior, viterbi
    rng = np.random.default_rng(2024)
    worst = {"like": 0.0, "alpha": 0.0, "beta": 0.0, "gamma": 0.0}
    viterbi_hits = 0
    with Budget(10) as budget:
        for _ in range(1000):
            n = int(rng.integers(1, 4))
            T = int(rng.integers(1, 7))
            model = HmmModel.build(rng.dirichlet(np.ones(n), size=n), rng.normal(0, 2, n),
                                   rng.uniform(0.3, 2.0, n), rng.dirichlet(np.ones(n)))
            y = rng.normal(0, 2, T)
            like, alpha, beta, gamma, best = hmm_oracle(
                model.transmat, model.means[:, 0], model.variances[:, 0], model.initial, y)
            la, ll = forward(model, y)
            lb = backward(model, y)
            worst["like"] = max(worst["like"], abs(np.exp(ll) - like))
            worst["alpha"] = max(worst["alpha"], np.max(np.abs(np.exp(la) - alpha)))
            worst["beta"] = max(worst["beta"], np.max(np.abs(np.exp(lb) - beta)))
            worst["gamma"] = max(worst["gamma"], np.max(np.abs(posterior(la, lb) - gamma)))
            viterbi_hits += int(np.array_equal(viterbi(model, y), best))
    checks = [(k, v <= 1e-10, f"max err {v:.1e} <= 1e-10") for k, v in worst.items()]
    checks.append(("viterbi", viterbi_hits == 1000, f"{viterbi_hits}/1000 exact"))
    verdict(1, "HMM oracle equivalence", checks, budget)


def _markov_data(rng, T, P, means, sd):
    states = np.zeros(T, dtype=int)
    for t in range(1, T):
        states[t] = rng.choice(len(means), p=P[states[t - 1]])
    return np.asarray(means)[states] + sd * rng.normal(size=T)


def test_criterion_2_baum_welch_monotonicity():
    from gmwvoc.hmm import HmmModel, baum_welch, seed_model
    rng = np.random.default_rng(7)
    P = np.array([[0.95, 0.05], [0.1, 0.9]])
    with Budget(30) as budget:
        y = _markov_data(rng, 500, P, [0.0, 2.0], 1.0)
        worst_drop = 0.0
        for _ in range(100):
            seed = HmmModel.build(rng.dirichlet(np.ones(2), size=2), rng.normal(0, 2, 2),
                                  rng.uniform(0.3, 3.0, 2))
            _, trace = baum_welch(y, 2, seed, return_trace=True)
            worst_drop = max(worst_drop, float(np.max(-np.diff(trace), initial=0.0)))
        truth = np.array([10.0, 16.0])  # 6 sigma apart
        y2 = _markov_data(rng, 2000, P, truth, 1.0)
        model = baum_welch(y2, 2, seed_model(y2, 2))
        rel = np.max(np.abs(np.sort(model.means[:, 0]) - truth) / truth)
    verdict(2, "Baum-Welch monotonicity and recovery", [
        ("monotone", worst_drop <= 1e-8, f"largest decrease {worst_drop:.1e} <= 1e-8 over 100 seeds"),
        ("recovery", rel <= 0.05, f"max relative mean error {rel:.2%} <= 5%"),
    ], budget)


def test_criterion_3_stationary_distribution():
    from gmwvoc.hmm import stationary_distribution
    rng = np.random.default_rng(3)
    worst = 0.0
    with Budget(60) as budget:
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            P = rng.dirichlet(np.ones(n), size=n)
            pi = stationary_distribution(P)
            worst = max(worst, float(np.max(np.abs(pi @ P - pi))), abs(pi.sum() - 1.0))
        example = stationary_distribution(np.array([[0.9, 0.1], [0.5, 0.5]]))
        oracle = stationary_direct(np.array([[0.9, 0.1], [0.5, 0.5]]))
    err = float(np.max(np.abs(example - np.array([5 / 6, 1 / 6]))))
    verdict(3, "stationary distribution", [
        ("residual", worst <= 1e-12, f"max |pi P - pi| {worst:.1e} <= 1e-12"),
        ("example", err <= 1e-12 and np.allclose(oracle, [5 / 6, 1 / 6], atol=1e-12),
         f"[5/6, 1/6] error {err:.1e}"),
    ], budget)


def test_criterion_4_gmm_fit():
    from gmwvoc.audio_io import frame_signal, read_wav
    from gmwvoc.contf0 import continuous_f0
    from gmwvoc.gmm import fit_gmm, freq_grid
    from gmwvoc.spectral import ENV_FLOOR, estimate_envelope
    rng = np.random.default_rng(4)
    freqs = freq_grid(513, 16000)
    worst_ratio, worst_rise, n_runs = 0.0, 0.0, 0
    with Budget(60) as budget:
        for K, count in ((3, 67), (8, 67), (16, 66)):
            envs = []
            for _ in range(count):
                w, mu, sig = separated_mixture(rng, K, gain=rng.uniform(0.1, 10.0))
                envs.append(np.maximum(gaussian_mixture(freqs, w, mu, sig), ENV_FLOOR))
            _, traces = fit_gmm(np.stack(envs), K, return_trace=True)
            for tr in traces:
                worst_ratio = max(worst_ratio, tr[-1] / tr[0])
                worst_rise = max(worst_rise, float(np.max(np.diff(tr), initial=-np.inf)))
            n_runs += count
        speech_rise, n_speech = -np.inf, 0
        for name in FIXTURE_NAMES:
            clip = read_wav(fixture_path(name))
            frames = frame_signal(clip, 80, 400).frames
            track, obs = continuous_f0(clip, 80, 400)
            loud = np.flatnonzero(np.sqrt(np.mean(frames ** 2, axis=1)) > 0.01)
            pick = loud[np.linspace(0, loud.size - 1, 17).astype(int)]
            env = estimate_envelope(frames[pick], track.f0_hz[pick], 1024)
            _, traces = fit_gmm(env, 16, return_trace=True)
            for tr in traces[: 50 - n_speech]:
                speech_rise = max(speech_rise, float(np.max(np.diff(tr), initial=-np.inf)))
                n_speech += 1
    verdict(4, "GMM I-divergence fit", [
        ("reduction", worst_ratio <= 1e-3,
         f"worst final/initial {worst_ratio:.1e} <= 1e-3 over {n_runs} synthetic envelopes"),
        ("monotone", worst_rise <= 1e-12 and speech_rise <= 1e-12,
         f"largest step increase {max(worst_rise, speech_rise):.1e} <= 1e-12 "
         f"(synthetic and {n_speech} fixture frames)"),
    ], budget)


def test_criterion_5_kalman_smoother():
    from gmwvoc.contf0 import rts_smooth
    rng = np.random.default_rng(5)
    worst_mean, worst_var, monotone = 0.0, 0.0, True
    with Budget(5) as budget:
        for _ in range(500):
            T = int(rng.integers(1, 11))
            y = rng.normal(5.0, 0.5, T)
            r = rng.uniform(1e-3, 1.0, T)
            q = float(rng.uniform(1e-4, 0.1))
            xs, ps, xf, pf = rts_smooth(y, r, q)
            mean, var = random_walk_posterior(y, r, q)
            fm, fv = random_walk_filtered(y, r, q)
            worst_mean = max(worst_mean, float(np.max(np.abs(xs - mean))),
                             float(np.max(np.abs(xf - fm))))
            worst_var = max(worst_var, float(np.max(np.abs(ps - var))),
                            float(np.max(np.abs(pf - fv))))
            monotone &= bool(np.all(ps <= pf + 1e-12) and np.all(pf <= r + 1e-12))
    verdict(5, "Kalman smoother", [
        ("posterior", max(worst_mean, worst_var) <= 1e-9,
         f"max deviation from dense oracle {max(worst_mean, worst_var):.1e} <= 1e-9"),
        ("variance order", monotone, "smoothed <= filtered <= observation at every frame"),
    ], budget)


def test_criterion_6_cwt_round_trip():
    from gmwvoc.cwt import cwt_coefficients, cwt_decompose, cwt_reconstruct, dyadic_scales
    rng = np.random.default_rng(6)
    hop = 0.005
    scales = dyadic_scales()
    with Budget(20) as budget:
        exact = 0.0
        for _ in range(100):
            x = rng.normal(5.0, 0.3, int(rng.integers(2, 3000)))
            exact = max(exact, float(np.max(np.abs(cwt_reconstruct(cwt_decompose(x, hop)) - x))))
        # three sinusoids with periods between 4 * a0 and a9 / 4
        t = np.arange(int(60 / hop)) * hop
        band_errors = []
        for _ in range(10):
            periods = np.exp(rng.uniform(np.log(4 * scales[0]), np.log(scales[-1] / 4), 3))
            x = 5.0 + sum(0.1 * np.sin(2 * np.pi * t / p + rng.uniform(0, 2 * np.pi))
                          for p in periods)
            y = cwt_reconstruct(cwt_decompose(x, hop), include_residual=False)
            band_errors.append(np.sqrt(np.mean((y - x) ** 2) / np.mean((x - 5.0) ** 2)))
        lin = 0.0
        for _ in range(10):
            f, g = rng.normal(size=(2, 1500))
            a, b = rng.uniform(-3, 3, 2)
            lhs = cwt_coefficients(a * f + b * g, hop, scales)
            rhs = a * cwt_coefficients(f, hop, scales) + b * cwt_coefficients(g, hop, scales)
            lin = max(lin, float(np.max(np.abs(lhs - rhs))))
        short = dyadic_scales(0.02, 5)
        shift = 0.0
        margin = int(np.ceil(8 * short[-1] / hop))
        for s in (1, 17, 150):
            x = rng.normal(size=3000)
            W, Ws = cwt_coefficients(x, hop, short), cwt_coefficients(x[s:], hop, short)
            interior = np.arange(margin, x.size - s - margin)
            shift = max(shift, float(np.max(np.abs(Ws[:, interior] - W[:, interior + s]))))
    worst_band = float(max(band_errors))
    verdict(6, "CWT round trip", [
        ("with residual", exact <= 1e-9, f"max error {exact:.1e} <= 1e-9 on 100 signals"),
        ("without residual", worst_band <= 0.05,
         f"worst relative RMS {worst_band:.1%} <= 5% (periods 4*a0..a9/4, 10 contours)"),
        ("linearity", lin <= 1e-10, f"{lin:.1e} <= 1e-10"),
        ("shift", shift <= 1e-8, f"interior deviation {shift:.1e} <= 1e-8"),
    ], budget)


def test_criterion_7_mcd_unit_cases():
    from gmwvoc.metrics import mcd
    rng = np.random.default_rng(8)
    with Budget(5) as budget:
        c = rng.normal(size=(20, 25))
        identity = mcd(c, c).mean_mcd_db
        shifted = c.copy()
        shifted[np.arange(20), rng.integers(1, 25, 20)] += 1.0
        unit = mcd(c, shifted)
    err = float(np.max(np.abs(unit.per_frame_mcd_db - 4.342944819032518)))
    verdict(7, "MCD unit cases", [
        ("identity", identity == 0.0, f"{identity}"),
        ("unit offset", err <= 1e-9, f"max error {err:.1e} vs 10/ln10 = 4.342945"),
    ], budget)


def test_criterion_8_copy_synthesis():
    from gmwvoc.audio_io import Waveform, read_wav
    from gmwvoc.pipeline import analyze_waveform, as_written, mcd_between
    from gmwvoc.synthesis import apply_anchor_distortion, synthesize
    results = []
    with Budget(60) as budget:
        for name in FIXTURE_NAMES:
            clip = read_wav(fixture_path(name))
            ff = analyze_waveform(clip)
            scores = []
            for variant in (ff, apply_anchor_distortion(ff)):
                out = synthesize(variant)
                out = as_written(Waveform(out.samples[:len(clip)], out.sample_rate_hz))
                scores.append(mcd_between(clip, out).mean_mcd_db)
            results.append((name, len(clip) / 16000, *scores))
    ceiling = all(r[2] <= 6.0 for r in results)
    ordering = all(r[3] > r[2] for r in results)
    durations = all(2.0 <= r[1] <= 5.0 for r in results) and len(results) >= 3
    detail = ", ".join(f"{n} {p:.2f}/{a:.2f} dB" for n, _, p, a in results)
    verdict(8, "copy-synthesis MCD", [
        ("fixtures", durations, f"{len(results)} clips of 2-5 s"),
        ("ceiling", ceiling, f"proposed/anchor: {detail}; proposed <= 6.0 dB"),
        ("anchor worse", ordering, "anchor strictly higher on every clip"),
    ], budget)


def test_criterion_10_determinism(tmp_path):
    from gmwvoc.cli import main
    src = fixture_path(FIXTURE_NAMES[2])
    with Budget(120) as budget:
        feats = []
        for i, workers in enumerate(("1", "1", "3")):
            out = tmp_path / f"f{i}.gmwf"
            assert main(["analyze", src, "-o", str(out), "--workers", workers]) == 0
            feats.append(out.read_bytes())
        wavs = []
        for i in range(2):
            out = tmp_path / f"s{i}.wav"
            assert main(["synth", str(tmp_path / "f0.gmwf"), "-o", str(out)]) == 0
            wavs.append(out.read_bytes())
    verdict(10, "determinism", [
        ("analyze", feats[0] == feats[1] == feats[2], "byte-identical for 2 runs and 1 vs 3 workers"),
        ("synth", wavs[0] == wavs[1], "byte-identical WAVs across 2 runs"),
    ], budget)
