"""Objective measures: mel-cepstral distortion and F0 error."""

from dataclasses import dataclass

import numpy as np

MCD_SCALE = 10.0 / np.log(10.0)


@dataclass
class McdReport:
    mean_mcd_db: float
    per_frame_mcd_db: np.ndarray
    n_frames: int
    order: int

    def as_text(self):
        return "\n".join([
            f"mean_mcd_db={self.mean_mcd_db:.6f}",
            f"n_frames={self.n_frames}",
            f"order={self.order}",
        ])

    def rows(self):
        return [(i, float(v)) for i, v in enumerate(self.per_frame_mcd_db)]


def mcd(org, syn):
    """Mel-cepstral distortion per frame, in dB.

    Computed as (10 / ln 10) * sqrt(sum_{m=1..M} (c_org(m) - c_syn(m))**2):
    c(0) is excluded and there is no factor 2 under the root, so values
    are 1/sqrt(2) of the more common convention.
    """
    org = np.atleast_2d(np.asarray(org, dtype=np.float64))
    syn = np.atleast_2d(np.asarray(syn, dtype=np.float64))
    if org.shape[1] != syn.shape[1]:
        raise ValueError(f"order mismatch: {org.shape[1] - 1} vs {syn.shape[1] - 1}")
    if org.shape[0] != syn.shape[0]:
        raise ValueError(f"frame count mismatch: {org.shape[0]} vs {syn.shape[0]}")
    diff = org[:, 1:] - syn[:, 1:]
    per_frame = MCD_SCALE * np.sqrt(np.sum(diff * diff, axis=1))
    return McdReport(float(per_frame.mean()) if per_frame.size else 0.0,
                     per_frame, per_frame.size, org.shape[1] - 1)


def f0_rmse(ref, test):
    """Root-mean-square F0 difference in Hz; accepts tracks or arrays."""
    a = np.asarray(getattr(ref, "f0_hz", ref), dtype=np.float64)
    b = np.asarray(getattr(test, "f0_hz", test), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(np.mean((a - b) ** 2)))
