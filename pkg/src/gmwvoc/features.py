"""Binary feature file ("GMWF", version 1).

Layout, all little-endian, reals as IEEE-754 binary32, counts as uint32:

    header   magic "GMWF" | version u16 | sample_rate | hop | win | fft_size
             | K | n_states | n_scales | scale0 f32 | n_frames | flags
    gmm      n_frames records of (gain, K triples of weight/mean/sigma)
    hmm      P (n x n) | state means (n x d) | state variances (n x d)
             | state path (n_frames u32) | residuals (n_frames x d) if flagged
    cwt      scales (M) | coefficients (M x n_frames) | residual (n_frames)
             | mean_level
    energy   n_frames

with d = 1 + K (frame gain followed by the K mixture weights).  Anything
after the energy block is an error.
"""

import os
import struct
import tempfile
from dataclasses import dataclass, fields

import numpy as np

MAGIC = b"GMWF"
VERSION = 1
FLAG_HMM_RESIDUAL = 1
_HEADER = struct.Struct("<4sHIIIIIIIfII")
_F32 = np.dtype("<f4")
_U32 = np.dtype("<u4")


class FeatureFileError(ValueError):
    """Malformed or incompatible feature file."""


@dataclass
class FeatureFile:
    sample_rate: int
    hop_samples: int
    win_samples: int
    fft_size: int
    scale0: np.float32
    # gmm block, per frame
    gains: np.ndarray  # (F,)
    weights: np.ndarray  # (F, K)
    means: np.ndarray  # (F, K) Hz
    sigmas: np.ndarray  # (F, K) Hz
    # hmm block
    transmat: np.ndarray  # (n, n)
    state_means: np.ndarray  # (n, 1 + K)
    state_vars: np.ndarray  # (n, 1 + K)
    state_path: np.ndarray  # (F,) uint32
    hmm_residuals: np.ndarray | None  # (F, 1 + K)
    # cwt block
    scales: np.ndarray  # (M,)
    cwt_coefficients: np.ndarray  # (M, F)
    cwt_residual: np.ndarray  # (F,)
    mean_level: np.float32
    energy: np.ndarray  # (F,)

    @property
    def n_frames(self):
        return self.gains.shape[0]

    @property
    def n_components(self):
        return self.weights.shape[1]

    @property
    def n_states(self):
        return self.transmat.shape[0]

    @property
    def n_scales(self):
        return self.scales.shape[0]

    @property
    def flags(self):
        return FLAG_HMM_RESIDUAL if self.hmm_residuals is not None else 0

    def observations(self):
        """Per-frame HMM observation vectors (gain, w_1..w_K)."""
        return np.column_stack([self.gains, self.weights]).astype(np.float64)

    def replace(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return FeatureFile(**values)


def _f32(a):
    return np.ascontiguousarray(a, dtype=_F32)


def encode(ff):
    F, K, n, M = ff.n_frames, ff.n_components, ff.n_states, ff.n_scales
    d = 1 + K
    header = _HEADER.pack(MAGIC, VERSION, ff.sample_rate, ff.hop_samples, ff.win_samples,
                          ff.fft_size, K, n, M, float(ff.scale0), F, ff.flags)
    gmm = np.empty((F, 1 + 3 * K), dtype=_F32)
    gmm[:, 0] = ff.gains
    gmm[:, 1::3] = ff.weights
    gmm[:, 2::3] = ff.means
    gmm[:, 3::3] = ff.sigmas
    parts = [header, gmm.tobytes(),
             _f32(ff.transmat).reshape(n, n).tobytes(),
             _f32(ff.state_means).reshape(n, d).tobytes(),
             _f32(ff.state_vars).reshape(n, d).tobytes(),
             np.ascontiguousarray(ff.state_path, dtype=_U32).reshape(F).tobytes()]
    if ff.hmm_residuals is not None:
        parts.append(_f32(ff.hmm_residuals).reshape(F, d).tobytes())
    parts += [_f32(ff.scales).reshape(M).tobytes(),
              _f32(ff.cwt_coefficients).reshape(M, F).tobytes(),
              _f32(ff.cwt_residual).reshape(F).tobytes(),
              _f32([ff.mean_level]).tobytes(),
              _f32(ff.energy).reshape(F).tobytes()]
    return b"".join(parts)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, block, dtype, count, shape=None):
        nbytes = dtype.itemsize * count
        if self.pos + nbytes > len(self.data):
            raise FeatureFileError(
                f"block '{block}': truncated at byte offset {len(self.data)}, "
                f"needs {nbytes} bytes from offset {self.pos}")
        arr = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.pos).copy()
        self.pos += nbytes
        return arr.reshape(shape) if shape is not None else arr


def decode(data):
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise FeatureFileError(f"block 'header': truncated at byte offset {len(data)}")
    (magic, version, sr, hop, win, fft, K, n, M, scale0, F, flags) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FeatureFileError(f"block 'header': bad magic {magic!r} at byte offset 0")
    if version != VERSION:
        raise FeatureFileError(f"block 'header': unsupported version {version} at byte offset 4")
    if flags & ~FLAG_HMM_RESIDUAL:
        raise FeatureFileError(f"block 'header': unknown flags {flags:#x} at byte offset 42")
    for name, value in (("K", K), ("n_states", n), ("n_scales", M), ("n_frames", F),
                        ("hop", hop), ("win", win), ("fft_size", fft), ("sample_rate", sr)):
        if value < 1:
            raise FeatureFileError(f"block 'header': {name} must be positive")
    d = 1 + K
    r = _Reader(data)
    r.pos = _HEADER.size
    gmm = r.take("gmm", _F32, F * (1 + 3 * K), (F, 1 + 3 * K))
    transmat = r.take("hmm", _F32, n * n, (n, n))
    state_means = r.take("hmm", _F32, n * d, (n, d))
    state_vars = r.take("hmm", _F32, n * d, (n, d))
    path = r.take("hmm", _U32, F)
    if np.any(path >= n):
        raise FeatureFileError(f"block 'hmm': state index out of range before byte offset {r.pos}")
    residuals = r.take("hmm", _F32, F * d, (F, d)) if flags & FLAG_HMM_RESIDUAL else None
    scales = r.take("cwt", _F32, M)
    coeffs = r.take("cwt", _F32, M * F, (M, F))
    cwt_res = r.take("cwt", _F32, F)
    mean_level = r.take("cwt", _F32, 1)[0]
    energy = r.take("energy", _F32, F)
    if r.pos != len(data):
        raise FeatureFileError(
            f"block 'trailer': {len(data) - r.pos} unexpected trailing bytes at byte offset {r.pos}")
    return FeatureFile(
        sample_rate=sr, hop_samples=hop, win_samples=win, fft_size=fft, scale0=np.float32(scale0),
        gains=np.ascontiguousarray(gmm[:, 0]), weights=np.ascontiguousarray(gmm[:, 1::3]),
        means=np.ascontiguousarray(gmm[:, 2::3]), sigmas=np.ascontiguousarray(gmm[:, 3::3]),
        transmat=transmat, state_means=state_means, state_vars=state_vars, state_path=path,
        hmm_residuals=residuals, scales=scales, cwt_coefficients=coeffs, cwt_residual=cwt_res,
        mean_level=mean_level, energy=energy)


def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(ff, path):
    atomic_write_bytes(path, encode(ff))


def load(path):
    with open(path, "rb") as fh:
        return decode(fh.read())
