"""16-bit PCM mono WAV input/output and fixed-hop framing."""

import os
import tempfile
import wave
from dataclasses import dataclass

import numpy as np

PCM_SCALE = 32768.0


class WavFormatError(ValueError):
    """Raised for files that are not 16-bit PCM mono WAV."""


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        self.sample_rate_hz = int(self.sample_rate_hz)

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


@dataclass
class FrameSequence:
    frames: np.ndarray  # (n_frames, win_samples)
    hop_samples: int
    win_samples: int
    n_samples: int  # length of the signal before tail padding

    def __len__(self):
        return self.frames.shape[0]

    @property
    def padded_length(self):
        return (len(self) - 1) * self.hop_samples + self.win_samples


def read_wav(path):
    """Decode a 16-bit PCM mono WAV file into a :class:`Waveform`.

    Samples are scaled by 1/32768, so the int16 range maps onto [-1, 1).
    Multichannel files are rejected rather than downmixed.
    """
    try:
        with wave.open(os.fspath(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise WavFormatError(f"{path}: not a PCM WAV file ({exc})") from exc
    if width != 2:
        raise WavFormatError(f"{path}: unsupported bit depth {8 * width}, expected 16")
    if channels != 1:
        raise WavFormatError(f"{path}: {channels} channels, only mono is supported")
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / PCM_SCALE, rate)


def quantize(samples):
    """Hard-clip to [-1, 1] and round to int16 PCM codes."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.round(x * PCM_SCALE), -32768, 32767).astype("<i2")


def write_wav(waveform, path):
    """Write ``waveform`` as 16-bit PCM mono.

    The file is written to a temporary sibling and renamed into place, so an
    interrupted write never leaves a truncated file at ``path``.
    """
    if not np.all(np.isfinite(waveform.samples)):
        raise ValueError("cannot write non-finite samples")
    pcm = quantize(waveform.samples)
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".wav", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            with wave.open(fh, "wb") as w:
                w.setnchannels(1)
                w.setsampwidth(2)
                w.setframerate(waveform.sample_rate_hz)
                w.writeframes(pcm.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def frame_count(n_samples, hop_samples, win_samples):
    """Number of frames needed so every sample lies in at least one frame."""
    if n_samples <= win_samples:
        return 1
    return -(-(n_samples - win_samples) // hop_samples) + 1


def frame_signal(waveform, hop_samples, win_samples):
    """Slice ``waveform`` into frames starting at multiples of ``hop_samples``.

    The tail is zero-padded so the final partial window is kept.
    """
    hop_samples = int(hop_samples)
    win_samples = int(win_samples)
    if hop_samples <= 0 or win_samples <= 0:
        raise ValueError("hop and window lengths must be positive")
    if hop_samples > win_samples:
        raise ValueError("hop must not exceed the window length")
    x = waveform.samples if isinstance(waveform, Waveform) else np.asarray(waveform, float)
    if x.size < 1:
        raise ValueError("cannot frame an empty signal")
    n = frame_count(x.size, hop_samples, win_samples)
    padded = np.zeros((n - 1) * hop_samples + win_samples)
    padded[: x.size] = x
    idx = np.arange(n)[:, None] * hop_samples + np.arange(win_samples)[None, :]
    return FrameSequence(padded[idx], hop_samples, win_samples, x.size)
