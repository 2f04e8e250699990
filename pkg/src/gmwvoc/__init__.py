"""Parametric vocoder with Gaussian-mixture envelopes, an HMM over mixture
weights and a wavelet-decomposed continuous F0 contour."""

from .audio_io import Waveform, read_wav, write_wav
from .features import FeatureFile, load as load_features, save as save_features
from .metrics import McdReport, mcd
from .pipeline import analyze_waveform, copysynth, mcd_between
from .synthesis import synthesize

__version__ = "0.1.0"

__all__ = [
    "FeatureFile", "McdReport", "Waveform", "analyze_waveform", "copysynth", "load_features",
    "mcd", "mcd_between", "read_wav", "save_features", "synthesize", "write_wav",
]
