import os
import sys

import numpy as np
import pytest

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURE_DIR = os.path.join(HERE, "fixtures")
sys.path.insert(0, HERE)  # make the oracles module importable

FIXTURE_NAMES = ["male_110hz.wav", "female_210hz.wav", "mixed_150hz.wav"]


def fixture_path(name):
    return os.path.join(FIXTURE_DIR, name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def male_clip():
    from gmwvoc.audio_io import read_wav
    return read_wav(fixture_path("male_110hz.wav"))


@pytest.fixture(scope="session")
def male_features(male_clip):
    from gmwvoc.pipeline import analyze_waveform
    return analyze_waveform(male_clip)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES = []


def record_acceptance(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
