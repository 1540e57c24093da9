import time

import numpy as np
import pytest
from hypothesis import strategies as st

from diarpipe.core import Diarization, FrameTrack, Segment

_SESSION_START = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _SESSION_START
    status = "PASS" if elapsed < 60.0 else "FAIL"
    print(f"\n[acceptance] full-suite-runtime: {status} ({elapsed:.1f}s, budget 60s)")


def random_diarization(
    rng: np.random.Generator,
    recording: str = "rec",
    max_speakers: int = 4,
    max_turns_per_speaker: int = 4,
    max_time: float = 60.0,
    quantize: float | None = None,
) -> Diarization:
    """Random valid diarization: per speaker, sorted disjoint turns."""
    n_spk = int(rng.integers(1, max_speakers + 1))
    turns = []
    for i in range(n_spk):
        spk = f"s{i}"
        n_turns = int(rng.integers(1, max_turns_per_speaker + 1))
        points = np.sort(rng.uniform(0, max_time, size=2 * n_turns))
        for a, b in zip(points[0::2], points[1::2]):
            if quantize is not None:
                a = round(round(a / quantize) * quantize, 6)
                b = round(round(b / quantize) * quantize, 6)
            if b - a > 0.05:
                turns.append((Segment(float(a), float(b)), spk))
    if not turns:
        turns.append((Segment(0.0, 1.0), "s0"))
    return Diarization(recording, tuple(turns))


@st.composite
def segments_st(draw, max_time: float = 100.0):
    onset = draw(st.floats(min_value=0.0, max_value=max_time, allow_nan=False))
    dur = draw(st.floats(min_value=0.01, max_value=10.0, allow_nan=False))
    return Segment(onset, onset + dur)


@st.composite
def segment_lists_st(draw, max_size: int = 12):
    return draw(st.lists(segments_st(), min_size=0, max_size=max_size))


@st.composite
def binary_tracks_st(draw, max_len: int = 120):
    vals = draw(st.lists(st.sampled_from([0.0, 1.0]), min_size=0, max_size=max_len))
    return FrameTrack(np.array(vals, dtype=np.float32), 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(20220914)
