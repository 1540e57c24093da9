"""Posterior binarization, majority-vote VAD fusion, and FA/MISS metrics."""

from dataclasses import dataclass

import numpy as np

from .core import ConstraintError, FrameTrack, Segment, derasterize


@dataclass(frozen=True)
class VadReport:
    """Frame-level false alarm, miss, and combined error, in percent."""

    fa_pct: float
    miss_pct: float
    error_pct: float


def binarize(
    track: FrameTrack,
    onset_thr: float,
    min_on: float = 0.0,
    min_off: float = 0.0,
) -> list[Segment]:
    """Threshold a posterior track into speech segments.

    Frames >= onset_thr are speech. Speech runs shorter than min_on are
    deleted first; then non-speech gaps shorter than min_off are filled.
    With min_on = min_off = 0 this is plain thresholding.
    """
    if not 0.0 <= onset_thr <= 1.0:
        raise ConstraintError(f"onset threshold must be in [0, 1], got {onset_thr}")
    if min_on < 0 or min_off < 0:
        raise ConstraintError("min_on/min_off must be non-negative")
    shift = track.frame_shift
    mask = (track.values >= onset_thr).astype(np.float32)
    runs = _runs(mask)
    if min_on > 0:
        for i, j in runs:
            if (j - i) * shift < min_on - 1e-9:
                mask[i:j] = 0.0
        runs = _runs(mask)
    if min_off > 0 and len(runs) > 1:
        for (_, prev_end), (next_start, _) in zip(runs, runs[1:]):
            if (next_start - prev_end) * shift < min_off - 1e-9:
                mask[prev_end:next_start] = 1.0
    return derasterize(FrameTrack(mask, shift))


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [start, end) index ranges of consecutive 1s."""
    edges = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def fuse_majority(tracks) -> FrameTrack:
    """Majority vote across binary tracks; ties count as speech.

    Leaning towards speech on ties is deliberate: missed speech cannot be
    recovered downstream, while false alarms can.
    """
    tracks = list(tracks)
    if not tracks:
        raise ConstraintError("majority fusion requires at least one track")
    n = len(tracks[0])
    shift = tracks[0].frame_shift
    for t in tracks:
        if not t.is_binary:
            raise ConstraintError("majority fusion requires binary tracks")
        if len(t) != n or abs(t.frame_shift - shift) > 1e-9:
            raise ConstraintError("tracks must share length and frame_shift")
    votes = np.sum([t.values for t in tracks], axis=0)
    fused = (2 * votes >= len(tracks)).astype(np.float32)
    return FrameTrack(fused, shift)


def vad_metrics(hyp: FrameTrack, ref: FrameTrack) -> VadReport:
    """Frame counts: FA = hyp speech on ref silence, MISS = the reverse."""
    if len(hyp) != len(ref):
        raise ConstraintError(f"length mismatch: hyp {len(hyp)} vs ref {len(ref)} frames")
    if not (hyp.is_binary and ref.is_binary):
        raise ConstraintError("vad metrics require binary tracks")
    total = len(ref)
    if total == 0:
        return VadReport(0.0, 0.0, 0.0)
    h, r = hyp.values, ref.values
    fa = float(np.sum((h == 1) & (r == 0))) / total * 100.0
    miss = float(np.sum((h == 0) & (r == 1))) / total * 100.0
    return VadReport(fa, miss, fa + miss)
