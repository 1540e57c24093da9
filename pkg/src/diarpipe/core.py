"""Domain types and timeline algebra shared by every pipeline stage.

Times are f64 seconds. All time comparisons use a 1e-9 absolute epsilon.
Frame membership follows the frame-center rule: a frame belongs to a
segment iff its center lies inside the segment, with centers that land
exactly on a boundary counting as inside.
"""

import math
from dataclasses import dataclass, field

import numpy as np

EPS = 1e-9
FRAME_SHIFT = 0.01  # canonical frame shift in seconds


class PipelineError(Exception):
    """Base class for all pipeline errors."""


class InputError(PipelineError):
    """Malformed external input (text or binary payloads). CLI exit code 1."""


class ConstraintError(PipelineError):
    """Violated invariant or mismatched operands. CLI exit code 2."""


@dataclass(frozen=True, order=True)
class Segment:
    """Time interval [onset, offset) in seconds; offset > onset >= 0."""

    onset: float
    offset: float

    def __post_init__(self):
        if not (math.isfinite(self.onset) and math.isfinite(self.offset)):
            raise ConstraintError(f"segment bounds must be finite: ({self.onset}, {self.offset})")
        if self.onset < 0 or self.offset <= self.onset:
            raise ConstraintError(
                f"segment must satisfy 0 <= onset < offset: ({self.onset}, {self.offset})"
            )

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    def intersects(self, other: "Segment") -> bool:
        return self.onset < other.offset - EPS and other.onset < self.offset - EPS


@dataclass(frozen=True)
class Diarization:
    """Speaker-labeled turns of one recording.

    Turns are kept sorted by (onset, offset, speaker). Distinct speakers may
    overlap; a single speaker must not overlap itself. Adjacent same-speaker
    turns are legal and are never merged implicitly.
    """

    recording_id: str
    turns: tuple[tuple[Segment, str], ...]

    def __post_init__(self):
        turns = tuple(sorted(self.turns, key=lambda t: (t[0].onset, t[0].offset, t[1])))
        object.__setattr__(self, "turns", turns)
        last_off: dict[str, float] = {}
        for seg, spk in turns:
            if spk in last_off and seg.onset < last_off[spk] - EPS:
                raise ConstraintError(
                    f"speaker {spk!r} overlaps itself at {seg.onset:.3f}s in {self.recording_id!r}"
                )
            last_off[spk] = max(last_off.get(spk, 0.0), seg.offset)

    @property
    def speakers(self) -> tuple[str, ...]:
        return tuple(sorted({spk for _, spk in self.turns}))

    def speaker_turns(self, speaker: str) -> list[Segment]:
        return [seg for seg, spk in self.turns if spk == speaker]

    def speaker_support(self, speaker: str) -> list[Segment]:
        return timeline_support(self.speaker_turns(speaker))

    def support(self) -> list[Segment]:
        return timeline_support([seg for seg, _ in self.turns])

    def extent(self) -> float:
        return max((seg.offset for seg, _ in self.turns), default=0.0)

    def speaker_duration(self, speaker: str) -> float:
        return sum(seg.duration for seg in self.speaker_support(speaker))

    def relabeled(self, mapping: dict[str, str]) -> "Diarization":
        """Rename speakers; labels missing from the mapping are kept."""
        return Diarization(
            self.recording_id,
            tuple((seg, mapping.get(spk, spk)) for seg, spk in self.turns),
        )


def merge_speaker_turns(recording_id: str, turns) -> Diarization:
    """Build a Diarization merging per-speaker overlapping/adjacent turns."""
    by_spk: dict[str, list[Segment]] = {}
    for seg, spk in turns:
        by_spk.setdefault(spk, []).append(seg)
    merged = []
    for spk, segs in by_spk.items():
        merged.extend((seg, spk) for seg in timeline_support(segs))
    return Diarization(recording_id, tuple(merged))


@dataclass(frozen=True)
class FrameTrack:
    """Per-frame posterior (values in [0,1]) or binary sequence."""

    values: np.ndarray
    frame_shift: float = FRAME_SHIFT

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float32).reshape(-1)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if not self.frame_shift > 0:
            raise ConstraintError(f"frame_shift must be positive, got {self.frame_shift}")
        if vals.size and (not np.all(np.isfinite(vals)) or vals.min() < 0 or vals.max() > 1):
            raise ConstraintError("track values must be finite and within [0, 1]")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def duration(self) -> float:
        return len(self) * self.frame_shift

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.values == 0) | (self.values == 1)))


@dataclass(frozen=True)
class EmbeddingSequence:
    """Per-segment fixed-dimension speaker embeddings, in temporal order."""

    segments: tuple[Segment, ...]
    vectors: np.ndarray  # (n, dim) float32

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=np.float32)
        if vecs.ndim != 2:
            raise ConstraintError(f"vectors must be 2-D (n, dim), got shape {vecs.shape}")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "segments", tuple(self.segments))
        if len(self.segments) != vecs.shape[0]:
            raise ConstraintError(
                f"{len(self.segments)} segments but {vecs.shape[0]} vectors"
            )
        if vecs.size and not np.all(np.isfinite(vecs)):
            raise ConstraintError("embedding vectors must be finite")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def records(self) -> list[tuple[Segment, np.ndarray]]:
        return list(zip(self.segments, self.vectors))


@dataclass(frozen=True)
class AffinityMatrix:
    """n x n pairwise similarity scores on the [0,1] mapped scale.

    The raw cosine matrix is retained alongside when known, because the
    clustering thresholds are stated on the raw cosine scale.
    """

    values: np.ndarray
    raw: np.ndarray | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float32)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ConstraintError(f"affinity matrix must be square, got shape {vals.shape}")
        if vals.size and not np.all(np.isfinite(vals)):
            raise ConstraintError("affinity values must be finite")
        if vals.size and (vals.min() < -1e-6 or vals.max() > 1 + 1e-6):
            raise ConstraintError("mapped affinity values must lie in [0, 1]")
        if vals.size and vals.max() > float(np.diag(vals).max()) + 1e-6:
            raise ConstraintError("affinity diagonal must carry the maximum value")
        if self.raw is not None:
            raw = np.array(self.raw, dtype=np.float32)
            raw.setflags(write=False)
            object.__setattr__(self, "raw", raw)
            if raw.shape != vals.shape:
                raise ConstraintError("raw and mapped affinity shapes differ")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


# ---------------------------------------------------------------------------
# Timeline algebra
# ---------------------------------------------------------------------------

def timeline_support(segments) -> list[Segment]:
    """Minimal sorted disjoint cover of the input segments.

    Overlapping and adjacent (within epsilon) segments are merged.
    Idempotent and invariant to input order.
    """
    segs = sorted(segments, key=lambda s: (s.onset, s.offset))
    out: list[Segment] = []
    for seg in segs:
        if out and seg.onset <= out[-1].offset + EPS:
            if seg.offset > out[-1].offset:
                out[-1] = Segment(out[-1].onset, seg.offset)
        else:
            out.append(seg)
    return out


def intersect_timelines(a, b) -> list[Segment]:
    """Intersection of two segment lists, as a disjoint sorted list."""
    sa, sb = timeline_support(a), timeline_support(b)
    out: list[Segment] = []
    i = j = 0
    while i < len(sa) and j < len(sb):
        lo = max(sa[i].onset, sb[j].onset)
        hi = min(sa[i].offset, sb[j].offset)
        if hi - lo > EPS:
            out.append(Segment(lo, hi))
        if sa[i].offset < sb[j].offset:
            i += 1
        else:
            j += 1
    return out


def subtract_timelines(a, b) -> list[Segment]:
    """Time covered by `a` but not by `b`, as a disjoint sorted list."""
    sa, sb = timeline_support(a), timeline_support(b)
    out: list[Segment] = []
    j = 0
    for seg in sa:
        cursor = seg.onset
        while j < len(sb) and sb[j].offset <= cursor + EPS:
            j += 1
        k = j
        while k < len(sb) and sb[k].onset < seg.offset - EPS:
            if sb[k].onset > cursor + EPS:
                out.append(Segment(cursor, sb[k].onset))
            cursor = max(cursor, sb[k].offset)
            k += 1
        if seg.offset > cursor + EPS:
            out.append(Segment(cursor, seg.offset))
    return out


def total_duration(segments) -> float:
    return sum(seg.duration for seg in timeline_support(segments))


def rasterize(segments, frame_shift: float, duration: float) -> FrameTrack:
    """Binary track over ceil(duration/frame_shift) frames.

    Frame t is 1 iff its center (t+0.5)*frame_shift falls inside a segment;
    centers exactly on a segment boundary count as inside.
    """
    if not frame_shift > 0:
        raise ConstraintError(f"frame_shift must be positive, got {frame_shift}")
    if duration < 0:
        raise ConstraintError(f"duration must be non-negative, got {duration}")
    n = max(0, math.ceil(duration / frame_shift - EPS))
    mask = np.zeros(n, dtype=np.float32)
    if n:
        centers = (np.arange(n) + 0.5) * frame_shift
        for seg in timeline_support(segments):
            i0 = int(np.searchsorted(centers, seg.onset - EPS, side="left"))
            i1 = int(np.searchsorted(centers, seg.offset + EPS, side="right"))
            mask[i0:i1] = 1.0
    return FrameTrack(mask, frame_shift)


def derasterize(track: FrameTrack) -> list[Segment]:
    """Maximal runs of 1s become segments [i*shift, (j+1)*shift)."""
    if not track.is_binary:
        raise ConstraintError("derasterize requires a binary track")
    vals = track.values.astype(np.int8)
    if vals.size == 0:
        return []
    edges = np.diff(np.concatenate(([0], vals, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    shift = track.frame_shift
    return [Segment(int(i) * shift, int(j) * shift) for i, j in zip(starts, ends)]


def overlap_regions(diar: Diarization) -> list[Segment]:
    """Support of time where two or more distinct speakers are active."""
    if not diar.turns:
        return []
    points = sorted({t for seg, _ in diar.turns for t in (seg.onset, seg.offset)})
    found: list[Segment] = []
    for t0, t1 in zip(points, points[1:]):
        if t1 - t0 <= EPS:
            continue
        mid = 0.5 * (t0 + t1)
        active = {spk for seg, spk in diar.turns if seg.onset <= mid < seg.offset}
        if len(active) >= 2:
            found.append(Segment(t0, t1))
    return timeline_support(found)
