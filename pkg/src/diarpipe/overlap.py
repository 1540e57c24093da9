"""Overlap-region speaker assignment and target-speaker VAD bookkeeping:
slot selection, posterior decoding, and full/partial merging of the
decoded turns into a base diarization.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ConstraintError,
    Diarization,
    FRAME_SHIFT,
    FrameTrack,
    Segment,
    derasterize,
    merge_speaker_turns,
    rasterize,
    timeline_support,
)


@dataclass(frozen=True)
class TsVadConfig:
    """Target-speaker VAD decision parameters."""

    n_slots: int = 8
    chunk: float = 16.0
    min_enroll: float = 16.0
    decision_thr: float = 0.5
    overlap_thr: float = 0.85

    def __post_init__(self):
        if self.n_slots < 1:
            raise ConstraintError(f"n_slots must be >= 1, got {self.n_slots}")
        if not 0.0 <= self.decision_thr <= 1.0 or not 0.0 <= self.overlap_thr <= 1.0:
            raise ConstraintError("decision/overlap thresholds must be in [0, 1]")
        if self.chunk <= 0 or self.min_enroll < 0:
            raise ConstraintError("chunk must be positive and min_enroll non-negative")


@dataclass(frozen=True)
class TargetSelection:
    """Slot assignment: (speaker, embedding) per slot plus passed-through speakers."""

    slots: tuple[tuple[str | None, np.ndarray], ...]
    kept_aside: tuple[str, ...]

    @property
    def slot_speakers(self) -> tuple[str | None, ...]:
        return tuple(spk for spk, _ in self.slots)


def assign_overlap_two_nearest(base: Diarization, overlaps) -> Diarization:
    """Mark the two nearest speakers active over each overlap region.

    The first speaker is the one already active at the region (largest
    intersection); the second is the distinct speaker whose nearest turn
    boundary is temporally closest to the region. Recordings with a single
    speaker are returned unchanged.
    """
    turns = list(base.turns)
    all_speakers = base.speakers
    for region in overlaps:
        ranked = []
        for spk in all_speakers:
            inter = 0.0
            boundary_dist = math.inf
            for seg in base.speaker_turns(spk):
                lo, hi = max(seg.onset, region.onset), min(seg.offset, region.offset)
                inter += max(0.0, hi - lo)
                for b in (seg.onset, seg.offset):
                    if region.onset <= b <= region.offset:
                        boundary_dist = 0.0
                    else:
                        boundary_dist = min(
                            boundary_dist, min(abs(b - region.onset), abs(b - region.offset))
                        )
            ranked.append((spk, inter, boundary_dist))
        active = [r for r in ranked if r[1] > 1e-9]
        if not active:
            continue
        first = min(active, key=lambda r: (-r[1], r[0]))[0]
        rest = [r for r in ranked if r[0] != first]
        if not rest:
            continue
        second = min(rest, key=lambda r: (r[2], -r[1], r[0]))[0]
        turns.append((region, first))
        turns.append((region, second))
    return merge_speaker_turns(base.recording_id, turns)


def select_targets(
    base: Diarization,
    speaker_embeddings,
    cfg: TsVadConfig,
    dim: int | None = None,
) -> TargetSelection:
    """Choose slot speakers by speech duration.

    Speakers with >= min_enroll total speech fill slots in descending
    duration order (ties by label); missing slots are padded with
    zero-vector fakes. Surplus eligible speakers and everyone under the
    enrollment minimum are kept aside and their base turns pass through
    untouched.
    """
    durations = {spk: base.speaker_duration(spk) for spk in base.speakers}
    eligible = sorted(
        (spk for spk, d in durations.items() if d >= cfg.min_enroll - 1e-9),
        key=lambda s: (-durations[s], s),
    )
    slotted = eligible[: cfg.n_slots]
    kept_aside = sorted(set(durations) - set(slotted))

    if dim is None:
        for spk in slotted:
            if spk in speaker_embeddings:
                dim = int(np.asarray(speaker_embeddings[spk]).shape[-1])
                break
        else:
            dim = next(
                (int(np.asarray(v).shape[-1]) for v in speaker_embeddings.values()), None
            )
    if dim is None:
        raise ConstraintError("embedding dim unknown: pass dim= when no embeddings are given")

    slots: list[tuple[str | None, np.ndarray]] = []
    for spk in slotted:
        if spk not in speaker_embeddings:
            raise ConstraintError(f"no embedding provided for slotted speaker {spk!r}")
        vec = np.asarray(speaker_embeddings[spk], dtype=np.float32)
        if vec.shape != (dim,):
            raise ConstraintError(f"embedding for {spk!r} has shape {vec.shape}, expected ({dim},)")
        slots.append((spk, vec))
    while len(slots) < cfg.n_slots:
        slots.append((None, np.zeros(dim, dtype=np.float32)))
    return TargetSelection(tuple(slots), tuple(kept_aside))


def tsvad_decode(
    posteriors,
    slot_speakers,
    cfg: TsVadConfig,
    speech,
    recording_id: str,
) -> Diarization:
    """Threshold per-slot posteriors and map speech frames back to real time.

    Posteriors cover only the speech frames (non-speech removed before
    inference); `speech` supplies the frame-to-original-time map. Zero
    slots (speaker None) contribute nothing.
    """
    posteriors = list(posteriors)
    slot_speakers = list(slot_speakers)
    if len(posteriors) != len(slot_speakers):
        raise ConstraintError(
            f"{len(posteriors)} posterior tracks for {len(slot_speakers)} slots"
        )
    if not posteriors:
        return Diarization(recording_id, ())
    shift = posteriors[0].frame_shift
    for track in posteriors:
        if abs(track.frame_shift - shift) > 1e-9 or len(track) != len(posteriors[0]):
            raise ConstraintError("posterior tracks must share length and frame_shift")
    speech = timeline_support(speech)
    duration = speech[-1].offset if speech else 0.0
    speech_mask = rasterize(speech, shift, duration).values.astype(bool)
    speech_idx = np.flatnonzero(speech_mask)
    if len(posteriors[0]) != speech_idx.size:
        raise ConstraintError(
            f"posterior length {len(posteriors[0])} does not match "
            f"{speech_idx.size} speech frames"
        )

    turns = []
    for track, spk in zip(posteriors, slot_speakers):
        if spk is None:
            continue
        active = track.values >= cfg.decision_thr
        full = np.zeros(speech_mask.size, dtype=np.float32)
        full[speech_idx[active]] = 1.0
        for seg in derasterize(FrameTrack(full, shift)):
            turns.append((seg, spk))
    return merge_speaker_turns(recording_id, turns)


def merge_full(tsvad: Diarization, kept_aside_turns) -> Diarization:
    """TS-VAD turns replace the base for slotted speakers; kept-aside turns append."""
    return merge_speaker_turns(
        tsvad.recording_id, list(tsvad.turns) + list(kept_aside_turns)
    )


def merge_partial(
    base: Diarization, tsvad: Diarization, frame_shift: float = FRAME_SHIFT
) -> Diarization:
    """Add TS-VAD speakers on top of the base only at TS-VAD overlap frames.

    At frames where TS-VAD marks two or more speakers, every TS-VAD-active
    speaker missing from the base at that frame is added; nothing is ever
    removed from the base, so its frame set is a subset of the output's.
    """
    if base.recording_id != tsvad.recording_id:
        raise ConstraintError(
            f"recording mismatch: {base.recording_id!r} vs {tsvad.recording_id!r}"
        )
    duration = max(base.extent(), tsvad.extent())
    if duration == 0 or not tsvad.turns:
        return base
    ts_masks = {
        spk: rasterize(tsvad.speaker_support(spk), frame_shift, duration).values.astype(bool)
        for spk in tsvad.speakers
    }
    counts = np.sum(list(ts_masks.values()), axis=0)
    overlap_mask = counts >= 2
    if not overlap_mask.any():
        return base
    turns = list(base.turns)
    for spk, mask in ts_masks.items():
        base_mask = rasterize(base.speaker_support(spk), frame_shift, duration).values.astype(bool)
        add = mask & overlap_mask & ~base_mask
        if add.any():
            for seg in derasterize(FrameTrack(add.astype(np.float32), frame_shift)):
                turns.append((seg, spk))
    return merge_speaker_turns(base.recording_id, turns)
