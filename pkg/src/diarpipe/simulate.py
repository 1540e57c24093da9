"""Conversation simulation and synthetic oracles.

Ground-truth label tracks are sampled from a pattern pool (silence
removed, random window, fresh speaker ids); embeddings and target-speaker
posteriors are then synthesized directly, since embeddings are what the
pipeline actually consumes.
"""

import numpy as np

from .core import (
    ConstraintError,
    Diarization,
    EPS,
    EmbeddingSequence,
    FRAME_SHIFT,
    FrameTrack,
    Segment,
    rasterize,
    subtract_timelines,
    timeline_support,
)
from .cluster import uniform_segments


def random_pattern(
    n_speakers: int,
    duration: float,
    rng,
    overlap_prob: float = 0.2,
    pause_prob: float = 0.4,
    recording_id: str = "pattern",
) -> Diarization:
    """Random turn-taking conversation, 10 ms-quantized, for pattern pools.

    Speakers take turns in shuffled round-robin cycles so everyone gets a
    comparable share of speech; consecutive turns may overlap or be
    separated by a pause.
    """
    if n_speakers < 1:
        raise ConstraintError(f"need at least one speaker, got {n_speakers}")
    rng = np.random.default_rng(rng)
    speakers = [f"p{i:02d}" for i in range(n_speakers)]
    last_offset = {spk: -1.0 for spk in speakers}
    turns: list[tuple[Segment, str]] = []
    order: list[str] = []
    prev = None
    cursor = 0.0
    while cursor < duration:
        if not order:
            order = list(speakers)
            rng.shuffle(order)
            if len(order) > 1 and order[0] == prev:
                order[0], order[-1] = order[-1], order[0]
        spk = order.pop(0)
        length = rng.uniform(2.0, 8.0)
        draw = rng.random()
        if draw < overlap_prob and turns:
            onset = cursor - rng.uniform(0.3, 1.5)
        elif draw < overlap_prob + pause_prob:
            onset = cursor + rng.uniform(0.1, 1.0)
        else:
            onset = cursor
        onset = max(onset, last_offset[spk] + 0.05, 0.0)
        onset = round(onset, 2)
        offset = min(round(onset + length, 2), round(duration, 2))
        if offset - onset >= 0.02:
            turns.append((Segment(onset, offset), spk))
            last_offset[spk] = offset
            prev = spk
        cursor = max(cursor, offset, onset + 0.02)
    return Diarization(recording_id, tuple(turns))


def simulate_labels(patterns, duration: float, rng_seed, recording_id: str = "sim") -> Diarization:
    """Sample a ground-truth label track from a pattern pool.

    Picks a pattern whose silence-removed speech is long enough, cuts a
    uniformly random window of the requested duration from the compressed
    (gap-free) timeline, and remaps speakers to fresh ids. Overlaps are
    preserved.
    """
    patterns = list(patterns)
    if not patterns:
        raise ConstraintError("pattern pool is empty")
    if duration <= 0:
        raise ConstraintError(f"duration must be positive, got {duration}")
    rng = np.random.default_rng(rng_seed)
    eligible = []
    for pattern in patterns:
        support = pattern.support()
        total = sum(seg.duration for seg in support)
        if total >= duration - EPS:
            eligible.append((pattern, support, total))
    if not eligible:
        raise ConstraintError(
            f"no pattern has >= {duration}s of speech after silence removal"
        )
    pattern, support, total = eligible[int(rng.integers(len(eligible)))]
    slack = total - duration
    start = float(rng.uniform(0.0, slack)) if slack > EPS else 0.0

    compressed_onset = {}
    cum = 0.0
    for seg in support:
        compressed_onset[seg] = cum
        cum += seg.duration

    turns = []
    for seg, spk in pattern.turns:
        host = next(
            s for s in support if s.onset - EPS <= seg.onset and seg.offset <= s.offset + EPS
        )
        comp_on = compressed_onset[host] + (seg.onset - host.onset)
        comp_off = comp_on + seg.duration
        lo, hi = max(comp_on, start), min(comp_off, start + duration)
        if hi - lo > EPS:
            turns.append((Segment(max(0.0, lo - start), hi - start), spk))

    rename: dict[str, str] = {}
    for _, spk in sorted(turns, key=lambda t: (t[0].onset, t[0].offset, t[1])):
        rename.setdefault(spk, f"spk{len(rename):02d}")
    return Diarization(recording_id, tuple((seg, rename[spk]) for seg, spk in turns))


def simulate_embeddings(
    diar: Diarization,
    dim: int = 256,
    within_cos: float = 0.9,
    rng_seed=0,
    window: float = 1.28,
    shift: float = 0.32,
    max_centroid_cos: float = 0.2,
) -> EmbeddingSequence:
    """Synthesize per-segment embeddings from a ground-truth diarization.

    Each speaker gets a unit centroid (resampled until all pairwise raw
    cosines stay <= max_centroid_cos); uniform segments over that
    speaker's single-speaker regions emit the centroid plus Gaussian noise
    scaled so the expected cosine to the centroid is about within_cos,
    renormalized to unit norm.
    """
    if not 0.0 < within_cos <= 1.0:
        raise ConstraintError(f"within_cos must be in (0, 1], got {within_cos}")
    if dim < 2:
        raise ConstraintError(f"dim must be >= 2, got {dim}")
    rng = np.random.default_rng(rng_seed)
    speakers = diar.speakers
    centroids = []
    for spk in speakers:
        for _ in range(10000):
            c = rng.standard_normal(dim)
            c /= np.linalg.norm(c)
            if all(abs(float(c @ prev)) <= max_centroid_cos for prev in centroids):
                centroids.append(c)
                break
        else:
            raise ConstraintError(
                f"could not draw {len(speakers)} centroids with pairwise cosine "
                f"<= {max_centroid_cos} in {dim} dimensions"
            )

    sigma = float(np.sqrt((1.0 / within_cos**2 - 1.0) / dim))
    records: list[tuple[Segment, np.ndarray]] = []
    for spk, centroid in zip(speakers, centroids):
        others = [seg for other in speakers if other != spk for seg in diar.speaker_support(other)]
        exclusive = subtract_timelines(diar.speaker_support(spk), others)
        for seg in uniform_segments(exclusive, window, shift):
            vec = centroid + sigma * rng.standard_normal(dim)
            vec /= np.linalg.norm(vec)
            records.append((seg, vec))
    records.sort(key=lambda r: (r[0].onset, r[0].offset))
    if not records:
        return EmbeddingSequence((), np.zeros((0, dim), dtype=np.float32))
    segments, vectors = zip(*records)
    return EmbeddingSequence(tuple(segments), np.stack(vectors).astype(np.float32))


def simulate_tsvad_posteriors(
    diar: Diarization,
    slot_speakers,
    noise: float = 0.0,
    frame_shift: float = FRAME_SHIFT,
    speech=None,
) -> list[FrameTrack]:
    """Oracle slot posteriors over the speech frames of a diarization.

    Slot posterior is 1-noise where the slot's speaker is active and noise
    elsewhere; zero slots (speaker None) emit all zeros. Tracks cover only
    speech frames, matching the decoder's expectations.
    """
    if not 0.0 <= noise <= 1.0:
        raise ConstraintError(f"noise must be in [0, 1], got {noise}")
    speech = timeline_support(speech if speech is not None else [seg for seg, _ in diar.turns])
    duration = speech[-1].offset if speech else 0.0
    speech_idx = np.flatnonzero(rasterize(speech, frame_shift, duration).values)
    tracks = []
    for spk in slot_speakers:
        if spk is None:
            vals = np.zeros(speech_idx.size, dtype=np.float32)
        else:
            full = rasterize(diar.speaker_support(spk), frame_shift, duration).values
            active = full[speech_idx] > 0
            vals = np.where(active, 1.0 - noise, noise).astype(np.float32)
            vals = np.clip(vals, 0.0, 1.0)
        tracks.append(FrameTrack(vals, frame_shift))
    return tracks
