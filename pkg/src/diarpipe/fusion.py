"""Overlap-aware multi-system diarization fusion: label mapping onto a shared
namespace followed by weighted regional voting.
"""

import math

import numpy as np

from .core import (
    ConstraintError,
    Diarization,
    Segment,
    intersect_timelines,
    merge_speaker_turns,
    total_duration,
)
from .metrics import optimal_mapping


def _speaker_overlap_matrix(pool: dict[str, list[Segment]], system: Diarization):
    pool_labels = sorted(pool)
    sys_labels = list(system.speakers)
    overlap = np.zeros((len(pool_labels), len(sys_labels)))
    for j, spk in enumerate(sys_labels):
        support = system.speaker_support(spk)
        for i, label in enumerate(pool_labels):
            overlap[i, j] = total_duration(intersect_timelines(pool[label], support))
    return pool_labels, sys_labels, overlap


def _fresh_name(label: str, taken: set[str]) -> str:
    if label not in taken:
        return label
    k = 2
    while f"{label}_{k}" in taken:
        k += 1
    return f"{label}_{k}"


def map_labels(systems, mapper=optimal_mapping) -> list[Diarization]:
    """Relabel every system onto the first system's label namespace.

    Each subsequent system is matched against the accumulated fused
    namespace by an assignment maximizing total pairwise overlap duration;
    labels without temporal overlap get fresh names and extend the
    namespace.
    """
    systems = list(systems)
    if len(systems) < 2:
        raise ConstraintError("label mapping needs at least two systems")
    rec = systems[0].recording_id
    for sys_ in systems[1:]:
        if sys_.recording_id != rec:
            raise ConstraintError("all systems must describe the same recording")

    pool: dict[str, list[Segment]] = {
        spk: systems[0].speaker_support(spk) for spk in systems[0].speakers
    }
    mapped = [systems[0]]
    for system in systems[1:]:
        pool_labels, sys_labels, overlap = _speaker_overlap_matrix(pool, system)
        assignment = mapper(overlap) if pool_labels and sys_labels else {}
        rename: dict[str, str] = {}
        for i, j in assignment.items():
            if overlap[i, j] > 1e-9:
                rename[sys_labels[j]] = pool_labels[i]
        taken = set(pool) | set(rename.values())
        for spk in sys_labels:
            if spk not in rename:
                fresh = _fresh_name(spk, taken)
                rename[spk] = fresh
                taken.add(fresh)
        relabeled = system.relabeled(rename)
        mapped.append(relabeled)
        for spk in relabeled.speakers:
            pool.setdefault(spk, [])
            pool[spk] = pool[spk] + relabeled.speaker_support(spk)
    return mapped


def rank_weights(n_systems: int, exponent: float = 0.5) -> list[float]:
    """Default rank weighting (1/k)^exponent for input rank k, normalized."""
    raw = [(1.0 / k) ** exponent for k in range(1, n_systems + 1)]
    total = sum(raw)
    return [w / total for w in raw]


def _canonical_label_order(systems) -> dict[str, int]:
    """Rank labels by their activity footprint across systems, not by name.

    Score ties must break identically after any consistent relabeling of an
    input system, so the tie-break key is built from supports only; labels
    with identical footprints are interchangeable.
    """
    labels = sorted({spk for sys_ in systems for spk in sys_.speakers})

    def signature(label):
        return tuple(
            (k, tuple((s.onset, s.offset) for s in sys_.speaker_support(label)))
            for k, sys_ in enumerate(systems)
        )

    return {label: rank for rank, label in enumerate(sorted(labels, key=signature))}


def doverlap_fuse(systems, weights=None, rank_exponent: float = 0.5) -> Diarization:
    """Weighted regional voting over label-mapped systems.

    The timeline is split at every turn boundary. Per region the output
    speaker count is the round-half-up weighted mean of the systems'
    active counts, and the top-count speakers by summed system weight win.
    Contiguous equal-label regions merge.
    """
    systems = list(systems)
    if not systems:
        raise ConstraintError("fusion needs at least one system")
    rec = systems[0].recording_id
    for sys_ in systems[1:]:
        if sys_.recording_id != rec:
            raise ConstraintError("all systems must describe the same recording")
    if weights is None:
        weights = rank_weights(len(systems), rank_exponent)
    else:
        weights = [float(w) for w in weights]
        if len(weights) != len(systems):
            raise ConstraintError(
                f"{len(weights)} weights for {len(systems)} systems"
            )
        if any(w < 0 for w in weights):
            raise ConstraintError("weights must be non-negative")
        total = sum(weights)
        if total <= 0:
            raise ConstraintError("weights must not all be zero")
        weights = [w / total for w in weights]

    order = _canonical_label_order(systems)
    points = sorted(
        {t for sys_ in systems for seg, _ in sys_.turns for t in (seg.onset, seg.offset)}
    )
    turns = []
    for t0, t1 in zip(points, points[1:]):
        if t1 - t0 <= 1e-9:
            continue
        mid = 0.5 * (t0 + t1)
        active_sets = [
            {spk for seg, spk in sys_.turns if seg.onset <= mid < seg.offset}
            for sys_ in systems
        ]
        mean_count = sum(w * len(a) for w, a in zip(weights, active_sets))
        count = int(math.floor(mean_count + 0.5 + 1e-9))
        if count == 0:
            continue
        scores: dict[str, float] = {}
        for w, active in zip(weights, active_sets):
            for spk in active:
                scores[spk] = scores.get(spk, 0.0) + w
        winners = sorted(scores, key=lambda s: (-scores[s], order[s]))[:count]
        for spk in winners:
            turns.append((Segment(t0, t1), spk))
    return merge_speaker_turns(rec, turns)


def fuse(systems, weights=None, rank_exponent: float = 0.5) -> Diarization:
    """Map labels onto a shared namespace, then vote. Single system passes through."""
    systems = list(systems)
    if len(systems) == 1:
        return systems[0]
    return doverlap_fuse(map_labels(systems), weights, rank_exponent)
