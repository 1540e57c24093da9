"""DER and JER scoring with optimal speaker mapping.

The reference scorer works on exact intervals via a boundary-event sweep;
a 10 ms frame-based scorer is retained for cross-checks only. Scored time
excludes a +/- collar around every reference turn boundary, and reference
overlap regions when score_overlap is off.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    ConstraintError,
    Diarization,
    FRAME_SHIFT,
    Segment,
    intersect_timelines,
    overlap_regions,
    rasterize,
    timeline_support,
    total_duration,
)


@dataclass(frozen=True)
class DerReport:
    """DER decomposition (percent) with the optimal ref -> hyp speaker map."""

    fa_pct: float
    miss_pct: float
    confusion_pct: float
    der_pct: float
    jer_pct: float
    mapping: dict[str, str] = field(default_factory=dict)
    scored_ref_seconds: float = 0.0
    fa_seconds: float = 0.0
    miss_seconds: float = 0.0
    confusion_seconds: float = 0.0

    def __post_init__(self):
        if abs(self.der_pct - (self.fa_pct + self.miss_pct + self.confusion_pct)) > 1e-6:
            raise ConstraintError("DER must equal FA + MISS + confusion")
        if min(self.fa_pct, self.miss_pct, self.confusion_pct) < 0:
            raise ConstraintError("DER components must be non-negative")


def optimal_mapping(overlap: np.ndarray) -> dict[int, int]:
    """Row -> column assignment maximizing total overlap (Hungarian)."""
    overlap = np.asarray(overlap, dtype=np.float64)
    if overlap.ndim != 2:
        raise ConstraintError("overlap matrix must be 2-D")
    if overlap.size == 0:
        return {}
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return {int(r): int(c) for r, c in zip(rows, cols)}


def _exhaustive_mapping(overlap: np.ndarray) -> dict[int, int]:
    """Brute-force assignment over permutations; test oracle for small sizes."""
    overlap = np.asarray(overlap, dtype=np.float64)
    n_ref, n_hyp = overlap.shape
    if min(n_ref, n_hyp) == 0:
        return {}
    if min(n_ref, n_hyp) > 8:
        raise ConstraintError("exhaustive mapping is limited to 8 speakers per side")
    best, best_total = {}, -1.0
    if n_ref <= n_hyp:
        for perm in itertools.permutations(range(n_hyp), n_ref):
            total = sum(overlap[r, c] for r, c in enumerate(perm))
            if total > best_total:
                best, best_total = dict(enumerate(perm)), total
    else:
        for perm in itertools.permutations(range(n_ref), n_hyp):
            total = sum(overlap[r, c] for c, r in enumerate(perm))
            if total > best_total:
                best, best_total = {r: c for c, r in enumerate(perm)}, total
    return best


def _excluded_regions(ref: Diarization, collar: float, score_overlap: bool) -> list[Segment]:
    excluded: list[Segment] = []
    if collar > 0:
        for seg, _ in ref.turns:
            for b in (seg.onset, seg.offset):
                lo = max(0.0, b - collar)
                hi = b + collar
                if hi - lo > 1e-9:
                    excluded.append(Segment(lo, hi))
    if not score_overlap:
        excluded.extend(overlap_regions(ref))
    return timeline_support(excluded)


def _sweep(ref: Diarization, hyp: Diarization, excluded: list[Segment]):
    """Elementary intervals (dur, active ref speakers, active hyp speakers)."""
    points = {t for seg, _ in ref.turns for t in (seg.onset, seg.offset)}
    points |= {t for seg, _ in hyp.turns for t in (seg.onset, seg.offset)}
    points |= {t for seg in excluded for t in (seg.onset, seg.offset)}
    points = sorted(points)
    pieces = []
    for t0, t1 in zip(points, points[1:]):
        if t1 - t0 <= 1e-9:
            continue
        mid = 0.5 * (t0 + t1)
        if any(seg.onset <= mid < seg.offset for seg in excluded):
            continue
        ref_active = frozenset(s for seg, s in ref.turns if seg.onset <= mid < seg.offset)
        hyp_active = frozenset(s for seg, s in hyp.turns if seg.onset <= mid < seg.offset)
        if ref_active or hyp_active:
            pieces.append((t1 - t0, ref_active, hyp_active))
    return pieces


def der(
    ref: Diarization,
    hyp: Diarization,
    collar: float = 0.25,
    score_overlap: bool = True,
    mapper=optimal_mapping,
) -> DerReport:
    """Diarization error rate of hyp against ref.

    Per elementary interval: MISS counts reference speakers beyond the
    hypothesis speaker count, FA the reverse, and confusion the matched
    time attributed to the wrong (optimally mapped) speaker. The
    denominator is total scored reference speaker-time.
    """
    if ref.recording_id != hyp.recording_id:
        raise ConstraintError(
            f"recording mismatch: {ref.recording_id!r} vs {hyp.recording_id!r}"
        )
    if collar < 0:
        raise ConstraintError(f"collar must be non-negative, got {collar}")
    excluded = _excluded_regions(ref, collar, score_overlap)
    pieces = _sweep(ref, hyp, excluded)

    ref_speakers = sorted({s for _, rs, _ in pieces for s in rs})
    hyp_speakers = sorted({s for _, _, hs in pieces for s in hs})
    overlap = np.zeros((len(ref_speakers), len(hyp_speakers)))
    r_idx = {s: i for i, s in enumerate(ref_speakers)}
    h_idx = {s: i for i, s in enumerate(hyp_speakers)}
    for dur, rs, hs in pieces:
        for r in rs:
            for h in hs:
                overlap[r_idx[r], h_idx[h]] += dur
    assignment = mapper(overlap)
    mapping = {
        ref_speakers[r]: hyp_speakers[c]
        for r, c in assignment.items()
        if overlap[r, c] > 1e-9
    }

    denom = miss = fa = conf = 0.0
    for dur, rs, hs in pieces:
        n_ref, n_hyp = len(rs), len(hs)
        denom += dur * n_ref
        miss += dur * max(0, n_ref - n_hyp)
        fa += dur * max(0, n_hyp - n_ref)
        n_correct = sum(1 for r in rs if mapping.get(r) in hs)
        conf += dur * (min(n_ref, n_hyp) - n_correct)

    jer_pct = jer(ref, hyp, mapping)
    return _build_report(fa, miss, conf, denom, jer_pct, mapping)


def _build_report(fa, miss, conf, denom, jer_pct, mapping) -> DerReport:
    if denom <= 0:
        if fa > 1e-9:
            raise ConstraintError("reference has no scored speech but hypothesis does")
        return DerReport(0.0, 0.0, 0.0, 0.0, jer_pct, mapping, 0.0, fa, miss, conf)
    return DerReport(
        fa_pct=fa / denom * 100.0,
        miss_pct=miss / denom * 100.0,
        confusion_pct=conf / denom * 100.0,
        der_pct=(fa + miss + conf) / denom * 100.0,
        jer_pct=jer_pct,
        mapping=mapping,
        scored_ref_seconds=denom,
        fa_seconds=fa,
        miss_seconds=miss,
        confusion_seconds=conf,
    )


def jer(ref: Diarization, hyp: Diarization, mapping: dict[str, str]) -> float:
    """Mean per-reference-speaker Jaccard error (percent), no collar.

    Unmapped reference speakers score a full error of 1.
    """
    errors = jer_speaker_errors(ref, hyp, mapping)
    if not errors:
        return 0.0
    return float(np.mean(list(errors.values()))) * 100.0


def jer_speaker_errors(ref: Diarization, hyp: Diarization, mapping: dict[str, str]) -> dict[str, float]:
    errors: dict[str, float] = {}
    for spk in ref.speakers:
        r_support = ref.speaker_support(spk)
        mapped = mapping.get(spk)
        if mapped is None:
            errors[spk] = 1.0
            continue
        h_support = hyp.speaker_support(mapped)
        inter = total_duration(intersect_timelines(r_support, h_support))
        union = total_duration(r_support) + total_duration(h_support) - inter
        errors[spk] = 1.0 - inter / union if union > 0 else 0.0
    return errors


def frame_der(
    ref: Diarization,
    hyp: Diarization,
    collar: float = 0.25,
    score_overlap: bool = True,
    frame_shift: float = FRAME_SHIFT,
) -> DerReport:
    """Frame-rasterized scorer, kept as a cross-check for the exact sweep."""
    if ref.recording_id != hyp.recording_id:
        raise ConstraintError("recording mismatch")
    duration = max(ref.extent(), hyp.extent())
    n = max(1, math.ceil(duration / frame_shift - 1e-9))
    excluded = _excluded_regions(ref, collar, score_overlap)
    keep = rasterize(excluded, frame_shift, duration).values[:n] == 0

    def masks(diar):
        return {
            s: rasterize(diar.speaker_support(s), frame_shift, duration).values[:n].astype(bool) & keep
            for s in diar.speakers
        }

    ref_masks, hyp_masks = masks(ref), masks(hyp)
    ref_speakers, hyp_speakers = sorted(ref_masks), sorted(hyp_masks)
    overlap = np.zeros((len(ref_speakers), len(hyp_speakers)))
    for i, r in enumerate(ref_speakers):
        for j, h in enumerate(hyp_speakers):
            overlap[i, j] = np.sum(ref_masks[r] & hyp_masks[h])
    assignment = optimal_mapping(overlap)
    mapping = {
        ref_speakers[r]: hyp_speakers[c]
        for r, c in assignment.items()
        if overlap[r, c] > 0
    }

    n_ref = np.sum([m for m in ref_masks.values()], axis=0) if ref_masks else np.zeros(n)
    n_hyp = np.sum([m for m in hyp_masks.values()], axis=0) if hyp_masks else np.zeros(n)
    n_correct = np.zeros(n)
    for r, h in mapping.items():
        n_correct += ref_masks[r] & hyp_masks[h]
    denom = float(np.sum(n_ref)) * frame_shift
    miss = float(np.sum(np.maximum(0, n_ref - n_hyp))) * frame_shift
    fa = float(np.sum(np.maximum(0, n_hyp - n_ref))) * frame_shift
    conf = float(np.sum(np.minimum(n_ref, n_hyp) - n_correct)) * frame_shift
    return _build_report(fa, miss, conf, denom, jer(ref, hyp, mapping), mapping)


def score_corpus(
    refs: dict[str, Diarization],
    hyps: dict[str, Diarization],
    collar: float = 0.25,
    score_overlap: bool = True,
) -> tuple[DerReport, dict[str, DerReport]]:
    """Score every reference recording; totals are aggregated time-weighted.

    Recordings missing from the hypothesis are scored against an empty one.
    """
    per_rec: dict[str, DerReport] = {}
    fa = miss = conf = denom = 0.0
    speaker_errors: list[float] = []
    for rec in sorted(refs):
        ref = refs[rec]
        hyp = hyps.get(rec, Diarization(rec, ()))
        report = der(ref, hyp, collar=collar, score_overlap=score_overlap)
        per_rec[rec] = report
        fa += report.fa_seconds
        miss += report.miss_seconds
        conf += report.confusion_seconds
        denom += report.scored_ref_seconds
        speaker_errors.extend(jer_speaker_errors(ref, hyp, report.mapping).values())
    jer_pct = float(np.mean(speaker_errors)) * 100.0 if speaker_errors else 0.0
    return _build_report(fa, miss, conf, denom, jer_pct, {}), per_rec
