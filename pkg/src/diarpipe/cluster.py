"""Segmentation and clustering: uniform windows, consecutive-segment merging,
agglomerative clustering with long/short reassignment, and spectral
clustering over a pluggable affinity provider.

All merge/stop/speaker thresholds are interpreted on the raw cosine
similarity scale; the mapped [0,1] scale (cos+1)/2 feeds spectral
clustering.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .core import (
    AffinityMatrix,
    ConstraintError,
    Diarization,
    EPS,
    EmbeddingSequence,
    Segment,
    merge_speaker_turns,
)


@dataclass(frozen=True)
class AhcParams:
    """Thresholds of the agglomerative pipeline (tuned values as defaults)."""

    segment_thr: float = 0.54
    stop_thr: float = 0.6
    long_min: float = 6.0
    speaker_thr: float = 0.2
    window: float = 1.28
    shift: float = 0.32

    def __post_init__(self):
        for name in ("segment_thr", "stop_thr", "speaker_thr"):
            value = getattr(self, name)
            if not -1.0 <= value <= 1.0:
                raise ConstraintError(f"{name} must be in [-1, 1], got {value}")
        if not self.shift > 0 or self.window < self.shift:
            raise ConstraintError("window >= shift > 0 required")
        if self.long_min < 0:
            raise ConstraintError("long_min must be non-negative")


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    if vectors.size and norms.min() <= 0:
        raise ConstraintError("zero-norm embedding vector")
    return vectors / norms


def _pairwise_cosine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # einsum without optimization keeps the reduction order independent of
    # operand shapes, so windowed and full computations agree bit-exactly.
    cos = np.einsum("id,jd->ij", a, b, optimize=False)
    return np.clip(cos, -1.0, 1.0)


class AffinityProvider(ABC):
    """Produces one affinity row per anchor against a context window.

    This is the input/output contract of the affinity network: the row for
    anchor x_i holds scores against each context segment, on the mapped
    [0,1] scale.
    """

    name = "abstract"

    def __init__(self, context_n: int = 64):
        if context_n < 1:
            raise ConstraintError(f"context_n must be positive, got {context_n}")
        self.context_n = context_n

    @abstractmethod
    def rows(self, anchors: np.ndarray, context: np.ndarray) -> np.ndarray:
        """(n_anchors, dim) x (n_context, dim) -> (n_anchors, n_context) scores."""


class CosineAffinityProvider(AffinityProvider):
    """Baseline provider: mapped cosine similarity per pair."""

    name = "cosine"

    def rows(self, anchors: np.ndarray, context: np.ndarray) -> np.ndarray:
        cos = _pairwise_cosine(_unit_rows(anchors), _unit_rows(context))
        return (cos + 1.0) / 2.0


def uniform_segments(speech, window: float, shift: float) -> list[Segment]:
    """Sliding windows over each speech region.

    Full windows start at region onset + k*shift. An uncovered tail gets a
    final shorter window from the next start position when it is at least
    one shift long, otherwise a full window right-aligned to the region
    end. Regions shorter than the window yield one segment equal to the
    region.
    """
    if not shift > 0 or window < shift:
        raise ConstraintError("window >= shift > 0 required")
    out: list[Segment] = []
    for region in speech:
        if region.duration <= window + EPS:
            out.append(region)
            continue
        k = 0
        while region.onset + k * shift + window <= region.offset + EPS:
            start = region.onset + k * shift
            out.append(Segment(start, start + window))
            k += 1
        last_end = region.onset + (k - 1) * shift + window
        if region.offset - last_end > EPS:
            next_start = region.onset + k * shift
            if region.offset - next_start >= shift - EPS:
                out.append(Segment(next_start, region.offset))
            else:
                out.append(Segment(region.offset - window, region.offset))
    return out


def merge_consecutive(embs: EmbeddingSequence, segment_thr: float) -> EmbeddingSequence:
    """Greedy left-to-right merging of similar consecutive segments.

    The running group is merged with the next record while the cosine
    between the group mean and the next vector stays >= segment_thr. Merged
    vectors are duration-weighted means renormalized to unit norm. Records
    separated by a time gap are never merged, so covered duration is
    preserved.
    """
    if not -1.0 <= segment_thr <= 1.0:
        raise ConstraintError(f"segment_thr must be in [-1, 1], got {segment_thr}")
    if len(embs) <= 1:
        return embs
    units = _unit_rows(embs.vectors)
    segments: list[Segment] = []
    vectors: list[np.ndarray] = []

    def close(first: Segment, last: Segment, acc: np.ndarray):
        segments.append(Segment(first.onset, last.offset))
        vectors.append(acc / np.linalg.norm(acc))

    first = last = embs.segments[0]
    acc = units[0] * embs.segments[0].duration
    for seg, unit in zip(embs.segments[1:], units[1:]):
        contiguous = seg.onset <= last.offset + EPS
        mean = acc / np.linalg.norm(acc)
        if contiguous and float(mean @ unit) >= segment_thr - EPS:
            acc = acc + unit * seg.duration
            last = seg
        else:
            close(first, last, acc)
            first = last = seg
            acc = unit * seg.duration
    close(first, last, acc)
    return EmbeddingSequence(tuple(segments), np.stack(vectors).astype(np.float32))


def cosine_affinity(embs: EmbeddingSequence) -> AffinityMatrix:
    """Pairwise cosine affinity; mapped (cos+1)/2 with the raw scale kept."""
    if len(embs) == 0:
        empty = np.zeros((0, 0), dtype=np.float32)
        return AffinityMatrix(empty, raw=empty)
    units = _unit_rows(embs.vectors)
    raw = _pairwise_cosine(units, units)
    return AffinityMatrix(((raw + 1.0) / 2.0).astype(np.float32), raw=raw.astype(np.float32))


def ahc(similarity, stop_thr: float, linkage: str = "average") -> np.ndarray:
    """Agglomerative clustering on a raw-cosine similarity matrix.

    Repeatedly merges the pair with the highest linkage similarity while it
    stays >= stop_thr; ties break towards the lowest index pair. Returns a
    label per item, numbered by first occurrence.
    """
    if isinstance(similarity, AffinityMatrix):
        if similarity.raw is None:
            raise ConstraintError("ahc needs the raw cosine scale of the affinity")
        similarity = similarity.raw
    sim = np.array(similarity, dtype=np.float64)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1]:
        raise ConstraintError(f"similarity matrix must be square, got shape {sim.shape}")
    n = sim.shape[0]
    if n == 0:
        raise ConstraintError("cannot cluster an empty similarity matrix")
    if linkage not in ("average", "single", "complete"):
        raise ConstraintError(f"unknown linkage {linkage!r}")

    sim = (sim + sim.T) / 2.0
    np.fill_diagonal(sim, -np.inf)
    active = np.ones(n, dtype=bool)
    sizes = np.ones(n, dtype=np.int64)
    members: list[list[int]] = [[i] for i in range(n)]

    while active.sum() > 1:
        masked = np.where(active[:, None] & active[None, :], sim, -np.inf)
        best = masked.max()
        if best < stop_thr:
            break
        i, j = np.argwhere(masked == best)[0]
        i, j = int(min(i, j)), int(max(i, j))
        others = active.copy()
        others[[i, j]] = False
        if linkage == "average":
            sim[i, others] = (
                sizes[i] * sim[i, others] + sizes[j] * sim[j, others]
            ) / (sizes[i] + sizes[j])
        elif linkage == "single":
            sim[i, others] = np.maximum(sim[i, others], sim[j, others])
        else:
            sim[i, others] = np.minimum(sim[i, others], sim[j, others])
        sim[others, i] = sim[i, others]
        sizes[i] += sizes[j]
        members[i].extend(members[j])
        active[j] = False

    labels = np.empty(n, dtype=np.int64)
    for new_label, root in enumerate(sorted(np.flatnonzero(active), key=lambda r: min(members[r]))):
        labels[members[root]] = new_label
    return labels


def reassign_short_clusters(
    labels: np.ndarray, embs: EmbeddingSequence, params: AhcParams
) -> np.ndarray:
    """Absorb short clusters into the closest long cluster by centroid cosine.

    Clusters with total segment duration >= long_min are long. A short
    cluster whose best raw cosine to a long centroid is >= speaker_thr is
    relabeled to that cluster; otherwise it stays a new speaker. Without
    any long cluster, labels are unchanged.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(embs):
        raise ConstraintError(f"{len(labels)} labels for {len(embs)} records")
    durations: dict[int, float] = {}
    for seg, label in zip(embs.segments, labels):
        durations[int(label)] = durations.get(int(label), 0.0) + seg.duration
    long_labels = sorted(l for l, d in durations.items() if d >= params.long_min - EPS)
    short_labels = sorted(l for l in durations if l not in long_labels)
    if not long_labels or not short_labels:
        return labels.copy()

    units = _unit_rows(embs.vectors)

    def centroid(label: int) -> np.ndarray:
        mean = units[labels == label].mean(axis=0)
        norm = np.linalg.norm(mean)
        return mean / norm if norm > 0 else mean

    long_centroids = np.stack([centroid(l) for l in long_labels])
    out = labels.copy()
    for label in short_labels:
        sims = long_centroids @ centroid(label)
        best = int(np.argmax(sims))
        if sims[best] >= params.speaker_thr - EPS:
            out[labels == label] = long_labels[best]
    return out


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = np.min(((X[:, None, :] - np.asarray(centers)[None, :, :]) ** 2).sum(-1), axis=1)
        total = float(d2.sum())
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = min(int(np.searchsorted(np.cumsum(d2), rng.random() * total)), n - 1)
        centers.append(X[idx])
    return np.stack(centers)


def _kmeans(X: np.ndarray, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 100) -> np.ndarray:
    """Deterministic k-means: seeded k-means++ inits, best of `restarts` runs."""
    n = X.shape[0]
    if k >= n:
        return np.arange(n, dtype=np.int64)
    if k == 1:
        return np.zeros(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _kmeanspp_init(X, k, rng)
        labels = None
        for _ in range(max_iter):
            d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
            new_labels = d2.argmin(axis=1)
            for c in range(k):
                if not np.any(new_labels == c):
                    new_labels[int(d2[np.arange(n), new_labels].argmax())] = c
            if labels is not None and np.array_equal(labels, new_labels):
                break
            labels = new_labels
            centers = np.stack([X[labels == c].mean(axis=0) for c in range(k)])
        inertia = float(((X - centers[labels]) ** 2).sum())
        if inertia < best_inertia - 1e-12:
            best_inertia, best_labels = inertia, labels
    return best_labels.astype(np.int64)


def spectral_cluster(affinity, max_speakers: int = 20, seed: int = 0) -> np.ndarray:
    """Normalized-Laplacian spectral clustering with eigen-gap model selection.

    L = I - D^{-1/2} S D^{-1/2}; the cluster count is the largest gap
    between consecutive ascending eigenvalues among the smallest
    max_speakers, and k-means (fixed seed, 10 restarts) runs on the first
    k row-normalized eigenvectors. Zero-degree items become their own
    clusters before the decomposition.
    """
    if isinstance(affinity, AffinityMatrix):
        affinity = affinity.values
    A = np.array(affinity, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConstraintError(f"affinity must be square, got shape {A.shape}")
    if max_speakers < 1:
        raise ConstraintError(f"max_speakers must be positive, got {max_speakers}")
    n = A.shape[0]
    if n == 0:
        raise ConstraintError("cannot cluster an empty affinity matrix")
    A = (A + A.T) / 2.0
    if A.size and A.min() < -1e-9:
        raise ConstraintError("affinity must be non-negative")

    degrees = A.sum(axis=1)
    isolated = np.flatnonzero(degrees <= EPS)
    kept = np.flatnonzero(degrees > EPS)
    labels = np.full(n, -1, dtype=np.int64)
    if kept.size:
        S = A[np.ix_(kept, kept)]
        d = S.sum(axis=1)
        d_isqrt = 1.0 / np.sqrt(d)
        lap = np.eye(kept.size) - d_isqrt[:, None] * S * d_isqrt[None, :]
        eigvals, eigvecs = np.linalg.eigh(lap)
        limit = min(max_speakers, kept.size - 1)
        if limit < 1:
            k = 1
        else:
            gaps = eigvals[1 : limit + 1] - eigvals[:limit]
            k = int(np.argmax(gaps)) + 1
        basis = eigvecs[:, :k]
        norms = np.linalg.norm(basis, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        labels[kept] = _kmeans(basis / norms, k, seed=seed)
        next_label = k
    else:
        next_label = 0
    for idx in isolated:
        labels[idx] = next_label
        next_label += 1

    out = np.empty(n, dtype=np.int64)
    seen: dict[int, int] = {}
    for i, label in enumerate(labels):
        out[i] = seen.setdefault(int(label), len(seen))
    return out


def affinity_rows(embs: EmbeddingSequence, provider: AffinityProvider, hop: int | None = None) -> AffinityMatrix:
    """Assemble the full affinity matrix from windowed provider rows.

    For every anchor the provider scores a sliding context window of
    provider.context_n segments (hop defaults to the window size, with a
    right-aligned tail window); overlapping outputs are averaged and the
    result symmetrized as (S + S^T)/2.
    """
    n = len(embs)
    if n == 0:
        return AffinityMatrix(np.zeros((0, 0), dtype=np.float32))
    ctx = provider.context_n
    hop = ctx if hop is None else hop
    if hop < 1:
        raise ConstraintError(f"hop must be positive, got {hop}")
    if n <= ctx:
        windows = [(0, n)]
    else:
        starts = list(range(0, n - ctx + 1, hop))
        if starts[-1] != n - ctx:
            starts.append(n - ctx)
        windows = [(s, s + ctx) for s in starts]
    vectors = embs.vectors.astype(np.float64)
    total = np.zeros((n, n))
    counts = np.zeros((n, n))
    for c0, c1 in windows:
        block = provider.rows(vectors, vectors[c0:c1])
        if block.shape != (n, c1 - c0):
            raise ConstraintError(
                f"provider {provider.name!r} returned shape {block.shape}, "
                f"expected {(n, c1 - c0)}"
            )
        total[:, c0:c1] += block
        counts[:, c0:c1] += 1
    if counts.min() < 1:
        raise ConstraintError("context windows left affinity entries uncovered")
    full = total / counts
    full = (full + full.T) / 2.0
    return AffinityMatrix(full.astype(np.float32))


def ahc_pipeline(embs: EmbeddingSequence, params: AhcParams) -> tuple[np.ndarray, EmbeddingSequence]:
    """Merge consecutive segments, cluster, reassign shorts; labels + merged records."""
    merged = merge_consecutive(embs, params.segment_thr)
    if len(merged) == 0:
        return np.zeros(0, dtype=np.int64), merged
    affinity = cosine_affinity(merged)
    labels = ahc(affinity.raw, params.stop_thr)
    labels = reassign_short_clusters(labels, merged, params)
    return labels, merged


def labels_to_diarization(
    recording_id: str, segments, labels, prefix: str = "spk"
) -> Diarization:
    """Turn per-segment cluster labels into a diarization, merging per speaker."""
    labels = np.asarray(labels)
    if len(segments) != len(labels):
        raise ConstraintError(f"{len(segments)} segments for {len(labels)} labels")
    order: dict[int, int] = {}
    turns = []
    for seg, label in zip(segments, labels):
        idx = order.setdefault(int(label), len(order))
        turns.append((seg, f"{prefix}{idx:02d}"))
    return merge_speaker_turns(recording_id, turns)
