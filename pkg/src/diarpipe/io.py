"""Readers and writers: RTTM text, DPE1 embedding files, DPP1 posterior files.

Binary formats are little-endian with an explicit magic + version header.
All readers reject trailing garbage. RTTM times are quantized to 1 ms on
write; round trips are byte-exact after one write.
"""

import logging
import struct

import numpy as np

from .core import Diarization, EmbeddingSequence, FrameTrack, InputError, Segment

logger = logging.getLogger(__name__)

EMBEDDING_MAGIC = b"DPE1"
POSTERIOR_MAGIC = b"DPP1"
FORMAT_VERSION = 1

_EMB_HEADER = struct.Struct("<4sIII")
_POST_HEADER = struct.Struct("<4sIIId")


# ---------------------------------------------------------------------------
# RTTM
# ---------------------------------------------------------------------------

def parse_rttm(text: str) -> dict[str, Diarization]:
    """Parse RTTM text into one Diarization per recording.

    Lines: "SPEAKER <rec> <chan> <onset> <dur> <NA> <NA> <spk> <NA> <NA>".
    Comment lines (";;") and blanks are ignored; other record types are
    skipped with a warning. Malformed SPEAKER lines raise InputError with
    the offending line number.
    """
    turns: dict[str, list[tuple[Segment, str]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        fields = line.split()
        if fields[0] != "SPEAKER":
            logger.warning("rttm line %d: skipping non-SPEAKER record %r", lineno, fields[0])
            continue
        if len(fields) != 10:
            raise InputError(f"rttm line {lineno}: expected 10 fields, got {len(fields)}")
        rec, _chan, onset_s, dur_s, _, _, spk = fields[1:8]
        try:
            onset = float(onset_s)
            dur = float(dur_s)
        except ValueError:
            raise InputError(f"rttm line {lineno}: non-numeric onset/duration") from None
        if dur <= 0:
            raise InputError(f"rttm line {lineno}: duration must be positive, got {dur}")
        if onset < 0:
            raise InputError(f"rttm line {lineno}: onset must be non-negative, got {onset}")
        turns.setdefault(rec, []).append((Segment(onset, onset + dur), spk))
    out = {}
    for rec, rec_turns in turns.items():
        try:
            out[rec] = Diarization(rec, tuple(rec_turns))
        except Exception as exc:
            raise InputError(f"rttm recording {rec!r}: {exc}") from None
    return out


def write_rttm(diars) -> str:
    """Canonical RTTM text: 3-decimal times, sorted by (recording, onset, speaker)."""
    if isinstance(diars, Diarization):
        diars = [diars]
    elif isinstance(diars, dict):
        diars = list(diars.values())
    lines = []
    for diar in sorted(diars, key=lambda d: d.recording_id):
        for seg, spk in sorted(diar.turns, key=lambda t: (t[0].onset, t[1], t[0].offset)):
            lines.append(
                f"SPEAKER {diar.recording_id} 1 {seg.onset:.3f} {seg.duration:.3f} "
                f"<NA> <NA> {spk} <NA> <NA>"
            )
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# DPE1 embedding files
# ---------------------------------------------------------------------------

def write_embeddings(embs: EmbeddingSequence) -> bytes:
    """Serialize an EmbeddingSequence to the DPE1 layout."""
    dim, count = embs.dim, len(embs)
    parts = [_EMB_HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, dim, count)]
    for seg, vec in embs.records:
        parts.append(struct.pack("<dd", seg.onset, seg.offset))
        parts.append(np.ascontiguousarray(vec, dtype="<f4").tobytes())
    return b"".join(parts)


def read_embeddings(data: bytes) -> EmbeddingSequence:
    """Parse DPE1 bytes; rejects bad magic/version, truncation, garbage, NaN."""
    if len(data) < _EMB_HEADER.size:
        raise InputError("embedding file truncated: missing header")
    magic, version, dim, count = _EMB_HEADER.unpack_from(data, 0)
    if magic != EMBEDDING_MAGIC:
        raise InputError(f"bad embedding file magic {magic!r}")
    if version != FORMAT_VERSION:
        raise InputError(f"unsupported embedding file version {version}")
    if dim == 0:
        raise InputError("embedding dim must be positive")
    expected = _EMB_HEADER.size + count * (16 + 4 * dim)
    if len(data) < expected:
        raise InputError(f"embedding file truncated: need {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise InputError(f"embedding file has {len(data) - expected} trailing bytes")
    rec_dt = np.dtype([("onset", "<f8"), ("offset", "<f8"), ("vec", "<f4", (dim,))])
    raw = np.frombuffer(data, dtype=rec_dt, count=count, offset=_EMB_HEADER.size)
    vectors = raw["vec"].reshape(count, dim)
    if vectors.size and not np.all(np.isfinite(vectors)):
        raise InputError("embedding payload contains NaN/Inf")
    try:
        segments = tuple(Segment(float(o), float(f)) for o, f in zip(raw["onset"], raw["offset"]))
    except Exception as exc:
        raise InputError(f"embedding file has invalid segment: {exc}") from None
    return EmbeddingSequence(segments, vectors.astype(np.float32))


# ---------------------------------------------------------------------------
# DPP1 posterior files
# ---------------------------------------------------------------------------

def write_posteriors(tracks) -> bytes:
    """Serialize equal-length, equal-shift tracks to the DPP1 layout."""
    tracks = list(tracks)
    if not tracks:
        raise InputError("cannot write a posterior file with zero tracks")
    n_frames = len(tracks[0])
    shift = tracks[0].frame_shift
    for t in tracks[1:]:
        if len(t) != n_frames or t.frame_shift != shift:
            raise InputError("posterior tracks must share length and frame_shift")
    header = _POST_HEADER.pack(POSTERIOR_MAGIC, FORMAT_VERSION, len(tracks), n_frames, shift)
    body = np.stack([t.values for t in tracks]).astype("<f4").tobytes() if n_frames else b""
    return header + body


def read_posteriors(data: bytes) -> list[FrameTrack]:
    """Parse DPP1 bytes into one FrameTrack per track row."""
    if len(data) < _POST_HEADER.size:
        raise InputError("posterior file truncated: missing header")
    magic, version, n_tracks, n_frames, shift = _POST_HEADER.unpack_from(data, 0)
    if magic != POSTERIOR_MAGIC:
        raise InputError(f"bad posterior file magic {magic!r}")
    if version != FORMAT_VERSION:
        raise InputError(f"unsupported posterior file version {version}")
    if not shift > 0:
        raise InputError(f"posterior frame_shift must be positive, got {shift}")
    expected = _POST_HEADER.size + 4 * n_tracks * n_frames
    if len(data) < expected:
        raise InputError(f"posterior file truncated: need {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise InputError(f"posterior file has {len(data) - expected} trailing bytes")
    flat = np.frombuffer(data, dtype="<f4", count=n_tracks * n_frames, offset=_POST_HEADER.size)
    values = flat.reshape(n_tracks, n_frames)
    if values.size and (not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1):
        raise InputError("posterior values must be finite and within [0, 1]")
    return [FrameTrack(row, shift) for row in values]


# ---------------------------------------------------------------------------
# Flat key-value run configuration
# ---------------------------------------------------------------------------

def parse_config(text: str) -> dict[str, str]:
    """Parse "key = value" lines; '#' starts a comment; blanks ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise InputError(f"config line {lineno}: empty key or value")
        if key in out:
            raise InputError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out
