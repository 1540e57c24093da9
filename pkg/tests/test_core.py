import numpy as np
import pytest
from hypothesis import given, settings

from diarpipe.core import (
    ConstraintError,
    Diarization,
    FrameTrack,
    Segment,
    derasterize,
    intersect_timelines,
    overlap_regions,
    rasterize,
    subtract_timelines,
    timeline_support,
)

from conftest import binary_tracks_st, random_diarization, segment_lists_st


def seg(a, b):
    return Segment(a, b)


def as_pairs(segments):
    return [(s.onset, s.offset) for s in segments]


class TestSegment:
    def test_rejects_zero_length(self):
        with pytest.raises(ConstraintError):
            Segment(1.0, 1.0)

    def test_rejects_inverted(self):
        with pytest.raises(ConstraintError):
            Segment(2.0, 1.0)

    def test_rejects_negative_onset(self):
        with pytest.raises(ConstraintError):
            Segment(-0.5, 1.0)

    def test_rejects_nan(self):
        with pytest.raises(ConstraintError):
            Segment(0.0, float("nan"))


class TestDiarization:
    def test_distinct_speakers_may_overlap(self):
        d = Diarization("r", ((seg(0, 10), "A"), (seg(5, 8), "B")))
        assert d.speakers == ("A", "B")

    def test_rejects_self_overlap(self):
        with pytest.raises(ConstraintError):
            Diarization("r", ((seg(0, 10), "A"), (seg(5, 8), "A")))

    def test_adjacent_same_speaker_turns_are_legal(self):
        d = Diarization("r", ((seg(0, 1), "A"), (seg(1, 2), "A")))
        assert len(d.turns) == 2

    def test_turns_sorted_by_onset(self):
        d = Diarization("r", ((seg(5, 6), "B"), (seg(0, 1), "A")))
        assert as_pairs([s for s, _ in d.turns]) == [(0, 1), (5, 6)]


class TestTimelineSupport:
    def test_empty(self):
        assert timeline_support([]) == []

    def test_overlap_merge(self):
        assert as_pairs(timeline_support([seg(0, 2), seg(1, 3)])) == [(0, 3)]

    def test_adjacency_merge(self):
        out = timeline_support([seg(0, 1), seg(1, 2), seg(5, 6)])
        assert as_pairs(out) == [(0, 2), (5, 6)]

    @given(segment_lists_st())
    @settings(max_examples=60, deadline=None)
    def test_idempotent_and_order_invariant(self, segments):
        once = timeline_support(segments)
        assert timeline_support(once) == once
        assert timeline_support(list(reversed(segments))) == once


class TestSetAlgebra:
    def test_intersect(self):
        out = intersect_timelines([seg(0, 5)], [seg(3, 8), seg(9, 10)])
        assert as_pairs(out) == [(3, 5)]

    def test_subtract(self):
        out = subtract_timelines([seg(0, 10)], [seg(2, 3), seg(5, 7)])
        assert as_pairs(out) == [(0, 2), (3, 5), (7, 10)]

    @given(segment_lists_st(), segment_lists_st())
    @settings(max_examples=60, deadline=None)
    def test_partition_identity(self, a, b):
        inter = intersect_timelines(a, b)
        only_a = subtract_timelines(a, b)
        total_a = sum(s.duration for s in timeline_support(a))
        assert sum(s.duration for s in inter) + sum(s.duration for s in only_a) == pytest.approx(
            total_a, abs=1e-6
        )


class TestRasterize:
    def test_simple(self):
        assert rasterize([seg(0, 0.03)], 0.01, 0.05).values.tolist() == [1, 1, 1, 0, 0]

    def test_empty(self):
        assert rasterize([], 0.01, 0.02).values.tolist() == [0, 0]

    def test_boundary_centers_count_as_inside(self):
        # centers at 0.005, 0.015, 0.025; the first two touch the segment
        assert rasterize([seg(0.005, 0.015)], 0.01, 0.03).values.tolist() == [1, 1, 0]

    def test_rejects_bad_shift(self):
        with pytest.raises(ConstraintError):
            rasterize([], 0.0, 1.0)


class TestDerasterize:
    def test_runs(self):
        out = derasterize(FrameTrack(np.array([1, 1, 0, 1], np.float32), 0.01))
        assert as_pairs(out) == [(0.0, 0.02), (pytest.approx(0.03), pytest.approx(0.04))]

    def test_empty(self):
        assert derasterize(FrameTrack(np.array([0, 0], np.float32), 0.01)) == []

    def test_rejects_non_binary(self):
        with pytest.raises(ConstraintError):
            derasterize(FrameTrack(np.array([0.5], np.float32), 0.01))

    @given(binary_tracks_st())
    @settings(max_examples=100, deadline=None)
    def test_round_trip_identity(self, track):
        segments = derasterize(track)
        back = rasterize(segments, track.frame_shift, track.duration)
        assert np.array_equal(back.values, track.values)


def pairwise_intersection_oracle(diar):
    """Independent overlap oracle: union of all pairwise speaker intersections."""
    speakers = diar.speakers
    pieces = []
    for i, a in enumerate(speakers):
        for b in speakers[i + 1 :]:
            pieces.extend(
                intersect_timelines(diar.speaker_support(a), diar.speaker_support(b))
            )
    return timeline_support(pieces)


class TestOverlapRegions:
    def test_single_speaker(self):
        assert overlap_regions(Diarization("r", ((seg(0, 10), "A"),))) == []

    def test_two_speakers(self):
        d = Diarization("r", ((seg(0, 10), "A"), (seg(5, 8), "B")))
        assert as_pairs(overlap_regions(d)) == [(5, 8)]

    def test_three_speakers(self):
        d = Diarization("r", ((seg(0, 4), "A"), (seg(2, 6), "B"), (seg(3, 5), "C")))
        expected = pairwise_intersection_oracle(d)
        assert as_pairs(expected) == [(2, 5)]
        assert overlap_regions(d) == expected

    def test_matches_oracle_on_random_diarizations(self, rng):
        for _ in range(200):
            d = random_diarization(rng, max_speakers=5)
            assert overlap_regions(d) == pairwise_intersection_oracle(d)

    def test_overlap_within_support_on_1000_random(self, rng):
        for _ in range(1000):
            d = random_diarization(rng, max_speakers=5, max_turns_per_speaker=3)
            leftover = subtract_timelines(overlap_regions(d), d.support())
            assert leftover == []


class TestFrameTrack:
    def test_rejects_out_of_range(self):
        with pytest.raises(ConstraintError):
            FrameTrack(np.array([1.5], np.float32), 0.01)

    def test_is_binary(self):
        assert FrameTrack(np.array([0, 1, 1], np.float32), 0.01).is_binary
        assert not FrameTrack(np.array([0.25], np.float32), 0.01).is_binary
