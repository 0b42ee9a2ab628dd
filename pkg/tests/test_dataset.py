import json
import struct

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from eventcure.dataset import (
    AlbumRecord,
    DatasetManifest,
    EventLabelDistribution,
    EventVocabulary,
    VoteSet,
    aggregate_votes,
    load_manifest,
    read_features,
    sample_label,
    save_manifest,
    split_half_consistency,
    write_features,
)
from eventcure.errors import (
    ConfigError,
    DimensionMismatch,
    NoOverlap,
    NoSurvivingLabel,
    NoWorkers,
    ParseError,
    UnknownLabel,
)
from eventcure.synth import SynthConfig, generate, simulate_vote_sets

VOCAB = EventVocabulary(("Wedding", "Birthday", "Skiing", "Graduation"))


def votes_from_counts(counts, album_id="a"):
    """One single-label vote per count unit, each from a distinct worker."""
    votes, k = [], 0
    for label, n in counts.items():
        for _ in range(n):
            votes.append((f"w{k}", {label}))
            k += 1
    return VoteSet(album_id, votes)


class TestAggregateVotes:
    def test_single_votes_are_dropped(self):
        dist = aggregate_votes(votes_from_counts({"Wedding": 7, "Birthday": 2, "Skiing": 1}), VOCAB)
        assert_allclose(dist.probs, [7 / 9, 2 / 9, 0, 0], atol=1e-12)

    def test_single_surviving_label(self):
        dist = aggregate_votes(votes_from_counts({"Wedding": 5}), VOCAB)
        assert_array_equal(dist.probs, [1, 0, 0, 0])

    def test_nothing_survives(self):
        with pytest.raises(NoSurvivingLabel):
            aggregate_votes(votes_from_counts({"Wedding": 1, "Birthday": 1}), VOCAB)

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            aggregate_votes(votes_from_counts({"Funeral": 3}), VOCAB)

    def test_multi_label_vote_counts_each_label(self):
        vs = VoteSet("a", [("w1", {"Wedding", "Birthday"}), ("w2", {"Wedding", "Birthday"}), ("w3", {"Wedding"})])
        assert_allclose(aggregate_votes(vs, VOCAB).probs, [0.6, 0.4, 0, 0])

    @settings(max_examples=50)
    @given(st.lists(st.integers(0, 6), min_size=4, max_size=4), st.permutations(range(4)))
    def test_sums_to_one_and_permutation_equivariant(self, counts, perm):
        named = {VOCAB.names[i]: n for i, n in enumerate(counts) if n}
        assume(any(n >= 2 for n in counts))
        dist = aggregate_votes(votes_from_counts(named), VOCAB)
        assert abs(dist.probs.sum() - 1) < 1e-12
        shuffled = EventVocabulary(tuple(VOCAB.names[i] for i in perm))
        dist2 = aggregate_votes(votes_from_counts(named), shuffled)
        assert_allclose(dist2.probs, dist.probs[list(perm)])


class TestVoteSet:
    def test_worker_votes_once(self):
        with pytest.raises(ConfigError):
            VoteSet("a", [("w1", {"Wedding"}), ("w1", {"Skiing"})])

    @pytest.mark.parametrize("labels", [set(), {"a", "b", "c", "d"}])
    def test_label_count_bounds(self, labels):
        with pytest.raises(ConfigError):
            VoteSet("a", [("w1", labels)])


class TestSampleLabel:
    def test_degenerate(self):
        rng = np.random.default_rng(0)
        dist = EventLabelDistribution([1.0, 0.0, 0.0])
        assert {sample_label(dist, rng) for _ in range(500)} == {0}

    def test_two_label_frequency(self):
        rng = np.random.default_rng(1)
        dist = EventLabelDistribution([0.7, 0.3])
        draws = np.array([sample_label(dist, rng) for _ in range(10_000)])
        assert 0.68 <= np.mean(draws == 0) <= 0.72

    def test_uniform_frequency(self):
        rng = np.random.default_rng(2)
        dist = EventLabelDistribution(np.full(4, 0.25))
        freq = np.bincount([sample_label(dist, rng) for _ in range(10_000)], minlength=4) / 10_000
        assert np.all((freq >= 0.22) & (freq <= 0.28))

    def test_never_returns_zero_mass(self):
        rng = np.random.default_rng(3)
        dist = EventLabelDistribution([0.0, 0.5, 0.0, 0.5, 0.0])
        assert {sample_label(dist, rng) for _ in range(2000)} == {1, 3}


class TestSplitHalf:
    def test_unanimous(self):
        sets = [VoteSet(f"a{k}", [(f"w{i}", {"Skiing"}) for i in range(6)]) for k in range(5)]
        assert split_half_consistency(sets, 20, np.random.default_rng(0)) == 1.0

    def test_one_worker_per_album_is_an_error(self):
        sets = [VoteSet(f"a{k}", [(f"w{k}", {"Skiing"})]) for k in range(5)]
        with pytest.raises(NoOverlap):
            split_half_consistency(sets, 10, np.random.default_rng(0))

    def test_no_workers(self):
        with pytest.raises(NoWorkers):
            split_half_consistency([VoteSet("a", [])], 3, np.random.default_rng(0))

    def test_simulated_majority_agrees(self):
        m = generate(SynthConfig(n_classes=5, albums_per_event=20, seed=4))
        sets = simulate_vote_sets(m, 12, np.random.default_rng(5))
        assert split_half_consistency(sets, 100, np.random.default_rng(6)) > 0.9

    def test_invariant_to_worker_relabeling(self):
        m = generate(SynthConfig(n_classes=4, albums_per_event=10, seed=1))
        sets = simulate_vote_sets(m, 8, np.random.default_rng(2))
        renamed = [VoteSet(vs.album_id, [("x" + w[::-1], l) for w, l in vs.votes]) for vs in sets]
        a = split_half_consistency(sets, 30, np.random.default_rng(9))
        b = split_half_consistency(renamed, 30, np.random.default_rng(9))
        assert a == b


def small_manifest(n_albums=3, d=4, seed=0):
    rng = np.random.default_rng(seed)
    vocab = EventVocabulary(("x", "y", "z"))
    albums = []
    for k in range(n_albums):
        n = int(rng.integers(1, 6))
        albums.append(
            AlbumRecord(
                f"alb{k}",
                [f"img{k}_{i}" for i in range(n)],
                rng.standard_normal((n, d)),
                EventLabelDistribution(rng.dirichlet(np.ones(3))),
                rng.random(n) if k % 2 == 0 else None,
                ("train", "validation", "test")[k % 3],
            )
        )
    return DatasetManifest(vocab, albums, d)


class TestManifestIO:
    def test_round_trip(self, tmp_path):
        m = small_manifest()
        save_manifest(m, tmp_path / "m.json")
        back = load_manifest(tmp_path / "m.json")
        assert back == m
        assert back.albums[0].image_ids == m.albums[0].image_ids

    def test_empty_manifest(self, tmp_path):
        m = DatasetManifest(VOCAB, [], 3)
        save_manifest(m, tmp_path / "m.json")
        back = load_manifest(tmp_path / "m.json")
        assert back.albums == () and back.feature_dim == 3

    def test_row_count_mismatch(self, tmp_path):
        m = small_manifest()
        save_manifest(m, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        doc["albums"][0]["image_ids"].append("extra")
        (tmp_path / "m.json").write_text(json.dumps(doc))
        with pytest.raises(DimensionMismatch):
            load_manifest(tmp_path / "m.json")

    def test_malformed_json_reports_position(self, tmp_path):
        (tmp_path / "m.json").write_text('{\n  "vocabulary": [\n}')
        with pytest.raises(ParseError) as info:
            load_manifest(tmp_path / "m.json")
        assert info.value.line == 3

    def test_missing_field(self, tmp_path):
        (tmp_path / "m.json").write_text('{"vocabulary": ["a", "b"]}')
        with pytest.raises(ParseError):
            load_manifest(tmp_path / "m.json")


class TestFeatureFile:
    def test_layout(self, tmp_path):
        X = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        write_features(tmp_path / "f.evcf", X)
        raw = (tmp_path / "f.evcf").read_bytes()
        assert raw[:4] == b"EVCF"
        assert struct.unpack("<II", raw[4:12]) == (2, 3)
        assert_array_equal(np.frombuffer(raw[12:], dtype="<f4"), X.ravel())

    def test_bit_exact_round_trip(self, tmp_path):
        X = np.random.default_rng(0).standard_normal((7, 5)).astype(np.float32)
        write_features(tmp_path / "f.evcf", X)
        assert read_features(tmp_path / "f.evcf").tobytes() == X.tobytes()

    def test_bad_magic(self, tmp_path):
        (tmp_path / "f.evcf").write_bytes(b"NOPE" + struct.pack("<II", 1, 1) + b"\0" * 4)
        with pytest.raises(ParseError):
            read_features(tmp_path / "f.evcf")

    def test_truncated(self, tmp_path):
        (tmp_path / "f.evcf").write_bytes(b"EVCF" + struct.pack("<II", 2, 2) + b"\0" * 4)
        with pytest.raises(ParseError):
            read_features(tmp_path / "f.evcf")


class TestRecords:
    def test_importance_out_of_range(self):
        with pytest.raises(ConfigError):
            AlbumRecord("a", ["i"], np.zeros((1, 2)), [1.0, 0.0], [1.5])

    def test_feature_rows_must_match(self):
        with pytest.raises(DimensionMismatch):
            AlbumRecord("a", ["i", "j"], np.zeros((3, 2)), [1.0, 0.0])

    def test_distribution_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            EventLabelDistribution([0.5, 0.4])

    def test_vocabulary_unique(self):
        with pytest.raises(ConfigError):
            EventVocabulary(("a", "a"))

    def test_manifest_checks_class_count(self):
        a = AlbumRecord("a", ["i"], np.zeros((1, 2)), [0.5, 0.5])
        with pytest.raises(DimensionMismatch):
            DatasetManifest(VOCAB, [a], 2)
