import struct

import numpy as np
import pytest

from protoadapt.bayes_adapter import VariationalPosterior
from protoadapt.data import (
    FLAG_NORMALIZED,
    MAGIC,
    SECTION_POSTERIOR,
    SECTION_WEIGHTS,
    decode_posterior,
    decode_weights,
    encode_posterior,
    encode_weights,
    few_shot_sample,
    load_badf,
    read_badf,
    save_badf,
    synth_generate,
)
from protoadapt.errors import DataError, FormatError, ParamError
from protoadapt.model import FeatureSet, Prototypes, l2_normalize_rows, predict_point


def _small_dataset(seed=0):
    rng = np.random.default_rng(seed)
    feats = FeatureSet(
        l2_normalize_rows(rng.standard_normal((6, 4))), rng.integers(0, 3, 6)
    )
    protos = Prototypes(l2_normalize_rows(rng.standard_normal((3, 4))))
    return feats, protos


class TestBadfRoundTrip:
    def test_save_load_save_is_bit_exact(self, tmp_path):
        feats, protos = _small_dataset()
        p1 = tmp_path / "a.badf"
        p2 = tmp_path / "b.badf"
        save_badf(p1, feats, protos)
        f2, pr2 = load_badf(p1)
        save_badf(p2, f2, pr2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_loaded_values_match_f32(self, tmp_path):
        feats, protos = _small_dataset()
        path = tmp_path / "x.badf"
        save_badf(path, feats, protos)
        f2, pr2 = load_badf(path)
        np.testing.assert_array_equal(f2.features, feats.features.astype(np.float32))
        np.testing.assert_array_equal(f2.labels, feats.labels)
        np.testing.assert_array_equal(pr2.matrix, protos.matrix.astype(np.float32))

    def test_normalize_on_load_when_flag_unset(self, tmp_path):
        feats = FeatureSet(np.array([[3.0, 4.0], [0.0, 2.0]]), np.array([0, 1]))
        protos = Prototypes(np.array([[2.0, 0.0], [0.0, 5.0]]))
        path = tmp_path / "raw.badf"
        save_badf(path, feats, protos, normalized=False)
        f2, pr2 = load_badf(path)
        assert f2.rows_unit_norm() and pr2.rows_unit_norm()
        f3, _ = load_badf(path, normalize=False)
        assert not f3.rows_unit_norm()

    def test_truncated_by_one_byte(self, tmp_path):
        feats, protos = _small_dataset()
        path = tmp_path / "t.badf"
        save_badf(path, feats, protos)
        blob = path.read_bytes()
        path.write_bytes(blob[:-1])
        with pytest.raises(FormatError, match="truncated"):
            read_badf(path)

    def test_bad_magic(self, tmp_path):
        feats, protos = _small_dataset()
        path = tmp_path / "m.badf"
        save_badf(path, feats, protos)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="magic"):
            read_badf(path)

    def test_bad_version(self, tmp_path):
        feats, protos = _small_dataset()
        path = tmp_path / "v.badf"
        save_badf(path, feats, protos)
        blob = bytearray(path.read_bytes())
        struct.pack_into("<I", blob, 4, 9)
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version"):
            read_badf(path)

    def test_label_out_of_range(self, tmp_path):
        feats, protos = _small_dataset()
        path = tmp_path / "l.badf"
        save_badf(path, feats, protos)
        blob = bytearray(path.read_bytes())
        # Labels start right after the header and the feature block.
        offset = 24 + feats.n * feats.dim * 4
        struct.pack_into("<I", blob, offset, 99)
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="label"):
            read_badf(path)

    def test_golden_hand_built_stream(self, tmp_path):
        # N=2, D=3, C=2 with f32-exact values.
        feats32 = [[0.5, -1.25, 2.0], [1.0, 0.0, -0.5]]
        protos32 = [[1.0, 2.0, 3.0], [-1.0, 0.25, 0.75]]
        blob = b"BADF"
        blob += struct.pack("<I", 1)  # version
        blob += struct.pack("<III", 2, 3, 2)  # N, D, C
        blob += struct.pack("<B3x", FLAG_NORMALIZED)
        for row in feats32:
            for v in row:
                blob += struct.pack("<f", v)
        blob += struct.pack("<II", 1, 0)  # labels
        for row in protos32:
            for v in row:
                blob += struct.pack("<f", v)
        path = tmp_path / "golden.badf"
        path.write_bytes(blob)
        raw = read_badf(path)
        np.testing.assert_array_equal(raw.features, np.array(feats32))
        np.testing.assert_array_equal(raw.labels, [1, 0])
        np.testing.assert_array_equal(raw.prototypes, np.array(protos32))
        assert raw.normalized
        assert raw.sections == {}

    def test_magic_constant(self):
        assert MAGIC == b"BADF"


class TestSections:
    def test_posterior_round_trip(self, tmp_path):
        feats, protos = _small_dataset()
        q = VariationalPosterior(
            protos.matrix.astype(np.float32).astype(np.float64),
            np.log(np.full(3, 0.25)).astype(np.float32).astype(np.float64),
        )
        path = tmp_path / "ck.badf"
        save_badf(path, feats, protos, sections={SECTION_POSTERIOR: encode_posterior(q)})
        raw = read_badf(path)
        q2 = decode_posterior(raw.sections[SECTION_POSTERIOR], 3, 4)
        np.testing.assert_array_equal(q2.mean, q.mean)
        np.testing.assert_array_equal(q2.log_std, q.log_std)

    def test_weights_round_trip(self, tmp_path):
        feats, protos = _small_dataset()
        w = protos.matrix.astype(np.float32).astype(np.float64)
        path = tmp_path / "w.badf"
        save_badf(path, feats, protos, sections={SECTION_WEIGHTS: encode_weights(w)})
        raw = read_badf(path)
        np.testing.assert_array_equal(decode_weights(raw.sections[SECTION_WEIGHTS], 3, 4), w)

    def test_unknown_section_preserved(self, tmp_path):
        feats, protos = _small_dataset()
        path = tmp_path / "u.badf"
        save_badf(path, feats, protos, sections={"XTRA1": b"\x01\x02\x03"})
        assert read_badf(path).sections["XTRA1"] == b"\x01\x02\x03"

    def test_truncated_section(self, tmp_path):
        feats, protos = _small_dataset()
        path = tmp_path / "ts.badf"
        save_badf(path, feats, protos, sections={"XTRA1": b"\x00" * 16})
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(FormatError, match="truncated section"):
            read_badf(path)

    def test_wrong_posterior_length(self):
        with pytest.raises(FormatError):
            decode_posterior(b"\x00" * 10, 3, 4)


class TestFewShot:
    def test_deterministic(self):
        labels = np.repeat(np.arange(4), 25)
        a = few_shot_sample(labels, 5, seed=11)
        b = few_shot_sample(labels, 5, seed=11)
        np.testing.assert_array_equal(a.support_indices, b.support_indices)
        np.testing.assert_array_equal(a.query_indices, b.query_indices)

    def test_partition_and_balance(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 5, size=200)
        split = few_shot_sample(labels, 3, seed=0)
        sup = set(split.support_indices.tolist())
        qry = set(split.query_indices.tolist())
        assert sup.isdisjoint(qry)
        assert sup | qry == set(range(200))
        for c in range(5):
            assert (labels[split.support_indices] == c).sum() == 3

    def test_insufficient_class_named(self):
        labels = np.array([0, 0, 0, 1])
        with pytest.raises(DataError, match="class 1"):
            few_shot_sample(labels, 2, seed=0)

    def test_singletons_leave_empty_query(self):
        labels = np.array([0, 1, 2])
        split = few_shot_sample(labels, 1, seed=0)
        assert sorted(split.support_indices.tolist()) == [0, 1, 2]
        assert split.query_indices.size == 0

    def test_boundary_k_equals_class_count(self):
        labels = np.array([0] * 4 + [1] * 7)
        split = few_shot_sample(labels, 4, seed=2)
        assert (labels[split.query_indices] == 0).sum() == 0
        assert (labels[split.query_indices] == 1).sum() == 3


class TestSynth:
    def test_noiseless_zero_shot_is_perfect(self):
        feats, protos = synth_generate(4, 8, 10, 0.0, 0.0, seed=0)
        p = predict_point(protos.matrix, feats, 30.0)
        assert (p.argmax(axis=1) == feats.labels).all()

    def test_large_spread_is_chance_level(self):
        feats, protos = synth_generate(5, 16, 1000, 10.0, 0.0, seed=0)
        p = predict_point(protos.matrix, feats, 30.0)
        acc = float((p.argmax(axis=1) == feats.labels).mean())
        assert abs(acc - 0.2) <= 0.1

    def test_unit_norm_rows(self):
        feats, protos = synth_generate(3, 8, 20, 0.4, 0.3, seed=1)
        assert feats.rows_unit_norm() and protos.rows_unit_norm()

    def test_seed_reproducibility_bytes(self, tmp_path):
        p1, p2 = tmp_path / "s1.badf", tmp_path / "s2.badf"
        for p in (p1, p2):
            feats, protos = synth_generate(3, 8, 20, 0.4, 0.3, seed=42)
            save_badf(p, feats, protos)
        assert p1.read_bytes() == p2.read_bytes()

    def test_degenerate_class_count(self):
        with pytest.raises(ParamError):
            synth_generate(1, 4, 10, 0.1, 0.1, seed=0)
