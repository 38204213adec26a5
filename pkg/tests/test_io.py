"""Round-trip and byte-layout tests for the on-disk formats."""
import csv
import json
import struct

import numpy as np
import pytest

from fddkey.features import Dataset, MinMaxNormalizer
from fddkey.io import (
    SWEEP_METRIC_COLUMNS,
    read_channel_records,
    read_checkpoint,
    read_feature_dataset,
    read_keys_text,
    read_normalizers,
    read_trace_jsonl,
    write_channel_records,
    write_checkpoint,
    write_feature_csv,
    write_feature_dataset,
    write_keys_text,
    write_normalizers,
    write_sweep_csv,
    write_trace_jsonl,
)
from fddkey.network import ArchSpec, NetworkParams, init_params


def random_channels(n=7, n_sub=4, seed=0):
    rng = np.random.default_rng(seed)
    ids = np.arange(100, 100 + n, dtype=np.uint64)
    h1 = rng.normal(size=(n, n_sub)) + 1j * rng.normal(size=(n, n_sub))
    h2 = rng.normal(size=(n, n_sub)) + 1j * rng.normal(size=(n, n_sub))
    return ids, h1, h2


class TestChannelRecords:
    def test_round_trip_to_f32_precision(self, tmp_path):
        ids, h1, h2 = random_channels()
        path = tmp_path / "chan.fddc"
        write_channel_records(path, ids, h1, h2)
        rid, r1, r2 = read_channel_records(path)
        np.testing.assert_array_equal(rid, ids)
        np.testing.assert_allclose(r1, h1, rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose(r2, h2, rtol=1e-6, atol=1e-6)
        assert r1.dtype == np.complex128

    def test_exact_byte_layout(self, tmp_path):
        # One record, two subcarriers: header then id then interleaved re/im.
        path = tmp_path / "one.fddc"
        write_channel_records(path, [42], np.array([[1 + 2j, 3 + 4j]]),
                              np.array([[5 + 6j, 7 + 8j]]))
        expect = (struct.pack("<4sIIQ", b"FDDC", 1, 2, 1)
                  + struct.pack("<Q", 42)
                  + struct.pack("<4f", 1, 2, 3, 4)
                  + struct.pack("<4f", 5, 6, 7, 8))
        assert path.read_bytes() == expect

    def test_bad_magic_names_path(self, tmp_path):
        path = tmp_path / "junk.fddc"
        path.write_bytes(struct.pack("<4sIIQ", b"NOPE", 1, 2, 0))
        with pytest.raises(ValueError, match="junk.fddc.*FDDC"):
            read_channel_records(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "future.fddc"
        path.write_bytes(struct.pack("<4sIIQ", b"FDDC", 99, 2, 0))
        with pytest.raises(ValueError, match="version 99"):
            read_channel_records(path)

    def test_truncated_body(self, tmp_path):
        ids, h1, h2 = random_channels(n=3)
        path = tmp_path / "cut.fddc"
        write_channel_records(path, ids, h1, h2)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(ValueError, match="expected 3 records"):
            read_channel_records(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_channel_records(tmp_path / "absent.fddc")

    def test_shape_mismatch_rejected(self, tmp_path):
        ids, h1, h2 = random_channels()
        with pytest.raises(ValueError):
            write_channel_records(tmp_path / "bad.fddc", ids, h1, h2[:-1])


class TestFeatureDataset:
    def make_dataset(self, n=5, dim=8, seed=1):
        rng = np.random.default_rng(seed)
        return Dataset(band1=rng.normal(size=(n, dim)),
                       band2=rng.normal(size=(n, dim)),
                       position_ids=np.arange(n, dtype=np.uint64),
                       provenance="clean")

    def test_round_trip(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "feat.fddf"
        write_feature_dataset(path, ds)
        back = read_feature_dataset(path, provenance="reloaded")
        np.testing.assert_array_equal(back.position_ids, ds.position_ids)
        np.testing.assert_allclose(back.band1, ds.band1, rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose(back.band2, ds.band2, rtol=1e-6, atol=1e-6)
        assert back.provenance == "reloaded"

    def test_magic_differs_from_channel_file(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "feat.fddf"
        write_feature_dataset(path, ds)
        assert path.read_bytes()[:4] == b"FDDF"
        with pytest.raises(ValueError, match="FDDC"):
            read_channel_records(path)

    def test_odd_width_rejected(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = Dataset(band1=rng.normal(size=(4, 3)), band2=rng.normal(size=(4, 3)),
                     position_ids=np.arange(4, dtype=np.uint64))
        with pytest.raises(ValueError, match="even"):
            write_feature_dataset(tmp_path / "odd.fddf", ds)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        arch = ArchSpec(layer_sizes=(6, 5, 4, 6), hidden_activation="tanh",
                        output_activation="tanh")
        params = init_params(arch, np.random.default_rng(2))
        path = tmp_path / "model.fddn"
        write_checkpoint(path, params)
        back = read_checkpoint(path)
        assert back.arch == arch
        for w, bw in zip(params.weights, back.weights):
            np.testing.assert_array_equal(w, bw)
        for b, bb in zip(params.biases, back.biases):
            np.testing.assert_array_equal(b, bb)

    def test_exact_byte_layout(self, tmp_path):
        arch = ArchSpec(layer_sizes=(2, 3, 2))
        params = NetworkParams(
            weights=[np.arange(1.0, 7.0).reshape(3, 2),
                     np.arange(10.0, 16.0).reshape(2, 3)],
            biases=[np.array([7.0, 8.0, 9.0]), np.array([16.0, 17.0])],
            arch=arch)
        path = tmp_path / "tiny.fddn"
        write_checkpoint(path, params)
        expect = (struct.pack("<4sII", b"FDDN", 1, 3)
                  + struct.pack("<3I", 2, 3, 2)
                  + struct.pack("<II", 0, 2)  # relu hidden, sigmoid output
                  + struct.pack("<6d", 1, 2, 3, 4, 5, 6)
                  + struct.pack("<3d", 7, 8, 9)
                  + struct.pack("<6d", 10, 11, 12, 13, 14, 15)
                  + struct.pack("<2d", 16, 17))
        assert path.read_bytes() == expect

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.fddn"
        path.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(ValueError, match="FDDN"):
            read_checkpoint(path)

    def test_trailing_bytes_detected(self, tmp_path):
        arch = ArchSpec(layer_sizes=(2, 3, 2))
        params = init_params(arch, np.random.default_rng(0))
        path = tmp_path / "pad.fddn"
        write_checkpoint(path, params)
        path.write_bytes(path.read_bytes() + b"\x00" * 4)
        with pytest.raises(ValueError, match="trailing"):
            read_checkpoint(path)


class TestNormalizerSidecar:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        n1 = MinMaxNormalizer(band="band1").fit(rng.normal(size=(10, 4)))
        n2 = MinMaxNormalizer(band="band2").fit(rng.normal(size=(10, 4)))
        path = tmp_path / "normalizers.json"
        write_normalizers(path, n1, n2)
        b1, b2 = read_normalizers(path)
        np.testing.assert_array_equal(b1.data_min_, n1.data_min_)
        np.testing.assert_array_equal(b2.data_max_, n2.data_max_)
        assert b1.band == "band1" and b2.band == "band2"

    def test_missing_entry(self, tmp_path):
        path = tmp_path / "half.json"
        path.write_text(json.dumps({"band1": {"band": "band1",
                                              "data_min": [0.0],
                                              "data_max": [1.0]}}))
        with pytest.raises(ValueError, match="band2"):
            read_normalizers(path)


class TestTextFormats:
    def test_feature_csv_header_and_values(self, tmp_path):
        rng = np.random.default_rng(4)
        ds = Dataset(band1=rng.normal(size=(3, 4)), band2=rng.normal(size=(3, 4)),
                     position_ids=np.arange(3, dtype=np.uint64))
        path = tmp_path / "pairs.csv"
        write_feature_csv(path, ds)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [f"x1_{i}" for i in range(4)] + [f"x2_{i}" for i in range(4)]
        assert len(rows) == 4
        parsed = np.array([[float(v) for v in row] for row in rows[1:]])
        np.testing.assert_allclose(parsed[:, :4], ds.band1, rtol=1e-15)
        np.testing.assert_allclose(parsed[:, 4:], ds.band2, rtol=1e-15)

    def test_trace_jsonl_round_trip(self, tmp_path):
        trace = [{"epoch": 0, "train_loss": 0.5, "eval_nmse": 0.4, "wall_ms": 1.0},
                 {"epoch": 1, "train_loss": 0.3, "eval_nmse": 0.2, "wall_ms": 0.9}]
        path = tmp_path / "trace.jsonl"
        write_trace_jsonl(path, trace)
        assert read_trace_jsonl(path) == trace

    def test_keys_round_trip(self, tmp_path):
        keys = [np.array([0, 1, 1, 0], dtype=np.uint8),
                np.array([1, 0], dtype=np.uint8)]
        path = tmp_path / "keys.txt"
        write_keys_text(path, keys)
        assert path.read_text() == "0110\n10\n"
        back = read_keys_text(path)
        assert len(back) == 2
        np.testing.assert_array_equal(back[0], keys[0])
        np.testing.assert_array_equal(back[1], keys[1])

    def test_keys_reject_non_binary(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0110\n01a1\n")
        with pytest.raises(ValueError, match="bad.txt:2"):
            read_keys_text(path)

    def test_sweep_csv_column_order(self, tmp_path):
        rows = [{"snr_db": 0.0, "ker": 0.2, "kgr": 1.5, "nmse": 0.3,
                 "nvd_ab_pre": 0.4, "nvd_ab_post": 0.1, "nvd_eb": 0.5,
                 "n_sessions": 10}]
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, "snr_db", rows)
        with open(path, newline="") as fh:
            parsed = list(csv.reader(fh))
        assert parsed[0] == ["snr_db"] + list(SWEEP_METRIC_COLUMNS)
        assert parsed[1][0] == "0.0"
        assert len(parsed) == 2
