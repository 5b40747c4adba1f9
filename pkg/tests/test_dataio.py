import numpy as np
import pytest

from cxrkit.dataio import (
    BadMagicError,
    CsvFormatError,
    DataFormatError,
    RunConfig,
    SizeOverflowError,
    TruncatedPayloadError,
    load_checkpoint,
    load_run_config,
    parse_run_config,
    read_emb1,
    read_emb1_bytes,
    read_labels_csv,
    read_scores_csv,
    save_checkpoint,
    write_emb1,
    write_emb1_bytes,
    write_labels_csv,
    write_scores_csv,
    write_trace_csv,
)
from cxrkit.dualbranch import EpochRecord
from cxrkit.numerics import SeededRng


class TestEmb1:
    def test_round_trip_bytes_exact(self):
        rng = SeededRng(1)
        for _ in range(100):
            rows, cols = rng.below(6), rng.below(6)
            matrix = rng.normal((rows, cols)) if rows * cols else np.zeros((rows, cols))
            blob = write_emb1_bytes(matrix)
            back = read_emb1_bytes(blob)
            assert write_emb1_bytes(back) == blob

    def test_empty_matrix_is_header_only(self):
        blob = write_emb1_bytes(np.zeros((0, 0)))
        assert len(blob) == 12
        assert read_emb1_bytes(blob).shape == (0, 0)

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "x.emb1"
        m = SeededRng(2).normal((3, 4))
        write_emb1(path, m)
        back = read_emb1(path)
        # float32 on disk, float64 in memory
        np.testing.assert_array_equal(back, m.astype(np.float32).astype(np.float64))

    def test_bad_magic(self):
        blob = b"NOPE" + write_emb1_bytes(np.ones((1, 1)))[4:]
        with pytest.raises(BadMagicError, match="bad magic"):
            read_emb1_bytes(blob)

    def test_truncated_payload(self):
        blob = write_emb1_bytes(np.ones((2, 2)))
        with pytest.raises(TruncatedPayloadError):
            read_emb1_bytes(blob[:-3])

    def test_truncated_header(self):
        with pytest.raises(TruncatedPayloadError):
            read_emb1_bytes(b"EMB1\x01")

    def test_size_overflow(self):
        import struct

        blob = struct.pack("<4sII", b"EMB1", 2**31 - 1, 2**31 - 1)
        with pytest.raises(SizeOverflowError):
            read_emb1_bytes(blob)

    def test_trailing_bytes_rejected(self):
        blob = write_emb1_bytes(np.ones((1, 1))) + b"x"
        with pytest.raises(DataFormatError, match="trailing"):
            read_emb1_bytes(blob)


class TestLabelCsv:
    def test_round_trip_identity(self, tmp_path):
        rng = SeededRng(3)
        for trial in range(20):
            n, k = 1 + rng.below(8), 1 + rng.below(5)
            labels = (rng.random((n, k)) < 0.5).astype(float)
            ids = [f"s{i}" for i in range(n)]
            names = [f"c{j}" for j in range(k)]
            path = tmp_path / f"labels{trial}.csv"
            write_labels_csv(path, ids, names, labels)
            back_ids, back_names, back = read_labels_csv(path)
            assert back_ids == ids and back_names == names
            np.testing.assert_array_equal(back, labels)

    def test_ragged_row_names_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,a,b\nr0,1,0\nr1,1\n")
        with pytest.raises(CsvFormatError, match="line 3"):
            read_labels_csv(path)

    def test_non_binary_label_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,a\nr0,0.5\n")
        with pytest.raises(CsvFormatError, match="non-binary"):
            read_labels_csv(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,a\nr0,1\nr0,0\n")
        with pytest.raises(CsvFormatError, match="duplicate id"):
            read_labels_csv(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("sample,a\nr0,1\n")
        with pytest.raises(CsvFormatError, match="header"):
            read_labels_csv(path)


class TestScoresCsv:
    def test_round_trip_within_tolerance(self, tmp_path):
        rng = SeededRng(4)
        for trial in range(100):
            n, k = 1 + rng.below(6), 1 + rng.below(4)
            scores = 10.0 * rng.normal((n, k))
            path = tmp_path / f"scores{trial}.csv"
            write_scores_csv(path, [f"s{i}" for i in range(n)],
                             [f"c{j}" for j in range(k)], scores)
            _, _, back = read_scores_csv(path)
            np.testing.assert_allclose(back, scores, rtol=1e-8, atol=1e-12)

    def test_unparseable_number_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,a\nr0,zebra\n")
        with pytest.raises(CsvFormatError, match="line 2"):
            read_scores_csv(path)

    def test_lf_line_endings(self, tmp_path):
        path = tmp_path / "scores.csv"
        write_scores_csv(path, ["a"], ["c"], np.array([[1.5]]))
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = SeededRng(5)
        tensors = {
            "w_img": rng.normal((4, 3)),
            "w_txt": rng.normal((5, 3)),
            "log_temperature": np.array([[-2.65926]]),
        }
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, tensors)
        back = load_checkpoint(path)
        assert list(back) == list(tensors)
        for name in tensors:
            f32 = tensors[name].astype(np.float32).astype(np.float64)
            np.testing.assert_array_equal(back[name], f32)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, {"w": np.ones((1, 1))})
        data = bytearray(path.read_bytes())
        data[:4] = b"WOOF"
        path.write_bytes(bytes(data))
        with pytest.raises(BadMagicError):
            load_checkpoint(path)

    def test_truncation_detected(self, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, {"w": np.ones((2, 2))})
        blob = path.read_bytes()
        path.write_bytes(blob[:-2])
        with pytest.raises(DataFormatError):
            load_checkpoint(path)


class TestTraceCsv:
    def test_schema_and_determinism(self, tmp_path):
        trace = [
            EpochRecord(1, 0.01, 1.5, 1.0, 1.0 / 3.0, 0.25),
            EpochRecord(2, 0.005, 1.2, 0.9, 0.2, 0.30),
        ]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trace_csv(p1, trace)
        write_trace_csv(p2, trace)
        assert p1.read_bytes() == p2.read_bytes()
        lines = p1.read_text().splitlines()
        assert lines[0] == "epoch,lr,loss_total,loss_con,loss_asl,val_map"
        assert lines[1].startswith("1,0.01,1.5,1,0.333333333333,")


class TestRunConfig:
    def test_defaults_round_trip(self, tmp_path):
        cfg = RunConfig()
        path = tmp_path / "cfg.json"
        import json

        path.write_text(json.dumps(cfg.to_dict()))
        back = load_run_config(path)
        assert back == cfg

    def test_partial_document_uses_defaults(self):
        cfg = parse_run_config({"alpha": 0.0, "optimizer": {"lr": 0.002}})
        assert cfg.alpha == 0.0
        assert cfg.lr == 0.002
        assert cfg.gamma_neg == 4.0

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(DataFormatError, match="unknown config keys"):
            parse_run_config({"alhpa": 1.0})

    def test_unknown_section_key_rejected(self):
        with pytest.raises(DataFormatError, match="optimizer"):
            parse_run_config({"optimizer": {"lr": 0.1, "momentum": 0.9}})

    def test_unparseable_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{nope")
        with pytest.raises(DataFormatError):
            load_run_config(path)
