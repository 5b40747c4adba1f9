"""Bit-exact file formats and run configuration.

Three formats total: EMB1 binary containers for dense arrays (32-bit floats on
disk, promoted to 64-bit in memory), CSV for labels/scores, and JSON for
configuration and reports. Checkpoints pack named tensors as a JSON manifest
followed by concatenated EMB1 blocks.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import as_matrix

EMB1_MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")
CHECKPOINT_MAGIC = b"CKP1"


class DataFormatError(ValueError):
    """Base class for malformed input files."""


class BadMagicError(DataFormatError):
    pass


class TruncatedPayloadError(DataFormatError):
    pass


class SizeOverflowError(DataFormatError):
    pass


class CsvFormatError(DataFormatError):
    pass


MAX_EMB1_ELEMENTS = 1 << 31  # 8 GiB of float32 payload; refuse beyond


def write_emb1_bytes(matrix) -> bytes:
    """Serialize a matrix as magic + uint32 rows/cols + little-endian float32
    row-major payload."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64))
    if m.ndim != 2:
        raise ValueError("EMB1 stores 2-D matrices")
    rows, cols = m.shape
    header = _HEADER.pack(EMB1_MAGIC, rows, cols)
    payload = m.astype("<f4").tobytes(order="C")
    return header + payload


def read_emb1_bytes(data: bytes) -> np.ndarray:
    """Parse EMB1 bytes into a float64 matrix."""
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError("EMB1 data shorter than its header")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != EMB1_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {EMB1_MAGIC!r}")
    n_elements = rows * cols
    if n_elements > MAX_EMB1_ELEMENTS:
        raise SizeOverflowError(f"declared size {rows}x{cols} exceeds the element limit")
    expected = _HEADER.size + 4 * n_elements
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"EMB1 payload truncated: need {expected} bytes, have {len(data)}"
        )
    if len(data) > expected:
        raise DataFormatError(f"EMB1 trailing bytes: expected {expected}, have {len(data)}")
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size, count=n_elements)
    return flat.astype(np.float64).reshape(rows, cols)


def write_emb1(path, matrix) -> None:
    Path(path).write_bytes(write_emb1_bytes(matrix))


def read_emb1(path) -> np.ndarray:
    return read_emb1_bytes(Path(path).read_bytes())


def _format_score(x: float) -> str:
    return format(float(x), ".9g")


def write_labels_csv(path, ids, class_names, labels) -> None:
    """Binary label table: header ``id,<class...>``, one 0/1 row per id."""
    y = as_matrix(labels, "labels")
    _write_table(path, ids, class_names, y, lambda v: str(int(v)))


def write_scores_csv(path, ids, class_names, scores) -> None:
    """Real-valued score table at 9 significant digits."""
    s = as_matrix(scores, "scores")
    _write_table(path, ids, class_names, s, _format_score)


def _write_table(path, ids, class_names, matrix, cell) -> None:
    ids = [str(i) for i in ids]
    class_names = [str(c) for c in class_names]
    if len(ids) != matrix.shape[0]:
        raise ValueError("one id per row required")
    if len(class_names) != matrix.shape[1]:
        raise ValueError("one class name per column required")
    lines = ["id," + ",".join(class_names)]
    for row_id, row in zip(ids, matrix):
        lines.append(row_id + "," + ",".join(cell(v) for v in row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def _read_table(path, parse_cell):
    text = Path(path).read_bytes().decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CsvFormatError("empty CSV")
    header = lines[0].split(",")
    if len(header) < 2 or header[0] != "id":
        raise CsvFormatError("header must be 'id' followed by class names")
    class_names = header[1:]
    ids: list[str] = []
    seen: set[str] = set()
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise CsvFormatError(
                f"ragged row at line {lineno}: {len(cells)} cells, expected {len(header)}"
            )
        row_id = cells[0]
        if row_id in seen:
            raise CsvFormatError(f"duplicate id {row_id!r} at line {lineno}")
        seen.add(row_id)
        ids.append(row_id)
        rows.append([parse_cell(c, lineno) for c in cells[1:]])
    matrix = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(class_names)))
    return ids, class_names, matrix


def _parse_binary(cell: str, lineno: int) -> float:
    if cell == "0":
        return 0.0
    if cell == "1":
        return 1.0
    raise CsvFormatError(f"non-binary label {cell!r} at line {lineno}")


def _parse_real(cell: str, lineno: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise CsvFormatError(f"unparseable number {cell!r} at line {lineno}") from None
    if not np.isfinite(value):
        raise CsvFormatError(f"non-finite value {cell!r} at line {lineno}")
    return value


def read_labels_csv(path):
    """Returns ``(ids, class_names, labels)`` with labels strictly 0/1."""
    return _read_table(path, _parse_binary)


def read_scores_csv(path):
    """Returns ``(ids, class_names, scores)`` with real-valued scores."""
    return _read_table(path, _parse_real)


def save_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    """Named-tensor container: magic, uint32 manifest length, JSON manifest
    listing tensor names/shapes, then one EMB1 block per tensor in order."""
    names = list(tensors)
    blocks = []
    manifest = []
    for name in names:
        m = np.asarray(tensors[name], dtype=np.float64)
        if m.ndim != 2:
            raise ValueError(f"tensor {name!r} must be 2-D for checkpointing")
        manifest.append({"name": name, "rows": m.shape[0], "cols": m.shape[1]})
        blocks.append(write_emb1_bytes(m))
    header = json.dumps({"tensors": manifest}, sort_keys=True).encode("utf-8")
    out = CHECKPOINT_MAGIC + struct.pack("<I", len(header)) + header + b"".join(blocks)
    Path(path).write_bytes(out)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise TruncatedPayloadError("checkpoint shorter than its header")
    if data[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    (header_len,) = struct.unpack_from("<I", data, 4)
    if len(data) < 8 + header_len:
        raise TruncatedPayloadError("checkpoint manifest truncated")
    try:
        manifest = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"unreadable checkpoint manifest: {exc}") from None
    offset = 8 + header_len
    tensors: dict[str, np.ndarray] = {}
    entries = manifest.get("tensors", []) if isinstance(manifest, dict) else None
    if not isinstance(entries, list):
        raise DataFormatError("checkpoint manifest must hold a 'tensors' list")
    for entry in entries:
        if not isinstance(entry, dict) or not {"name", "rows", "cols"} <= set(entry):
            raise DataFormatError("checkpoint manifest entries need name/rows/cols")
        size = _HEADER.size + 4 * int(entry["rows"]) * int(entry["cols"])
        block = data[offset : offset + size]
        tensors[entry["name"]] = read_emb1_bytes(block)
        offset += size
    if offset != len(data):
        raise DataFormatError("checkpoint trailing bytes after the last tensor")
    return tensors


def write_trace_csv(path, trace) -> None:
    """Training trace: epoch, lr, loss_total, loss_con, loss_asl, val_map."""
    lines = ["epoch,lr,loss_total,loss_con,loss_asl,val_map"]
    for rec in trace:
        lines.append(
            ",".join(
                [
                    str(rec.epoch),
                    format(rec.lr, ".12g"),
                    format(rec.loss_total, ".12g"),
                    format(rec.loss_con, ".12g"),
                    format(rec.loss_asl, ".12g"),
                    format(rec.val_map, ".12g"),
                ]
            )
        )
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


@dataclass(frozen=True)
class RunConfig:
    """Flat view of the JSON run configuration.

    Sections and keys are fixed; unknown keys are rejected so typos fail loud.
    """

    gamma_pos: float = 0.0
    gamma_neg: float = 4.0
    alpha: float = 1.5
    lr: float = 1e-6
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    t_max: int = 7
    lr_min: float = 0.0
    ema_decay: float = 0.999
    ensemble_step: float = 0.05
    ensemble_objective: str = "map"
    zeroshot_temperature: float = 0.07
    zeroshot_mode: str = "prob"
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "asl": {"gamma_pos": self.gamma_pos, "gamma_neg": self.gamma_neg},
            "alpha": self.alpha,
            "optimizer": {
                "lr": self.lr,
                "weight_decay": self.weight_decay,
                "betas": list(self.betas),
                "eps": self.eps,
            },
            "schedule": {"t_max": self.t_max, "lr_min": self.lr_min},
            "ema": {"decay": self.ema_decay},
            "ensemble": {"step": self.ensemble_step, "objective": self.ensemble_objective},
            "zeroshot": {
                "temperature": self.zeroshot_temperature,
                "mode": self.zeroshot_mode,
            },
            "seed": self.seed,
        }


_RUNCONFIG_SECTIONS = {
    "asl": {"gamma_pos", "gamma_neg"},
    "optimizer": {"lr", "weight_decay", "betas", "eps"},
    "schedule": {"t_max", "lr_min"},
    "ema": {"decay"},
    "ensemble": {"step", "objective"},
    "zeroshot": {"temperature", "mode"},
}


def parse_run_config(doc: dict) -> RunConfig:
    unknown = set(doc) - (set(_RUNCONFIG_SECTIONS) | {"alpha", "seed"})
    if unknown:
        raise DataFormatError(f"unknown config keys: {sorted(unknown)}")
    for section, allowed in _RUNCONFIG_SECTIONS.items():
        body = doc.get(section, {})
        if not isinstance(body, dict):
            raise DataFormatError(f"config section {section!r} must be an object")
        extra = set(body) - allowed
        if extra:
            raise DataFormatError(f"unknown keys in config section {section!r}: {sorted(extra)}")
    defaults = RunConfig()
    asl = doc.get("asl", {})
    opt = doc.get("optimizer", {})
    schedule = doc.get("schedule", {})
    ema = doc.get("ema", {})
    ens = doc.get("ensemble", {})
    zs = doc.get("zeroshot", {})
    return RunConfig(
        gamma_pos=float(asl.get("gamma_pos", defaults.gamma_pos)),
        gamma_neg=float(asl.get("gamma_neg", defaults.gamma_neg)),
        alpha=float(doc.get("alpha", defaults.alpha)),
        lr=float(opt.get("lr", defaults.lr)),
        weight_decay=float(opt.get("weight_decay", defaults.weight_decay)),
        betas=tuple(float(b) for b in opt.get("betas", defaults.betas)),
        eps=float(opt.get("eps", defaults.eps)),
        t_max=int(schedule.get("t_max", defaults.t_max)),
        lr_min=float(schedule.get("lr_min", defaults.lr_min)),
        ema_decay=float(ema.get("decay", defaults.ema_decay)),
        ensemble_step=float(ens.get("step", defaults.ensemble_step)),
        ensemble_objective=str(ens.get("objective", defaults.ensemble_objective)),
        zeroshot_temperature=float(zs.get("temperature", defaults.zeroshot_temperature)),
        zeroshot_mode=str(zs.get("mode", defaults.zeroshot_mode)),
        seed=int(doc.get("seed", defaults.seed)),
    )


def load_run_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"unparseable config JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise DataFormatError("config JSON must be an object")
    return parse_run_config(doc)


def dump_json(path, doc) -> None:
    """Canonical JSON writer (sorted keys, trailing newline) so identical
    inputs yield byte-identical files."""
    payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    Path(path).write_bytes(payload.encode("utf-8"))


def load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"unparseable JSON in {path}: {exc}") from None
