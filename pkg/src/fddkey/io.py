"""File formats for datasets, checkpoints, and experiment output.

Binary layouts are explicit little-endian and versioned by a 4-byte magic
plus a u32 version:

  FDDC  raw dual-band channel records. Header {magic, version u32, L u32,
        count u64}; each record is [position_id u64, 2L f32 band-1
        interleaved re/im, 2L f32 band-2 interleaved re/im].
  FDDF  realized feature pairs. Same header; each record is
        [position_id u64, 2L f32 band-1 features, 2L f32 band-2 features].
  FDDN  network checkpoint. Header {magic, version u32, n_sizes u32,
        layer sizes u32 each, hidden activation u32, output activation u32};
        then per layer the weight matrix as f64 row-major (out, in) followed
        by the f64 bias vector.

Dataset payloads are 32-bit on disk; checkpoints keep full 64-bit parameters.
Normalizer extrema travel in a JSON sidecar so a checkpoint can be applied to
fresh measurements. Text formats (CSV, JSON lines, key files) are thin
wrappers over the stdlib csv and json modules.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .features import Dataset, MinMaxNormalizer
from .network import ArchSpec, NetworkParams

FORMAT_VERSION = 1

_ACT_CODES = {"relu": 0, "tanh": 1, "sigmoid": 2}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}

_HEADER = struct.Struct("<4sIIQ")


def _record_dtype(n_sub: int) -> np.dtype:
    return np.dtype([("pos", "<u8"), ("b1", "<f4", 2 * n_sub),
                     ("b2", "<f4", 2 * n_sub)])


def _read_header(raw: bytes, magic: bytes, path) -> tuple[int, int]:
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    got, version, n_sub, count = _HEADER.unpack_from(raw)
    if got != magic:
        raise ValueError(
            f"{path}: bad magic {got!r}, expected {magic.decode()} file")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    return n_sub, count


def _read_records(path, magic: bytes):
    raw = Path(path).read_bytes()
    n_sub, count = _read_header(raw, magic, path)
    rec = _record_dtype(n_sub)
    body = raw[_HEADER.size:]
    if len(body) != count * rec.itemsize:
        raise ValueError(
            f"{path}: expected {count} records ({count * rec.itemsize} bytes), "
            f"found {len(body)} bytes")
    data = np.frombuffer(body, dtype=rec)
    return n_sub, data


def _write_records(path, magic: bytes, ids, b1: np.ndarray, b2: np.ndarray) -> None:
    ids = np.asarray(ids, dtype=np.uint64)
    count = ids.size
    if b1.shape != b2.shape or b1.shape[0] != count:
        raise ValueError("ids and both band arrays must agree on record count")
    n_sub = b1.shape[1] // 2
    rec = _record_dtype(n_sub)
    out = np.empty(count, dtype=rec)
    out["pos"] = ids
    out["b1"] = b1.astype("<f4")
    out["b2"] = b2.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, FORMAT_VERSION, n_sub, count))
        fh.write(out.tobytes())


def write_channel_records(path, position_ids, h1, h2) -> None:
    """Store complex per-subcarrier responses for both bands, f32 on disk."""
    h1 = np.asarray(h1)
    h2 = np.asarray(h2)
    if h1.ndim != 2 or h1.shape != h2.shape:
        raise ValueError("channel matrices must be 2-D with matching shapes")
    n_sub = h1.shape[1]

    def interleave(h):
        flat = np.empty((h.shape[0], 2 * n_sub), dtype=np.float64)
        flat[:, 0::2] = h.real
        flat[:, 1::2] = h.imag
        return flat

    _write_records(path, b"FDDC", position_ids, interleave(h1), interleave(h2))


def read_channel_records(path):
    """Load an FDDC file back into (position_ids, h1, h2) complex matrices."""
    _, data = _read_records(path, b"FDDC")

    def deinterleave(flat):
        arr = np.asarray(flat, dtype=np.float64)
        return arr[:, 0::2] + 1j * arr[:, 1::2]

    return (data["pos"].copy(), deinterleave(data["b1"]),
            deinterleave(data["b2"]))


def write_feature_dataset(path, dataset: Dataset) -> None:
    """Store an aligned feature-pair dataset as an FDDF file."""
    if dataset.n_features % 2 != 0:
        raise ValueError("feature dimension must be even (stacked re/im)")
    _write_records(path, b"FDDF", dataset.position_ids, dataset.band1,
                   dataset.band2)


def read_feature_dataset(path, provenance: str = "file") -> Dataset:
    _, data = _read_records(path, b"FDDF")
    return Dataset(band1=np.asarray(data["b1"], dtype=np.float64),
                   band2=np.asarray(data["b2"], dtype=np.float64),
                   position_ids=data["pos"].copy(), provenance=provenance)


def write_checkpoint(path, params: NetworkParams) -> None:
    """Serialize trained parameters with their architecture, f64 on disk."""
    arch = params.arch
    sizes = arch.layer_sizes
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", b"FDDN", FORMAT_VERSION, len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        fh.write(struct.pack("<II", _ACT_CODES[arch.hidden_activation],
                             _ACT_CODES[arch.output_activation]))
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.asarray(b, dtype="<f8").tobytes())


def read_checkpoint(path) -> NetworkParams:
    raw = Path(path).read_bytes()
    head = struct.Struct("<4sII")
    if len(raw) < head.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n_sizes = head.unpack_from(raw)
    if magic != b"FDDN":
        raise ValueError(f"{path}: bad magic {magic!r}, expected FDDN checkpoint")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    offset = head.size
    sizes = struct.unpack_from(f"<{n_sizes}I", raw, offset)
    offset += 4 * n_sizes
    hidden_code, output_code = struct.unpack_from("<II", raw, offset)
    offset += 8
    if hidden_code not in _ACT_NAMES or output_code not in _ACT_NAMES:
        raise ValueError(f"{path}: unknown activation code")
    arch = ArchSpec(layer_sizes=sizes,
                    hidden_activation=_ACT_NAMES[hidden_code],
                    output_activation=_ACT_NAMES[output_code])
    weights, biases = [], []
    for i in range(arch.n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        n_w = fan_in * fan_out
        w = np.frombuffer(raw, dtype="<f8", count=n_w, offset=offset)
        offset += 8 * n_w
        b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.reshape(fan_out, fan_in).copy())
        biases.append(b.copy())
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    return NetworkParams(weights=weights, biases=biases, arch=arch)


def write_normalizers(path, norm1: MinMaxNormalizer,
                      norm2: MinMaxNormalizer) -> None:
    """JSON sidecar holding the per-band fitted extrema."""
    payload = {"band1": norm1.to_dict(), "band2": norm2.to_dict()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_normalizers(path):
    payload = json.loads(Path(path).read_text())
    try:
        return (MinMaxNormalizer.from_dict(payload["band1"]),
                MinMaxNormalizer.from_dict(payload["band2"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing normalizer entry {exc}") from exc


def write_feature_csv(path, dataset: Dataset) -> None:
    """Inspection-friendly CSV: one row per pair, both bands side by side."""
    dim = dataset.n_features
    header = [f"x1_{i}" for i in range(dim)] + [f"x2_{i}" for i in range(dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row1, row2 in zip(dataset.band1, dataset.band2):
            writer.writerow([f"{v:.17g}" for v in row1]
                            + [f"{v:.17g}" for v in row2])


def write_trace_jsonl(path, trace) -> None:
    """Per-epoch training trace, one JSON object per line."""
    with open(path, "w") as fh:
        for record in trace:
            fh.write(json.dumps(record) + "\n")


def read_trace_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()
            if line.strip()]


def write_keys_text(path, keys) -> None:
    """One generated key per line as a 0/1 string; accepts arrays or strings."""
    with open(path, "w") as fh:
        for bits in keys:
            if isinstance(bits, str):
                if bits and set(bits) - {"0", "1"}:
                    raise ValueError("key strings must contain only 0 and 1")
                fh.write(bits + "\n")
            else:
                fh.write("".join(str(int(b)) for b in np.asarray(bits)) + "\n")


def read_keys_text(path):
    keys = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if set(line) - {"0", "1"}:
            raise ValueError(f"{path}:{lineno}: keys must be 0/1 strings")
        keys.append(np.array([int(c) for c in line], dtype=np.uint8))
    return keys


SWEEP_METRIC_COLUMNS = ("ker", "kgr", "nmse", "nvd_ab_pre", "nvd_ab_post",
                        "nvd_eb", "n_sessions")


def write_sweep_csv(path, swept_name: str, rows) -> None:
    """Aggregated sweep table: the swept variable first, then the metrics."""
    header = (swept_name,) + SWEEP_METRIC_COLUMNS
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in header})


def write_sessions_jsonl(path, records) -> None:
    """Per-session audit trail, one JSON object per line."""
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
