"""Versioned binary checkpoints for networks, heads, and bank dumps.

Layout (all integers little-endian):

    bytes 0..7    magic b"UNIKDCK1" (format version baked into the magic)
    bytes 8..11   uint32 header length H
    bytes 12..    UTF-8 JSON header (H bytes, sorted keys)
    then          matrix payloads, concatenated in manifest order

The JSON header carries a `kind` tag, the structural fields needed to
rebuild the object (net spec, head params, ...), and a `matrices` manifest:
a list of {name, shape} entries. Each payload is the matrix in row-major
(C) order as little-endian float64, so a file is reproducible byte-for-byte
from identical states.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .bank import BankPair
from .errors import DimensionMismatchError
from .models import DenseNetSpec, FrHeadParams, HeadState, NetworkState

MAGIC = b"UNIKDCK1"


def _write(path: Path, kind: str, fields: dict, matrices: list[tuple[str, np.ndarray]]) -> None:
    header = dict(fields)
    header["kind"] = kind
    header["matrices"] = [
        {"name": name, "shape": list(arr.shape)} for name, arr in matrices
    ]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in matrices:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read(path: Path) -> tuple[dict, list[np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic {raw[:8]!r})")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12 : 12 + hlen].decode("utf-8"))
    offset = 12 + hlen
    matrices = []
    for entry in header["matrices"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        matrices.append(arr.reshape(shape).astype(np.float64))
        offset += count * 8
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    return header, matrices


def save_network(path: str | Path, net: NetworkState, head: HeadState | None = None) -> None:
    """Persist a dense net (and optionally its classification head)."""
    matrices: list[tuple[str, np.ndarray]] = []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        matrices.append((f"layer{i}.weight", w))
        matrices.append((f"layer{i}.bias", b))
    fields: dict = {
        "net": {
            "widths": list(net.spec.widths),
            "activation": net.spec.activation,
            "seed": net.spec.seed,
        }
    }
    if head is not None:
        matrices.append(("head.weights", head.weights))
        fields["head"] = {
            "classes": head.params.classes,
            "scale": head.params.scale,
            "margin": head.params.margin,
        }
    _write(Path(path), "dense_net", fields, matrices)


def load_network(path: str | Path) -> tuple[NetworkState, HeadState | None]:
    """Rebuild a net (momentum buffers reset to zero) and head if present."""
    header, matrices = _read(Path(path))
    if header["kind"] != "dense_net":
        raise ValueError(f"{path}: expected dense_net checkpoint, got {header['kind']!r}")
    spec = DenseNetSpec(
        tuple(header["net"]["widths"]),
        header["net"]["activation"],
        int(header["net"]["seed"]),
    )
    by_name = {e["name"]: m for e, m in zip(header["matrices"], matrices)}
    n_layers = len(spec.widths) - 1
    weights = []
    biases = []
    for i in range(n_layers):
        weights.append(np.ascontiguousarray(by_name[f"layer{i}.weight"]))
        biases.append(np.ascontiguousarray(by_name[f"layer{i}.bias"]))
        expect = (spec.widths[i], spec.widths[i + 1])
        if weights[-1].shape != expect:
            raise DimensionMismatchError(
                f"{path}: layer {i} weight shape {weights[-1].shape} != {expect}"
            )
    net = NetworkState(spec, weights, biases)
    head = None
    if "head" in header:
        params = FrHeadParams(
            classes=int(header["head"]["classes"]),
            scale=float(header["head"]["scale"]),
            margin=float(header["head"]["margin"]),
        )
        head = HeadState(params, np.ascontiguousarray(by_name["head.weights"]))
    return net, head


def save_bank_pair(path: str | Path, banks: BankPair) -> None:
    """Debug dump of both bank snapshots (oldest row first)."""
    _write(
        Path(path),
        "bank_pair",
        {"capacity": banks.teacher.capacity, "fill": banks.teacher.fill},
        [
            ("teacher.rows", banks.teacher.snapshot()),
            ("student.rows", banks.student.snapshot()),
        ],
    )


def load_bank_pair(path: str | Path) -> BankPair:
    header, matrices = _read(Path(path))
    if header["kind"] != "bank_pair":
        raise ValueError(f"{path}: expected bank_pair checkpoint, got {header['kind']!r}")
    t_rows, s_rows = matrices
    banks = BankPair(int(header["capacity"]), t_rows.shape[1])
    banks.enqueue_pair(t_rows, s_rows)
    return banks
