"""Checkpoint serialization.

Tensor container format (version 1): a plain-text manifest, then the raw
bytes. The manifest's first line is ``tensors <format-version> <count>``;
each following line is ``name<TAB>comma-separated-shape<TAB>byte-offset``
(offset into the binary section); a single blank line terminates the
manifest. Tensors are raw little-endian float64, row-major.

A checkpoint directory holds ``params.bin`` (model + evaluator weights),
``optim.bin`` (Adam moments), ``index.bin`` (embedding-index snapshots),
and ``state.json`` (counters, RNG state, config echo, vocabulary, metric
history) so a run can resume bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["FORMAT_VERSION", "CheckpointError", "save_tensors", "load_tensors",
           "save_json", "load_json"]

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint payload."""


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named arrays as manifest + raw little-endian float64."""
    lines = [f"tensors {FORMAT_VERSION} {len(tensors)}"]
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        if "\t" in name or "\n" in name:
            raise CheckpointError(f"tensor name contains separators: {name!r}")
        arr = np.ascontiguousarray(arr, dtype="<f8")
        shape = ",".join(str(d) for d in arr.shape) if arr.ndim else ""
        lines.append(f"{name}\t{shape}\t{offset}")
        blobs.append(arr.tobytes())
        offset += len(blobs[-1])
    manifest = ("\n".join(lines) + "\n\n").encode("utf-8")
    with open(path, "wb") as f:
        f.write(manifest)
        for blob in blobs:
            f.write(blob)


def load_tensors(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        raw = f.read()
    sep = raw.find(b"\n\n")
    if sep < 0:
        raise CheckpointError(f"{path}: missing manifest terminator")
    header_lines = raw[:sep].decode("utf-8").split("\n")
    binary = raw[sep + 2 :]
    head = header_lines[0].split()
    if len(head) != 3 or head[0] != "tensors":
        raise CheckpointError(f"{path}: bad manifest header {header_lines[0]!r}")
    version, count = int(head[1]), int(head[2])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    if len(header_lines) - 1 != count:
        raise CheckpointError(f"{path}: manifest count mismatch")
    out: dict[str, np.ndarray] = {}
    for line in header_lines[1:]:
        name, shape_s, offset_s = line.split("\t")
        shape = tuple(int(d) for d in shape_s.split(",")) if shape_s else ()
        n = int(np.prod(shape)) if shape else 1
        offset = int(offset_s)
        arr = np.frombuffer(binary, dtype="<f8", count=n, offset=offset)
        out[name] = arr.reshape(shape).astype(np.float64)
    return out


def save_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1, sort_keys=True)


def load_json(path) -> dict:
    with open(Path(path), encoding="utf-8") as f:
        return json.load(f)
