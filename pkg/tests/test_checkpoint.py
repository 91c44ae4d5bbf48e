"""Tensor container format: roundtrip fidelity and manifest structure."""

from __future__ import annotations

import numpy as np
import pytest

from extractedit.checkpoint import (
    FORMAT_VERSION,
    CheckpointError,
    load_tensors,
    save_tensors,
)


def test_roundtrip_bit_exact(tmp_path, rng):
    tensors = {
        "embedding": rng.normal(size=(10, 4)),
        "encoder.l0.w_ih": rng.normal(size=(4, 12)),
        "bias": rng.normal(size=7),
        "scalar": np.array(3.5),
    }
    path = tmp_path / "params.bin"
    save_tensors(path, tensors)
    back = load_tensors(path)
    assert list(back) == list(tensors)
    for k in tensors:
        assert back[k].dtype == np.float64
        np.testing.assert_array_equal(back[k], tensors[k])


def test_manifest_is_plain_text_with_version(tmp_path):
    path = tmp_path / "t.bin"
    save_tensors(path, {"w": np.zeros((2, 3))})
    raw = path.read_bytes()
    header = raw.split(b"\n\n", 1)[0].decode("utf-8").split("\n")
    assert header[0] == f"tensors {FORMAT_VERSION} 1"
    name, shape, offset = header[1].split("\t")
    assert (name, shape, offset) == ("w", "2,3", "0")


def test_payload_is_little_endian_f64_at_offsets(tmp_path):
    a = np.arange(6, dtype=np.float64).reshape(2, 3)
    b = np.array([9.25, -1.5])
    path = tmp_path / "t.bin"
    save_tensors(path, {"a": a, "b": b})
    raw = path.read_bytes()
    binary = raw.split(b"\n\n", 1)[1]
    np.testing.assert_array_equal(
        np.frombuffer(binary, dtype="<f8", count=6, offset=0).reshape(2, 3), a)
    np.testing.assert_array_equal(
        np.frombuffer(binary, dtype="<f8", count=2, offset=48), b)


def test_bad_header_rejected(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"not a manifest\n\nxxxx")
    with pytest.raises(CheckpointError):
        load_tensors(p)


def test_tab_in_name_rejected(tmp_path):
    with pytest.raises(CheckpointError):
        save_tensors(tmp_path / "t.bin", {"a\tb": np.zeros(1)})


def test_written_bytes_deterministic(tmp_path, rng):
    tensors = {"x": rng.normal(size=(3, 3)), "y": rng.normal(size=2)}
    save_tensors(tmp_path / "a.bin", tensors)
    save_tensors(tmp_path / "b.bin", tensors)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
