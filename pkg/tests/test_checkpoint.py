"""Checkpoint round-trips and corruption handling."""

import struct

import numpy as np
import pytest

from driftlab.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from driftlab.net import Arch, init_params
from driftlab.rng import RandomStream


def test_round_trip_is_bit_exact(tmp_path):
    arch = Arch(state_dim=2, n_conditions=4, hidden=(16, 16), time_freqs=8)
    params = init_params(arch, RandomStream(42))
    path = save_checkpoint(tmp_path / "model.ckpt", params)
    loaded = load_checkpoint(path)
    assert loaded.arch == arch
    np.testing.assert_array_equal(loaded.values, params.values)
    assert loaded.values.dtype == np.float64


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOTDRIFT" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(path)


def test_unknown_version_rejected(tmp_path):
    arch = Arch(state_dim=2, n_conditions=2, hidden=(4,), time_freqs=2)
    params = init_params(arch, RandomStream(0))
    path = save_checkpoint(tmp_path / "model.ckpt", params)
    blob = bytearray(path.read_bytes())
    blob[8:12] = struct.pack("<I", 99)
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)


def test_truncated_file_rejected(tmp_path):
    arch = Arch(state_dim=2, n_conditions=2, hidden=(4,), time_freqs=2)
    params = init_params(arch, RandomStream(1))
    path = save_checkpoint(tmp_path / "model.ckpt", params)
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(path)


def test_count_mismatch_rejected(tmp_path):
    arch = Arch(state_dim=2, n_conditions=2, hidden=(4,), time_freqs=2)
    params = init_params(arch, RandomStream(2))
    path = save_checkpoint(tmp_path / "model.ckpt", params)
    blob = bytearray(path.read_bytes())
    # shrink the declared count but keep the payload length consistent
    offset = 8 + 4 + 4 + struct.unpack_from("<I", blob, 12)[0]
    (count,) = struct.unpack_from("<Q", blob, offset)
    blob[offset : offset + 8] = struct.pack("<Q", count - 1)
    path.write_bytes(bytes(blob[:-8]))
    with pytest.raises(ValueError, match="count"):
        load_checkpoint(path)


def test_magic_is_eight_bytes():
    assert len(MAGIC) == 8
