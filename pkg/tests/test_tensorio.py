import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyloncrf.tensorio import (
    IGNORE,
    MAGIC,
    ConfigError,
    LabelMap,
    Raster,
    RunConfig,
    TensorFormatError,
    load_config,
    read_array,
    read_tensor,
    write_array,
    write_tensor,
)


def test_roundtrip_small_raster(tmp_path):
    r = Raster(np.zeros((2, 3, 1), dtype=np.float32))
    write_tensor(r, tmp_path / "t.ftn")
    back = read_tensor(tmp_path / "t.ftn")
    assert isinstance(back, Raster)
    assert back.values.shape == (2, 3, 1)
    assert np.array_equal(back.values, r.values)


def test_roundtrip_large_raster_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.random((256, 256, 6), dtype=np.float32)
    write_tensor(Raster(vals), tmp_path / "big.ftn")
    back = read_tensor(tmp_path / "big.ftn")
    # byte-level comparison, not just allclose
    assert back.values.tobytes() == vals.tobytes()


def test_truncated_payload_dims_mismatch(tmp_path):
    # header declares 4 dims but payload only carries a 3-dim worth of data
    payload = np.zeros((2, 2, 2), dtype=np.float32).tobytes()
    header = MAGIC + struct.pack("<BB", 1, 4) + struct.pack("<4I", 2, 2, 2, 2)
    p = tmp_path / "bad.ftn"
    p.write_bytes(header + payload)
    with pytest.raises(TensorFormatError, match="truncated"):
        read_array(p)


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.ftn"
    p.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(TensorFormatError, match="magic"):
        read_array(p)


def test_dim_overflow(tmp_path):
    header = MAGIC + struct.pack("<BB", 1, 2) + struct.pack("<2I", 2**31 - 1, 2**31 - 1)
    p = tmp_path / "huge.ftn"
    p.write_bytes(header)
    with pytest.raises(TensorFormatError, match="overflow"):
        read_array(p)


def test_trailing_bytes_rejected(tmp_path):
    p = tmp_path / "t.ftn"
    write_array(np.zeros((2, 2), dtype=np.uint8), p)
    p.write_bytes(p.read_bytes() + b"\x01")
    with pytest.raises(TensorFormatError, match="trailing"):
        read_array(p)


def test_empty_tensor(tmp_path):
    p = tmp_path / "empty.ftn"
    write_array(np.zeros((0, 0), dtype=np.uint8), p)
    assert p.stat().st_size == 9 + 8  # header + two dims, no payload
    assert read_array(p).shape == (0, 0)


def test_labelmap_ignore_preserved(tmp_path):
    lab = np.array([[0, 1], [IGNORE, 2]], dtype=np.uint8)
    write_tensor(LabelMap(lab), tmp_path / "l.ftn")
    back = read_tensor(tmp_path / "l.ftn")
    assert isinstance(back, LabelMap)
    assert np.array_equal(back.labels, lab)


def test_nan_rejected_before_write(tmp_path):
    bad = np.zeros((2, 2, 1), dtype=np.float32)
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        Raster(bad)
    with pytest.raises(TensorFormatError, match="non-finite"):
        write_array(bad, tmp_path / "nan.ftn")
    assert not (tmp_path / "nan.ftn").exists()


def test_uint32_roundtrip(tmp_path):
    ids = np.arange(70000, dtype=np.uint32).reshape(700, 100)
    write_array(ids, tmp_path / "ids.ftn")
    assert np.array_equal(read_array(tmp_path / "ids.ftn"), ids)


@settings(max_examples=40, deadline=None)
@given(
    h=st.integers(1, 9),
    w=st.integers(1, 9),
    c=st.integers(1, 4),
    dtype=st.sampled_from(["f4", "u1", "u4"]),
    seed=st.integers(0, 2**31),
)
def test_roundtrip_property(tmp_path_factory, h, w, c, dtype, seed):
    rng = np.random.default_rng(seed)
    if dtype == "f4":
        arr = rng.random((h, w, c), dtype=np.float32)
    elif dtype == "u1":
        arr = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
    else:
        arr = rng.integers(0, 2**32 - 1, size=(h, w), dtype=np.uint32)
    p = tmp_path_factory.mktemp("rt") / "x.ftn"
    write_array(arr, p)
    back = read_array(p)
    assert back.dtype == arr.dtype
    assert back.tobytes() == arr.tobytes()


def test_config_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{}")
    cfg = load_config(p)
    assert cfg.weights == (0.6, 0.3, 0.1)
    assert cfg.gamma == 0.1
    assert cfg.lambdas == (1.0, 1.0, 1.0, 1.0)
    assert cfg.mu_cap == 10.0
    assert cfg.epsilon_prob == 1e-12
    assert cfg.min_region_px == 8
    assert cfg.mode == "crf-tree"


def test_config_weights_accepted(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"weights": [0.6, 0.3, 0.1]}))
    assert abs(sum(load_config(p).weights) - 1.0) < 1e-9


def test_config_weights_not_convex(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"weights": [0.6, 0.6, 0.1]}))
    with pytest.raises(ConfigError, match="convex"):
        load_config(p)


def test_config_unknown_mode(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"mode": "magic"}))
    with pytest.raises(ConfigError, match="mode"):
        load_config(p)


def test_config_unknown_key(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"classcount": 3}))
    with pytest.raises(ConfigError, match="unknown"):
        load_config(p)


def test_config_negative_lambda():
    with pytest.raises(ConfigError):
        RunConfig(lambdas=(1.0, -0.5, 1.0, 1.0))
