import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from hcnet.errors import FormatError
from hcnet.fmap import decode_fmap, encode_fmap, read_bundle, read_fmap, write_bundle, write_fmap

DTYPES = [np.float32, np.float64, np.uint16, np.uint32]


def test_float32_roundtrip(tmp_path):
    t = np.array([[1, 2], [3, 4]], np.float32)
    path = tmp_path / "t.fmap"
    write_fmap(t, path)
    back = read_fmap(path)
    assert back.dtype == np.float32 and back.shape == (2, 2)
    assert back.tobytes() == t.tobytes()


def test_uint16_label_map(tmp_path, rng):
    t = rng.integers(0, 19, (8, 8)).astype(np.uint16)
    write_fmap(t, tmp_path / "l.fmap")
    assert np.array_equal(read_fmap(tmp_path / "l.fmap"), t)
    assert read_fmap(tmp_path / "l.fmap").dtype == np.uint16


def test_header_layout():
    buf = encode_fmap(np.zeros((2, 3), np.uint32))
    assert buf[:4] == b"FMAP"
    assert buf[4] == 1 and buf[5] == 3
    assert buf[6:8] == b"\x02\x00"
    assert buf[8:16] == b"\x02\x00\x00\x00\x03\x00\x00\x00"
    assert len(buf) == 16 + 6 * 4


def test_payload_little_endian():
    buf = encode_fmap(np.array([1.0], np.float64))
    assert buf[-8:] == np.array([1.0], "<f8").tobytes()
    big = np.array([1, 258], ">u2")
    assert encode_fmap(big)[-4:] == b"\x01\x00\x02\x01"


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(DTYPES).flatmap(
    lambda dt: arrays(dt, array_shapes(min_dims=1, max_dims=4, max_side=5),
                      elements=st.integers(0, 60000) if dt in (np.uint16, np.uint32) else None)))
def test_roundtrip_property(t):
    back = decode_fmap(encode_fmap(t))
    assert back.dtype == t.dtype and back.shape == t.shape
    assert back.tobytes() == t.tobytes()


def test_truncated_mid_dims():
    buf = encode_fmap(np.zeros((2, 3, 4), np.float32))
    with pytest.raises(FormatError) as exc:
        decode_fmap(buf[:13])
    assert exc.value.offset == 13


def test_truncated_payload():
    buf = encode_fmap(np.zeros((2, 3), np.float32))
    with pytest.raises(FormatError) as exc:
        decode_fmap(buf[:-1])
    assert "truncated" in str(exc.value)
    assert exc.value.offset is not None


def test_bad_magic():
    buf = bytearray(encode_fmap(np.zeros(2, np.float32)))
    buf[0:4] = b"PAMF"
    with pytest.raises(FormatError) as exc:
        decode_fmap(buf)
    assert exc.value.offset == 0


@pytest.mark.parametrize("pos,value", [(4, 2), (5, 9)])
def test_unknown_version_or_dtype(pos, value):
    buf = bytearray(encode_fmap(np.zeros(2, np.float32)))
    buf[pos] = value
    with pytest.raises(FormatError) as exc:
        decode_fmap(buf)
    assert exc.value.offset == pos


def test_unsupported_dtype():
    with pytest.raises(FormatError):
        encode_fmap(np.zeros(3, np.int8))


def test_read_error_names_path(tmp_path):
    p = tmp_path / "bad.fmap"
    p.write_bytes(b"FMA")
    with pytest.raises(FormatError, match="bad.fmap"):
        read_fmap(p)


def test_bundle_roundtrip(tmp_path, rng):
    params = {"piam.w_o": rng.standard_normal((2, 8)), "preseg.head": np.ones((3, 4, 1, 1), np.float32)}
    write_bundle(tmp_path / "b", params, {"piam.alpha": 0.25, "lambda": 0.8}, {"note": "x"})
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert set(manifest) == {"params", "scalars", "meta"}
    assert manifest["params"]["piam.w_o"] == "piam.w_o.fmap"
    got, scalars, meta = read_bundle(tmp_path / "b")
    for k in params:
        assert got[k].tobytes() == params[k].tobytes()
    assert scalars == {"piam.alpha": 0.25, "lambda": 0.8}
    assert meta == {"note": "x"}


def test_bundle_missing_entry(tmp_path):
    write_bundle(tmp_path, {"a": np.ones(2)})
    os.remove(tmp_path / "a.fmap")
    with pytest.raises(FormatError, match="missing"):
        read_bundle(tmp_path)


def test_bundle_without_manifest(tmp_path):
    with pytest.raises(FormatError):
        read_bundle(tmp_path)
