"""FMAP tensor files and directory-based parameter bundles.

FMAP layout (all integers little-endian)::

    offset 0   4 bytes   magic b"FMAP"
    offset 4   u8        version (1)
    offset 5   u8        dtype code: 0 float32, 1 float64, 2 uint16, 3 uint32
    offset 6   u16       ndim
    offset 8   ndim*u32  dims
    ...        payload   row-major little-endian values

A bundle is a directory with ``manifest.json`` holding ``"params"``
(name -> relative FMAP path), ``"scalars"`` (name -> number) and ``"meta"``.
"""

import json
import os
import struct

import numpy as np

from .errors import FormatError

MAGIC = b"FMAP"
VERSION = 1
DTYPE_CODES = {
    0: np.dtype("<f4"),
    1: np.dtype("<f8"),
    2: np.dtype("<u2"),
    3: np.dtype("<u4"),
}
_CODE_OF = {dt.newbyteorder("="): code for code, dt in DTYPE_CODES.items()}
MANIFEST = "manifest.json"


def encode_fmap(t):
    t = np.asarray(t)
    code = _CODE_OF.get(t.dtype.newbyteorder("="))
    if code is None:
        raise FormatError(f"unsupported dtype {t.dtype}; FMAP holds float32, float64, uint16, uint32")
    if any(d <= 0 for d in t.shape):
        raise FormatError(f"FMAP dims must be positive, got {t.shape}")
    header = MAGIC + struct.pack("<BBH", VERSION, code, t.ndim)
    header += struct.pack(f"<{t.ndim}I", *t.shape)
    payload = np.ascontiguousarray(t, dtype=DTYPE_CODES[code]).tobytes()
    return header + payload


def decode_fmap(buf):
    buf = bytes(buf)
    if len(buf) < 8:
        raise FormatError("truncated header", offset=len(buf))
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}", offset=0)
    version, code, ndim = struct.unpack_from("<BBH", buf, 4)
    if version != VERSION:
        raise FormatError(f"unknown version {version}", offset=4)
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}", offset=5)
    dims_end = 8 + 4 * ndim
    if len(buf) < dims_end:
        raise FormatError(f"truncated dims: need {ndim} u32 values", offset=len(buf))
    dims = struct.unpack_from(f"<{ndim}I", buf, 8)
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    got = len(buf) - dims_end
    if got != expected:
        kind = "truncated" if got < expected else "oversized"
        raise FormatError(f"{kind} payload: expected {expected} bytes, found {got}",
                          offset=dims_end + min(got, expected))
    data = np.frombuffer(buf, dtype=dtype, offset=dims_end).reshape(dims)
    return data.astype(dtype.newbyteorder("="))


def write_fmap(t, path):
    data = encode_fmap(t)
    with open(path, "wb") as f:
        f.write(data)


def read_fmap(path):
    with open(path, "rb") as f:
        buf = f.read()
    try:
        return decode_fmap(buf)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_bundle(directory, params, scalars=None, meta=None):
    """Write array ``params`` as FMAP files plus the JSON manifest."""
    os.makedirs(directory, exist_ok=True)
    manifest = {"params": {}, "scalars": {}, "meta": dict(meta or {})}
    for name in sorted(params):
        fname = f"{name}.fmap"
        write_fmap(params[name], os.path.join(directory, fname))
        manifest["params"][name] = fname
    for name in sorted(scalars or {}):
        manifest["scalars"][name] = float(scalars[name])
    with open(os.path.join(directory, MANIFEST), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def read_bundle(directory):
    """Return ``(params, scalars, meta)`` from a bundle directory."""
    path = os.path.join(directory, MANIFEST)
    try:
        with open(path) as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise FormatError(f"{path}: manifest not found") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg})", offset=exc.pos) from None
    for key in ("params", "scalars"):
        if not isinstance(manifest.get(key, {}), dict):
            raise FormatError(f"{path}: '{key}' must be an object")
    params = {}
    for name, rel in manifest.get("params", {}).items():
        full = os.path.join(directory, rel)
        if not os.path.isfile(full):
            raise FormatError(f"{path}: entry '{name}' points to missing file {full}")
        params[name] = read_fmap(full)
    scalars = {k: float(v) for k, v in manifest.get("scalars", {}).items()}
    return params, scalars, manifest.get("meta", {})
