"""Binary artifact format for snapshots, bases and EIM spaces.

Layout (little endian)::

    b"DWROM001" | u32 version | u32 ndim | ndim x u64 dims
    | prod(dims) float64, row-major | u64 n | n bytes of UTF-8 JSON metadata
"""

import json
import os
import struct

import numpy as np

from ..errors import FormatError, IntegrityError
from ..eim import EimSpace, _cardinal
from ..rom import ReducedBasis, SnapshotSet

MAGIC = b"DWROM001"
VERSION = 1

__all__ = ["write_array", "read_array", "save_snapshots", "load_snapshots", "save_basis",
           "load_basis", "save_eim", "load_eim", "MAGIC", "VERSION"]


def write_array(path, array, meta=None):
    a = np.ascontiguousarray(array, dtype="<f8")
    blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, a.ndim))
        fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        fh.write(a.tobytes(order="C"))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
    os.replace(tmp, path)


def _take(buf, pos, n, what):
    if pos + n > len(buf):
        raise IntegrityError(f"artifact truncated while reading {what}")
    return buf[pos:pos + n], pos + n


def read_array(path):
    """Return ``(array, metadata)``; raises :class:`FormatError` or :class:`IntegrityError`."""
    with open(path, "rb") as fh:
        buf = fh.read()
    head, pos = _take(buf, 0, 8, "magic bytes")
    if head != MAGIC:
        raise FormatError(f"{path}: not a dwrom artifact (bad magic bytes)")
    raw, pos = _take(buf, pos, 8, "header")
    version, ndim = struct.unpack("<II", raw)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported artifact version {version}")
    raw, pos = _take(buf, pos, 8 * ndim, "dimensions")
    shape = struct.unpack(f"<{ndim}Q", raw)
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    raw, pos = _take(buf, pos, 8 * count, "payload")
    array = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float)
    raw, pos = _take(buf, pos, 8, "metadata length")
    (n,) = struct.unpack("<Q", raw)
    raw, pos = _take(buf, pos, n, "metadata")
    if pos != len(buf):
        raise IntegrityError(f"{path}: trailing bytes after the metadata block")
    try:
        meta = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"{path}: corrupt metadata block") from exc
    return array, meta


def save_snapshots(directory, s, extra=None):
    os.makedirs(directory, exist_ok=True)
    names = sorted(s.fluxes)
    write_array(os.path.join(directory, "snapshots_states.dwrom"), s.states,
                dict(extra or {}, columns=s.meta, fluxes=names))
    for name in names:
        write_array(os.path.join(directory, f"snapshots_flux_{name}.dwrom"), s.fluxes[name],
                    {"name": name})


def load_snapshots(directory):
    states, meta = read_array(os.path.join(directory, "snapshots_states.dwrom"))
    fluxes = {}
    for name in meta.get("fluxes", []):
        fluxes[name], _ = read_array(os.path.join(directory, f"snapshots_flux_{name}.dwrom"))
    return SnapshotSet(states, fluxes, meta.get("columns", [])), meta


def save_basis(path, basis, extra=None):
    meta = dict(extra or {}, sigma=[float(x) for x in basis.sigma], mode=basis.mode,
                tol=basis.tol, n_rb=basis.n_rb)
    write_array(path, basis.v, meta)
    write_array(path + ".w", basis.w, {"of": os.path.basename(path)})


def load_basis(path):
    v, meta = read_array(path)
    w, _ = read_array(path + ".w")
    if w.shape != v.shape:
        raise IntegrityError(f"{path}: trial and test bases differ in shape")
    return ReducedBasis(v, w, np.asarray(meta["sigma"]), meta["mode"], meta.get("tol")), meta


def save_eim(path, space, extra=None):
    meta = dict(extra or {}, z=[int(i) for i in space.z], errors=[float(e) for e in space.errors],
                tol=space.tol, converged=bool(space.converged))
    write_array(path, space.q, meta)


def load_eim(path, grid=None):
    q, meta = read_array(path)
    z = np.asarray(meta["z"], dtype=np.int64)
    if q.ndim != 2 or q.shape[1] != len(z):
        raise IntegrityError(f"{path}: magic points and basis disagree")
    space = EimSpace(z, _cardinal(q, z), q, np.asarray(meta["errors"]), meta["tol"],
                     meta["converged"])
    return (space.with_stencils(grid) if grid is not None else space), meta
