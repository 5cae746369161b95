"""Binary field files, JSON sidecars and content-addressed caching.

Layout of a ``.pwf`` file::

    bytes 0-7    magic b"PWFIELD\\0"
    bytes 8-11   format version, uint32 little-endian
    bytes 12-15  header length L, uint32 little-endian
    bytes 16-..  UTF-8 JSON header (grid spec, params hash), space padded so
                 the data starts on an 8-byte boundary
    then         (nt+1) * nx^n float64 little-endian values, time-major,
                 spatial axes in C order

The sidecar ``<name>.json`` repeats grid, params and measure and carries
the sha256 of the binary file.
"""

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .grid import GridField, GridSpec

MAGIC = b"PWFIELD\0"
VERSION = 1


class FieldFormatError(ValueError):
    """A field file is malformed or fails its checksum."""


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def content_hash(*parts):
    """sha256 of the canonical JSON of ``parts``."""
    return hashlib.sha256(canonical_json(list(parts)).encode()).hexdigest()


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def grid_from_dict(d):
    return GridSpec(int(d["n"]), int(d["nx"]), int(d["nt"]), float(d["R"]), float(d["T"]))


def write_field(path, u, params, measure, extra=None):
    """Write ``u`` to ``path`` (binary) and ``path.with_suffix('.json')``; returns the checksum."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    phash = content_hash(params.as_dict(), measure.to_dict())
    header = canonical_json({"grid": u.grid.as_dict(), "params_hash": phash}).encode()
    pad = (-(16 + len(header))) % 8
    header += b" " * pad
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", VERSION, len(header)) + header)
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    checksum = file_sha256(path)
    sidecar = {"grid": u.grid.as_dict(), "params": params.as_dict(), "measure": measure.to_dict(),
               "params_hash": phash, "sha256": checksum, "format_version": VERSION}
    if extra:
        sidecar.update(extra)
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2, default=_jsonable) + "\n")
    return checksum


def read_field(path, verify=True):
    """Read a field written by ``write_field``; checks magic, version and checksum."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != MAGIC:
        raise FieldFormatError(f"{path}: bad magic")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise FieldFormatError(f"{path}: unsupported version {version}")
    header = json.loads(raw[16:16 + hlen].decode())
    grid = grid_from_dict(header["grid"])
    side = path.with_suffix(".json")
    if verify and side.exists():
        expected = json.loads(side.read_text())["sha256"]
        if hashlib.sha256(raw).hexdigest() != expected:
            raise FieldFormatError(f"{path}: checksum mismatch")
    data = np.frombuffer(raw, dtype="<f8", offset=16 + hlen)
    if data.size != (grid.nt + 1) * grid.nx ** grid.n:
        raise FieldFormatError(f"{path}: expected {(grid.nt + 1) * grid.nx ** grid.n} values, found {data.size}")
    return GridField(data.reshape((grid.nt + 1,) + grid.shape).astype(float), grid)


def write_slice_csv(path, u, t):
    """CSV of the time level ``t``: node coordinates then the value."""
    g = u.grid
    k = g.time_index(t)
    coords = g.coords.reshape(-1, g.n)
    vals = u.values[k].reshape(-1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(g.n)] + ["u"])
        for c, v in zip(coords, vals):
            w.writerow([repr(float(ci)) for ci in c] + [repr(float(v))])


class FieldCache:
    """Solved fields stored under ``root`` by the hash of everything that defines them."""

    def __init__(self, root):
        self.root = Path(root)

    def key(self, params, measure, grid, solver_opts):
        return content_hash(params.as_dict(), measure.to_dict(), grid.as_dict(), solver_opts)

    def path(self, key):
        return self.root / f"{key}.pwf"

    def get(self, key):
        p = self.path(key)
        if p.exists() and p.with_suffix(".json").exists():
            try:
                return read_field(p)
            except FieldFormatError:
                return None
        return None

    def get_or_solve(self, params, measure, grid, solver_opts, solve):
        """Return ``(field, key, hit)``; ``solve()`` runs only on a miss."""
        key = self.key(params, measure, grid, solver_opts)
        u = self.get(key)
        if u is not None:
            return u, key, True
        u = solve()
        write_field(self.path(key), u, params, measure,
                    {"solver": solver_opts, "newton_iterations": u.diagnostics.get("newton_iterations", [])})
        return u, key, False
