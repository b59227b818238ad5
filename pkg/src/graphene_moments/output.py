"""Columnar diagnostics and self-describing binary field snapshots.

Snapshot layout (all little endian)::

    magic   6 bytes   b"GMSNAP"
    version uint16
    hlen    uint32    length of the JSON header in bytes
    header  hlen      {"grid": [...], "fields": [...], "shapes": [...],
                       "scalar_width": 8, "time": t}
    data              fields one after another, row-major float64
"""

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"GMSNAP"
VERSION = 1
_PREFIX = struct.Struct("<6sHI")


def format_value(v):
    """Shortest text that round-trips the float exactly."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_diagnostics(path, records):
    """Write a list of equal-keyed dicts as whitespace separated columns."""
    path = Path(path)
    if not records:
        path.write_text("")
        return path
    keys = list(records[0])
    lines = ["# " + " ".join(keys)]
    for rec in records:
        lines.append(" ".join(format_value(rec[k]) for k in keys))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_diagnostics(path):
    """Inverse of :func:`write_diagnostics`; values come back as floats."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        return []
    keys = lines[0].lstrip("#").split()
    return [dict(zip(keys, map(float, line.split()))) for line in lines[1:] if line.strip()]


def write_snapshot(path, fields, grid_dims, time=0.0):
    """Write named float64 arrays with a self-describing header.

    Parameters
    ----------
    fields : dict of str -> ndarray
    grid_dims : sequence of int
    """
    names = list(fields)
    arrays = [np.ascontiguousarray(fields[k], dtype="<f8") for k in names]
    header = {
        "grid": [int(d) for d in grid_dims],
        "fields": names,
        "shapes": [list(a.shape) for a in arrays],
        "scalar_width": 8,
        "time": float(time),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(a.tobytes(order="C"))
    return Path(path)


def read_snapshot(path):
    """Return ``(header, fields)`` from a snapshot file."""
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise ValueError("snapshot file is truncated")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not a snapshot file (bad magic)")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    header = json.loads(data[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
    if header["scalar_width"] != 8:
        raise ValueError("only 8-byte scalars are supported")
    offset = _PREFIX.size + hlen
    fields = {}
    for name, shape in zip(header["fields"], header["shapes"]):
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(data):
            raise ValueError(f"snapshot data for {name!r} is truncated")
        fields[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset = end
    return header, fields


def state_fields(state):
    """Named arrays of a fluid state, vector components split out."""
    out = {}
    for name in ("n0", "nsigma", "nvec", "J"):
        if not hasattr(state, name):
            continue
        a = np.asarray(getattr(state, name))
        if a.ndim == 2:
            out[name] = a
        else:
            for k in range(a.shape[0]):
                out[f"{name}{k + 1}"] = a[k]
    return out
