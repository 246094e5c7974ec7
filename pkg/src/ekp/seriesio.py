"""Dependency-free binary container for time series of grid fields.

Layout (all integers little-endian u32, floats f64 little-endian):

    magic   4 bytes  "EKPF"
    version u32      0
    dim     u32
    n       u32      points per axis
    period  f64
    t0      f64      first sample time
    dt      f64      uniform step between samples
    count   u32      number of named fields
    then per field:
      name_len u32, name (utf-8), time_count u32,
      time_count * n^dim f64 values (C order)

Readers reject a wrong magic or version and report the byte offset of any
truncation.  Vector/tensor series are stored one component per name
("j.0", "j.1", ...).
"""

import struct

import numpy as np

from .fields import Grid

MAGIC = b"EKPF"
VERSION = 0


class SeriesFormatError(ValueError):
    pass


def write_field_series(path, grid, times, fields):
    """fields: mapping name -> array of shape (time_count,) + grid.shape."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise ValueError("a series needs at least two samples")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=0, atol=1e-12 * (abs(dt) + 1)):
        raise ValueError("series times must be uniformly spaced")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", VERSION, grid.dim, grid.n))
        f.write(struct.pack("<d", grid.period))
        f.write(struct.pack("<d", float(times[0])))
        f.write(struct.pack("<d", float(dt)))
        f.write(struct.pack("<I", len(fields)))
        for name, series in fields.items():
            series = np.ascontiguousarray(np.asarray(series, dtype="<f8"))
            expected = (len(times),) + grid.shape
            if series.shape != expected:
                raise ValueError(f"field {name!r} has shape {series.shape}, expected {expected}")
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", series.shape[0]))
            f.write(series.tobytes())


def _need(f, nbytes, what):
    data = f.read(nbytes)
    if len(data) != nbytes:
        raise SeriesFormatError(
            f"truncated while reading {what} at byte offset {f.tell() - len(data)}"
        )
    return data


def read_field_series(path):
    """Returns (grid, times, dict name -> array (time_count,) + grid.shape)."""
    with open(path, "rb") as f:
        magic = _need(f, 4, "magic")
        if magic != MAGIC:
            raise SeriesFormatError(f"bad magic {magic!r} at byte offset 0")
        version, dim, n = struct.unpack("<III", _need(f, 12, "header"))
        if version != VERSION:
            raise SeriesFormatError(f"unsupported version {version} at byte offset 4")
        period, t0, dt = struct.unpack("<ddd", _need(f, 24, "header floats"))
        (count,) = struct.unpack("<I", _need(f, 4, "field count"))
        grid = Grid(dim, n, period)
        cells = n**dim
        fields = {}
        times = None
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _need(f, 4, "name length"))
            name = _need(f, name_len, "name").decode("utf-8")
            (nt,) = struct.unpack("<I", _need(f, 4, "time count"))
            raw = _need(f, nt * cells * 8, f"values of {name!r}")
            arr = np.frombuffer(raw, dtype="<f8").reshape((nt,) + grid.shape).copy()
            fields[name] = arr
            if times is None:
                times = t0 + dt * np.arange(nt)
        trailing = f.read(1)
        if trailing:
            raise SeriesFormatError(f"unexpected trailing bytes at offset {f.tell() - 1}")
    return grid, times, fields
