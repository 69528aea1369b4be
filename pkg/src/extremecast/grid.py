"""Gridded fields, the XGRID1 file format and the atmospheric variable registry.

XGRID1 layout (all integers little-endian)::

    b"XGRID1"                       6-byte magic
    u32 C, u32 H, u32 W             dimensions
    u32 n, n bytes of UTF-8 JSON    {"channel_names", "latitudes", "longitudes"}
    C*H*W float32                   data, row-major (channel, row, column)
"""

import json
import os
import re
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import GridFormatError

MAGIC = b"XGRID1"
MAX_ELEMENTS = 2**31 - 1

PRESSURE_LEVELS = (50, 100, 150, 200, 250, 300, 400, 500, 600, 700, 850, 925, 1000)
SINGLE = "Single"

# name, description, level kind
VARIABLES = (
    ("u10", "X-direction wind at 10m height", SINGLE),
    ("v10", "Y-direction wind at 10m height", SINGLE),
    ("t2m", "Temperature at 2m height", SINGLE),
    ("msl", "Mean sea level pressure", SINGLE),
    ("z", "Geopotential", "pressure"),
    ("q", "Absolute humidity", "pressure"),
    ("u", "X-direction wind", "pressure"),
    ("v", "Y-direction wind", "pressure"),
    ("t", "Temperature", "pressure"),
)
DERIVED = {"ws10": "Wind speed at 10m height, sqrt(u10^2 + v10^2)"}


def expand_channels():
    """All 69 channel names: surface variables, then each upper-air variable at every level."""
    names = []
    for name, _, kind in VARIABLES:
        if kind == SINGLE:
            names.append(name)
        else:
            names.extend(f"{name}{lev}" for lev in PRESSURE_LEVELS)
    return names


def parse_channel(name):
    """Split a channel name into ``(variable, level)``.

    Surface variables map to level ``"Single"``; upper-air names carry their
    pressure level in hPa, e.g. ``"z500" -> ("z", 500)``.
    """
    surface = {v for v, _, k in VARIABLES if k == SINGLE} | set(DERIVED)
    if name in surface:
        return name, SINGLE
    m = re.fullmatch(r"([a-z]+)(\d+)", name)
    upper = {v for v, _, k in VARIABLES if k != SINGLE}
    if m is None or m.group(1) not in upper:
        raise ValueError(f"unknown variable in channel name {name!r}")
    level = int(m.group(2))
    if level not in PRESSURE_LEVELS:
        raise ValueError(f"level {level} hPa in {name!r} is not one of {PRESSURE_LEVELS}")
    return m.group(1), level


def default_latitudes(h):
    return np.linspace(90.0, -90.0, h) if h > 1 else np.zeros(1)


def default_longitudes(w):
    return np.linspace(0.0, 360.0, w, endpoint=False)


@dataclass(eq=False)
class GriddedField:
    """A ``C x H x W`` float32 field with named channels and lat/lon axes."""

    data: np.ndarray
    channel_names: tuple
    latitudes: np.ndarray = None
    longitudes: np.ndarray = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"data must be C x H x W with positive dims, got shape {data.shape}")
        self.data = np.ascontiguousarray(data, dtype=np.float32)
        c, h, w = self.data.shape
        self.channel_names = tuple(str(n) for n in self.channel_names)
        if len(self.channel_names) != c:
            raise ValueError(f"{len(self.channel_names)} channel names for {c} channels")
        if len(set(self.channel_names)) != c:
            raise ValueError("channel names must be unique")
        lat = default_latitudes(h) if self.latitudes is None else np.asarray(self.latitudes, dtype=float)
        lon = default_longitudes(w) if self.longitudes is None else np.asarray(self.longitudes, dtype=float)
        if lat.shape != (h,) or lon.shape != (w,):
            raise ValueError("latitudes/longitudes must have lengths H and W")
        if h > 1:
            d = np.diff(lat)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("latitudes must be strictly monotone")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field values must be finite")
        self.latitudes, self.longitudes = lat, lon

    @property
    def shape(self):
        return self.data.shape

    def channel(self, name):
        try:
            return self.data[self.channel_names.index(name)]
        except ValueError:
            raise KeyError(f"no channel {name!r}; have {list(self.channel_names)}") from None

    def identical(self, other):
        """Bitwise equality of data, names and axes."""
        return (
            self.channel_names == other.channel_names
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
            and self.latitudes.tobytes() == other.latitudes.tobytes()
            and self.longitudes.tobytes() == other.longitudes.tobytes()
        )

    __eq__ = identical

    def with_data(self, data):
        return GriddedField(data, self.channel_names, self.latitudes, self.longitudes)


def encode_grid(field):
    meta = json.dumps(
        {
            "channel_names": list(field.channel_names),
            "latitudes": field.latitudes.tolist(),
            "longitudes": field.longitudes.tolist(),
        }
    ).encode("utf-8")
    c, h, w = field.shape
    header = MAGIC + struct.pack("<IIII", c, h, w, len(meta))
    return header + meta + field.data.astype("<f4").tobytes()


def decode_grid(buf):
    """Parse XGRID1 bytes; raises :class:`GridFormatError` with a specific ``code``."""
    if len(buf) < len(MAGIC) or buf[: len(MAGIC)] != MAGIC:
        raise GridFormatError("bad_magic", "file does not start with XGRID1")
    pos = len(MAGIC)
    if len(buf) < pos + 16:
        raise GridFormatError("truncated", "header shorter than 22 bytes")
    c, h, w, n_meta = struct.unpack_from("<IIII", buf, pos)
    pos += 16
    if min(c, h, w) == 0 or c * h * w > MAX_ELEMENTS:
        raise GridFormatError("dim_overflow", f"dims {c}x{h}x{w} outside 1..{MAX_ELEMENTS} elements")
    if len(buf) < pos + n_meta:
        raise GridFormatError("truncated", f"metadata block of {n_meta} bytes runs past end of file")
    try:
        meta = json.loads(buf[pos : pos + n_meta].decode("utf-8"))
        names = meta["channel_names"]
        lat = np.asarray(meta["latitudes"], dtype=float)
        lon = np.asarray(meta["longitudes"], dtype=float)
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise GridFormatError("bad_metadata", f"cannot parse metadata: {exc}") from None
    pos += n_meta
    need = 4 * c * h * w
    have = len(buf) - pos
    if have < need:
        raise GridFormatError("truncated", f"payload has {have} bytes, header declares {need}")
    if have > need:
        raise GridFormatError("trailing_data", f"{have - need} bytes after the payload")
    data = np.frombuffer(buf, dtype="<f4", count=c * h * w, offset=pos).reshape(c, h, w)
    if not np.all(np.isfinite(data)):
        raise GridFormatError("non_finite", "payload contains NaN or infinity")
    try:
        return GriddedField(data.astype(np.float32), names, lat, lon)
    except ValueError as exc:
        raise GridFormatError("bad_metadata", str(exc)) from None


def write_grid(field, path):
    """Write ``field`` to ``path`` atomically (temp file + rename)."""
    path = os.fspath(path)
    payload = encode_grid(field)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".xgrid-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv_grid(path, channel_name="var"):
    """Read a single-channel grid from CSV: a ``H,W`` header line, then ``H`` rows of ``W`` values."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty CSV grid")
    try:
        h, w = (int(x) for x in lines[0].split(","))
    except ValueError:
        raise ValueError(f"{path}: first line must be 'H,W'") from None
    rows = [[float(x) for x in ln.split(",")] for ln in lines[1:]]
    if len(rows) != h or any(len(r) != w for r in rows):
        raise ValueError(f"{path}: expected {h} rows of {w} values")
    return GriddedField(np.asarray(rows)[None], (channel_name,))


def read_grid(path):
    """Read an XGRID1 file, or a CSV grid if ``path`` ends in ``.csv``."""
    path = os.fspath(path)
    if path.lower().endswith(".csv"):
        return read_csv_grid(path)
    with open(path, "rb") as fh:
        return decode_grid(fh.read())


def derive_wind_speed(field):
    """Return a copy of ``field`` with a ``ws10 = sqrt(u10**2 + v10**2)`` channel appended."""
    u = field.channel("u10").astype(np.float64)
    v = field.channel("v10").astype(np.float64)
    ws = np.sqrt(u * u + v * v).astype(np.float32)
    return GriddedField(
        np.concatenate([field.data, ws[None]]),
        field.channel_names + ("ws10",),
        field.latitudes,
        field.longitudes,
    )
