"""Flat tensor serialization and run configuration.

File format (little-endian throughout):

    bytes 0-6   ASCII magic "FTNSR1\\0"
    byte  7     dtype code: 1=float32, 2=uint8, 3=uint32
    byte  8     ndim, 1..4
    then        ndim * uint32 dimensions
    then        row-major payload, channel-innermost

Rasters are float32 H x W x C arrays, label maps uint8 H x W with the
IGNORE=255 sentinel for unlabeled pixels, region-id maps uint32 H x W.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

MAGIC = b"FTNSR1\x00"
IGNORE = 255

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("u1"), 3: np.dtype("<u4")}
_CODE_FOR_KIND = {"f": 1, "u1": 2, "u4": 3}

# guards against absurd headers; also the float32-exact-integer limit for ids
MAX_ELEMENTS = 2**31


class TensorFormatError(ValueError):
    """Raised on malformed flat tensor files."""


class ConfigError(ValueError):
    """Raised on invalid run configuration."""


@dataclass(frozen=True)
class Raster:
    """Dense float32 grid, shape (height, width, channels)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 3:
            raise ValueError(f"raster must be H x W x C, got shape {v.shape}")
        if v.size and not np.all(np.isfinite(v)):
            raise ValueError("raster contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def channel(self, c: int) -> np.ndarray:
        return self.values[:, :, c]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel integer class ids, 255 = IGNORE."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if lab.ndim != 2:
            raise ValueError(f"label map must be H x W, got shape {lab.shape}")
        object.__setattr__(self, "labels", lab)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def validate_classes(self, class_count: int) -> None:
        bad = (self.labels >= class_count) & (self.labels != IGNORE)
        if np.any(bad):
            raise ValueError(
                f"label map contains ids >= {class_count} that are not IGNORE"
            )


def validate_probability(raster: Raster, what: str = "raster") -> None:
    """Probability rasters must sit in [0, 1] channel-wise."""
    v = raster.values
    if v.size and (v.min() < 0.0 or v.max() > 1.0):
        raise ValueError(f"{what} has values outside [0, 1]")


MODES = ("unary-px", "unary-sp", "crf-color", "crf-flat", "crf-tree")


@dataclass
class RunConfig:
    """Pipeline configuration with documented artifact defaults.

    The defaults are this implementation's choices, not values from any
    benchmark protocol.
    """

    class_count: int = 4
    weights: tuple[float, float, float] = (0.6, 0.3, 0.1)
    gamma: float = 0.1
    lambdas: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    mu_cap: float = 10.0
    epsilon_prob: float = 1e-12
    min_region_px: int = 8
    plateau_policy: str = "raster"
    seed: int = 0
    mode: str = "crf-tree"

    def __post_init__(self):
        self.weights = tuple(float(w) for w in self.weights)
        self.lambdas = tuple(float(l) for l in self.lambdas)
        if len(self.weights) != 3:
            raise ConfigError("weights must have exactly three entries")
        if len(self.lambdas) != 4:
            raise ConfigError("lambdas must have exactly four entries (h, g, c, e)")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ConfigError(
                f"tree weights must be a convex combination, got {self.weights}"
            )
        if any(l < 0 for l in self.lambdas):
            raise ConfigError("lambdas must be nonnegative")
        if self.gamma < 0:
            raise ConfigError("gamma must be nonnegative")
        if self.class_count < 1 or self.class_count > 254:
            raise ConfigError("class_count must be in 1..254")
        if self.min_region_px < 1:
            raise ConfigError("min_region_px must be >= 1")
        if self.plateau_policy != "raster":
            raise ConfigError(f"unknown plateau policy {self.plateau_policy!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}, expected one of {MODES}")

    def to_json(self) -> str:
        d = asdict(self)
        d["weights"] = list(self.weights)
        d["lambdas"] = list(self.lambdas)
        return json.dumps(d, indent=2)


def load_config(path: str | Path) -> RunConfig:
    """Read a UTF-8 JSON config, filling documented defaults for absent keys."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("weights", "lambdas"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return RunConfig(**raw)


def _dtype_code(arr: np.ndarray) -> int:
    if arr.dtype == np.float32:
        return 1
    if arr.dtype == np.uint8:
        return 2
    if arr.dtype == np.uint32:
        return 3
    raise TensorFormatError(f"unsupported dtype {arr.dtype}")


def write_array(arr: np.ndarray, path: str | Path) -> None:
    """Write a raw ndarray in the flat tensor format."""
    arr = np.ascontiguousarray(arr)
    code = _dtype_code(arr)
    if arr.ndim < 1 or arr.ndim > 4:
        raise TensorFormatError(f"ndim must be 1..4, got {arr.ndim}")
    if arr.size > MAX_ELEMENTS:
        raise TensorFormatError("tensor too large for the format")
    if arr.dtype == np.float32 and arr.size and not np.all(np.isfinite(arr)):
        raise TensorFormatError("refusing to write non-finite float payload")
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dims)
        fh.write(payload)


def read_array(path: str | Path) -> np.ndarray:
    """Read a flat tensor file into an ndarray (native byte order)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 9 or data[:7] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic header")
    code, ndim = data[7], data[8]
    if code not in _DTYPE_CODES:
        raise TensorFormatError(f"{path}: unknown dtype code {code}")
    if not 1 <= ndim <= 4:
        raise TensorFormatError(f"{path}: ndim {ndim} outside 1..4")
    off = 9 + 4 * ndim
    if len(data) < off:
        raise TensorFormatError(f"{path}: truncated dimension header")
    dims = struct.unpack(f"<{ndim}I", data[9:off])
    n = 1
    for d in dims:
        n *= d
    if n > MAX_ELEMENTS:
        raise TensorFormatError(f"{path}: dim overflow, {dims} declares {n} elements")
    dtype = _DTYPE_CODES[code]
    expected = off + n * dtype.itemsize
    if len(data) < expected:
        raise TensorFormatError(
            f"{path}: truncated payload, expected {expected - off} bytes, "
            f"got {len(data) - off}"
        )
    if len(data) > expected:
        raise TensorFormatError(f"{path}: trailing bytes after payload")
    arr = np.frombuffer(data, dtype=dtype, count=n, offset=off).reshape(dims)
    return arr.astype(arr.dtype.newbyteorder("="), copy=True)


def write_tensor(obj: Raster | LabelMap, path: str | Path) -> None:
    """Serialize a Raster or LabelMap."""
    if isinstance(obj, Raster):
        write_array(obj.values, path)
    elif isinstance(obj, LabelMap):
        write_array(obj.labels, path)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_tensor(path: str | Path) -> Raster | LabelMap:
    """Deserialize into a Raster (float32) or LabelMap (uint8, 2-dim)."""
    arr = read_array(path)
    if arr.dtype == np.float32:
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise TensorFormatError(f"{path}: float tensor with ndim {arr.ndim} is not a raster")
        return Raster(arr)
    if arr.dtype == np.uint8 and arr.ndim == 2:
        return LabelMap(arr)
    raise TensorFormatError(
        f"{path}: dtype {arr.dtype} / ndim {arr.ndim} is not a Raster or LabelMap"
    )
