"""Synthetic desk-scale scenes: axis-aligned rectangles plus small car-like
blobs, with noisy likelihoods, blurred per-class boundary maps and elevation.

Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .metrics import boundary_gt
from .tensorio import LabelMap, Raster


@dataclass(frozen=True)
class RectSpec:
    top: int
    left: int
    height: int
    width: int
    cls: int
    elev_offset: float


@dataclass
class SceneSpec:
    height: int = 128
    width: int = 128
    class_count: int = 4
    noise: float = 0.3  # likelihood noise mixing level
    blur: float = 1.5  # boundary blur radius (gaussian sigma)
    seed: int = 0
    rects: list[RectSpec] = field(default_factory=list)  # empty: random layout

    def __post_init__(self):
        if self.noise < 0:
            raise ValueError("noise level must be >= 0")
        if self.class_count < 2:
            raise ValueError("need at least two classes")
        for r in self.rects:
            if (
                r.top < 0 or r.left < 0
                or r.top + r.height > self.height
                or r.left + r.width > self.width
            ):
                raise ValueError(f"rectangle {r} exceeds scene bounds")
            if not 0 <= r.cls < self.class_count:
                raise ValueError(f"rectangle class {r.cls} out of range")


@dataclass
class Scene:
    image: Raster
    gt: LabelMap
    likelihoods: Raster
    boundaries: Raster
    elevation: Raster


def _random_layout(spec: SceneSpec, rng: np.random.Generator) -> list[RectSpec]:
    h, w, c = spec.height, spec.width, spec.class_count
    rects = []
    n_rects = max(3, (h * w) // 2400)
    for i in range(n_rects):
        rh = int(rng.integers(h // 6, max(h // 6 + 1, h // 3)))
        rw = int(rng.integers(w // 6, max(w // 6 + 1, w // 3)))
        top = int(rng.integers(0, h - rh))
        left = int(rng.integers(0, w - rw))
        cls = int(rng.integers(1, c))
        elev = float(2.0 + 4.0 * rng.random()) if cls == 1 else float(rng.random())
        rects.append(RectSpec(top, left, rh, rw, cls, elev))
    # small car-like blobs of the last class, prone to oversmoothing
    small_cls = c - 1
    for _ in range(max(2, n_rects // 2)):
        rh = int(rng.integers(3, 6))
        rw = int(rng.integers(4, 8))
        top = int(rng.integers(0, h - rh))
        left = int(rng.integers(0, w - rw))
        rects.append(RectSpec(top, left, rh, rw, small_cls, 0.8))
    return rects


def _squash(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-4.0 * (x - 0.5)))


_BASE_COLORS = np.array(
    [
        [0.85, 0.85, 0.85],
        [0.25, 0.35, 0.75],
        [0.20, 0.70, 0.30],
        [0.80, 0.25, 0.25],
        [0.75, 0.70, 0.20],
        [0.30, 0.70, 0.75],
        [0.60, 0.35, 0.70],
        [0.45, 0.45, 0.30],
    ]
)


def generate_scene(spec: SceneSpec) -> Scene:
    rng = np.random.default_rng(spec.seed)
    h, w, c = spec.height, spec.width, spec.class_count
    rects = spec.rects if spec.rects else _random_layout(spec, rng)

    gt = np.zeros((h, w), dtype=np.uint8)
    elev = np.zeros((h, w), dtype=np.float64)
    for r in rects:
        gt[r.top : r.top + r.height, r.left : r.left + r.width] = r.cls
        elev[r.top : r.top + r.height, r.left : r.left + r.width] = r.elev_offset
    elev += 0.05 * rng.standard_normal((h, w))
    gt_map = LabelMap(gt)

    # noise amplitude 5*sigma_n makes per-pixel argmax flips common at the
    # working noise levels while keeping sigma_n=0 exactly clean
    onehot = np.zeros((h, w, c), dtype=np.float64)
    for cls in range(c):
        onehot[:, :, cls] = gt == cls
    raw = onehot + 5.0 * spec.noise * rng.uniform(-1.0, 1.0, size=(h, w, c))
    lik = _squash(raw).astype(np.float32)

    # blurred true boundaries plus a smooth low-amplitude texture: a fuzzy
    # edge detector never outputs an exactly flat interior, and the texture
    # basins are what make the watershed oversegment
    bgt = boundary_gt(gt_map, c, width=1)
    bnd = np.empty((h, w, c), dtype=np.float64)
    for cls in range(c):
        ch = gaussian_filter(bgt.values[:, :, cls].astype(np.float64), spec.blur)
        top = ch.max()
        if top > 0:
            ch = ch / top
        texture = gaussian_filter(rng.uniform(0.0, 1.0, size=(h, w)), 2.0)
        bnd[:, :, cls] = ch + 0.12 * texture
    bnd = np.clip(bnd, 0.0, 1.0).astype(np.float32)

    colors = _BASE_COLORS[np.arange(c) % len(_BASE_COLORS)]
    img = colors[gt] + 0.05 * rng.standard_normal((h, w, 3))
    img = np.clip(img, 0.0, 1.0).astype(np.float32)

    return Scene(
        image=Raster(img),
        gt=gt_map,
        likelihoods=Raster(lik),
        boundaries=Raster(bnd),
        elevation=Raster(elev[:, :, None].astype(np.float32)),
    )
