"""Boundary fusion, watershed oversegmentation, region adjacency, UCM.

The watershed is a Meyer priority flood seeded at regional minima with a
deterministic (value, raster-index, region) heap key, so identical inputs
always give byte-identical partitions. Every pixel is assigned to a region;
there are no watershed-line pixels.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensorio import IGNORE, Raster, RunConfig, read_array, write_array

# 4-connectivity offsets, raster order
_NBR = ((-1, 0), (0, -1), (0, 1), (1, 0))


@dataclass
class RegionPartition:
    """Dense watershed leaves: per-pixel region id plus per-region stats.

    Mean statistics (elevation, feature, likelihood) are attached lazily by
    :func:`attach_region_means` because they depend on which rasters a given
    pipeline mode feeds in.
    """

    region_ids: np.ndarray  # H x W int32, ids 0..R-1
    areas: np.ndarray  # R
    centroids: np.ndarray  # R x 2, (row, col) float
    mean_elevation: np.ndarray | None = None  # R
    mean_feature: np.ndarray | None = None  # R x F
    mean_likelihood: np.ndarray | None = None  # R x C

    @property
    def region_count(self) -> int:
        return int(self.areas.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.region_ids.shape


@dataclass(frozen=True)
class RagEdge:
    a: int
    b: int
    boundary_pixels: np.ndarray  # k x 2 (row, col), both sides, deduplicated
    strength: float  # mean fused boundary value over boundary_pixels


@dataclass
class Rag:
    """Region adjacency graph over a partition (4-neighborhood)."""

    region_count: int
    edges: list[RagEdge]

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(e.a, e.b): i for i, e in enumerate(self.edges)}


@dataclass
class UcmScores:
    """Per-RAG-edge ultrametric scores: the (clamped) merge threshold at which
    the edge's two regions first share a cluster."""

    scores: np.ndarray  # aligned with Rag.edges
    merge_order: list[tuple[int, int, float]]  # (cluster_a, cluster_b, height)


def fuse_boundaries(boundary: Raster) -> Raster:
    """Collapse per-class boundary probabilities to a single landscape by
    per-pixel max, so strong edges always dominate weak ones."""
    if boundary.channels < 1:
        raise ValueError("boundary raster needs at least one channel")
    v = boundary.values
    if v.size and (v.min() < 0.0 or v.max() > 1.0):
        raise ValueError("boundary probabilities must lie in [0, 1]")
    return Raster(v.max(axis=2, keepdims=True))


def _regional_minima(g: np.ndarray) -> list[list[int]]:
    """Plateau-aware regional minima of g, each as a list of flat indices.

    A minimum is a 4-connected component of equal value with no strictly
    lower neighbor. Components are discovered in raster order.
    """
    h, w = g.shape
    flat = g.ravel()
    visited = np.zeros(h * w, dtype=bool)
    minima = []
    for start in range(h * w):
        if visited[start]:
            continue
        val = flat[start]
        stack = [start]
        visited[start] = True
        comp = []
        is_min = True
        while stack:
            p = stack.pop()
            comp.append(p)
            r, c = divmod(p, w)
            for dr, dc in _NBR:
                rr, cc = r + dr, c + dc
                if not (0 <= rr < h and 0 <= cc < w):
                    continue
                q = rr * w + cc
                fq = flat[q]
                if fq == val:
                    if not visited[q]:
                        visited[q] = True
                        stack.append(q)
                elif fq < val:
                    is_min = False
        if is_min:
            comp.sort()
            minima.append(comp)
        else:
            # non-minimal plateau: component fully explored, leave marks
            pass
    return minima


def watershed(g: Raster, cfg: RunConfig) -> RegionPartition:
    """Meyer flooding of the fused boundary landscape from regional minima.

    Plateau ties are broken by (value, raster index, region id), regions
    smaller than ``cfg.min_region_px`` are absorbed into the neighbor with
    the weakest shared boundary, and ids are relabeled densely in raster
    order of first occurrence.
    """
    if g.channels != 1:
        raise ValueError("watershed expects a single-channel landscape")
    land = g.values[:, :, 0].astype(np.float64)
    h, w = land.shape
    flat = land.ravel()
    labels = np.full(h * w, -1, dtype=np.int64)

    heap: list[tuple[float, int, int]] = []
    for rid, comp in enumerate(_regional_minima(land)):
        for p in comp:
            labels[p] = rid
        for p in comp:
            r, c = divmod(p, w)
            for dr, dc in _NBR:
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w:
                    q = rr * w + cc
                    if labels[q] < 0:
                        heapq.heappush(heap, (flat[q], q, rid))

    while heap:
        _, p, rid = heapq.heappop(heap)
        if labels[p] >= 0:
            continue
        labels[p] = rid
        r, c = divmod(p, w)
        for dr, dc in _NBR:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w:
                q = rr * w + cc
                if labels[q] < 0:
                    heapq.heappush(heap, (flat[q], q, rid))

    labels = labels.reshape(h, w)
    labels = _absorb_small_regions(labels, land, cfg.min_region_px)
    labels = _relabel_dense(labels)
    return _partition_from_ids(labels)


def _relabel_dense(labels: np.ndarray) -> np.ndarray:
    """Relabel ids densely by first occurrence in raster order."""
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(int(uniq.max()) + 1, dtype=np.int64)
    remap[uniq[order]] = np.arange(len(uniq))
    return remap[flat].reshape(labels.shape)


def _boundary_pixel_table(labels: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """Deduplicated shared-boundary pixels (flat indices, both sides) per
    4-adjacent region pair."""
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    keys = []
    pix = []
    for (sa, sb, ia, ib) in (
        (np.s_[:, :-1], np.s_[:, 1:], np.s_[:, :-1], np.s_[:, 1:]),
        (np.s_[:-1, :], np.s_[1:, :], np.s_[:-1, :], np.s_[1:, :]),
    ):
        a, b = labels[sa].ravel(), labels[sb].ravel()
        pa, pb = idx[ia].ravel(), idx[ib].ravel()
        m = a != b
        lo, hi = np.minimum(a[m], b[m]), np.maximum(a[m], b[m])
        k = lo.astype(np.int64) * (labels.max() + 1) + hi
        keys.append(np.concatenate([k, k]))
        pix.append(np.concatenate([pa[m], pb[m]]))
    if not keys or sum(len(k) for k in keys) == 0:
        return {}
    allk = np.concatenate(keys)
    allp = np.concatenate(pix)
    combo = np.unique(np.stack([allk, allp], axis=1), axis=0)
    out: dict[tuple[int, int], np.ndarray] = {}
    base = int(labels.max()) + 1
    split = np.searchsorted(combo[:, 0], np.unique(combo[:, 0]))
    bounds = list(split) + [combo.shape[0]]
    for s, e in zip(bounds[:-1], bounds[1:]):
        key = int(combo[s, 0])
        out[(key // base, key % base)] = combo[s:e, 1]
    return out


def _boundary_strengths(
    labels: np.ndarray, land: np.ndarray
) -> dict[tuple[int, int], tuple[float, int]]:
    """Mean landscape value over shared-boundary pixels (both sides) per
    adjacent region pair, plus the boundary pixel count."""
    flat = land.ravel()
    return {
        key: (float(np.mean(flat[p])), len(p))
        for key, p in _boundary_pixel_table(labels).items()
    }


def _absorb_small_regions(labels: np.ndarray, land: np.ndarray, min_px: int) -> np.ndarray:
    labels = labels.copy()
    while True:
        ids, counts = np.unique(labels, return_counts=True)
        if len(ids) <= 1:
            return labels
        small = [(counts[i], ids[i]) for i in range(len(ids)) if counts[i] < min_px]
        if not small:
            return labels
        small.sort()
        _, victim = small[0]
        strengths = _boundary_strengths(labels, land)
        best = None
        for (a, b), (strength, _) in strengths.items():
            if a == victim or b == victim:
                other = b if a == victim else a
                cand = (strength, other)
                if best is None or cand < best:
                    best = cand
        if best is None:  # isolated region, nothing to merge into
            return labels
        labels[labels == victim] = best[1]


def _partition_from_ids(labels: np.ndarray) -> RegionPartition:
    h, w = labels.shape
    r_count = int(labels.max()) + 1 if labels.size else 0
    areas = np.bincount(labels.ravel(), minlength=r_count).astype(np.int64)
    rows, cols = np.indices((h, w))
    csum_r = np.bincount(labels.ravel(), weights=rows.ravel(), minlength=r_count)
    csum_c = np.bincount(labels.ravel(), weights=cols.ravel(), minlength=r_count)
    centroids = np.stack([csum_r / areas, csum_c / areas], axis=1)
    return RegionPartition(
        region_ids=labels.astype(np.int32), areas=areas, centroids=centroids
    )


def region_means(region_ids: np.ndarray, raster: Raster) -> np.ndarray:
    """Per-region channel means of a raster, shape (R, C)."""
    r_count = int(region_ids.max()) + 1
    flat_ids = region_ids.ravel()
    areas = np.bincount(flat_ids, minlength=r_count)
    out = np.empty((r_count, raster.channels), dtype=np.float64)
    for c in range(raster.channels):
        sums = np.bincount(
            flat_ids, weights=raster.values[:, :, c].ravel(), minlength=r_count
        )
        out[:, c] = sums / areas
    return out


def attach_region_means(
    partition: RegionPartition,
    likelihood: Raster | None = None,
    elevation: Raster | None = None,
    feature: Raster | None = None,
) -> RegionPartition:
    """Fill the per-region mean statistics used by the tree and the energy."""
    ids = partition.region_ids
    if likelihood is not None:
        partition.mean_likelihood = region_means(ids, likelihood)
    if elevation is not None:
        partition.mean_elevation = region_means(ids, elevation)[:, 0]
    if feature is not None:
        partition.mean_feature = region_means(ids, feature)
    return partition


def majority_labels(partition: RegionPartition, gt: "LabelMap") -> np.ndarray:
    """Majority ground-truth class per region, IGNORE pixels excluded.

    Regions that are entirely IGNORE get -1.
    """
    from .tensorio import LabelMap  # local to avoid cycle in type checkers

    assert isinstance(gt, LabelMap)
    ids = partition.region_ids.ravel()
    lab = gt.labels.ravel()
    keep = lab != IGNORE
    r_count = partition.region_count
    out = np.full(r_count, -1, dtype=np.int64)
    if not np.any(keep):
        return out
    classes = int(lab[keep].max()) + 1
    votes = np.zeros((r_count, classes), dtype=np.int64)
    np.add.at(votes, (ids[keep], lab[keep].astype(np.int64)), 1)
    counted = votes.sum(axis=1) > 0
    out[counted] = votes[counted].argmax(axis=1)
    return out


def build_rag(partition: RegionPartition, g: Raster) -> Rag:
    """One edge per 4-adjacent region pair; strength is the mean fused
    boundary value over the shared-boundary pixels on both sides."""
    ids = partition.region_ids
    h, w = ids.shape
    flat = g.values[:, :, 0].ravel()
    edges = []
    for (a, b), p in sorted(_boundary_pixel_table(ids).items()):
        coords = np.stack([p // w, p % w], axis=1)
        edges.append(
            RagEdge(a=int(a), b=int(b), boundary_pixels=coords,
                    strength=float(np.mean(flat[p])))
        )
    return Rag(region_count=partition.region_count, edges=edges)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        self.parent[self.find(b)] = self.find(a)


def build_ucm(rag: Rag) -> UcmScores:
    """Greedy agglomeration by ascending edge strength.

    Inter-cluster strength is recomputed as the boundary-pixel-weighted mean
    of the constituent edge strengths, merge heights are clamped to be
    non-decreasing, and each original RAG edge is scored with the height at
    which its endpoints first merge. Components of a disconnected RAG never
    merge; their edges keep intra-component scores and any queries across
    components are pinned at 1.0 by convention.
    """
    n = rag.region_count
    scores = np.full(len(rag.edges), 1.0)
    if n == 0 or not rag.edges:
        return UcmScores(scores=scores, merge_order=[])

    uf = _UnionFind(n)
    # cluster-pair state: strength and boundary weight, keyed by root pair
    pair_state: dict[tuple[int, int], tuple[float, float]] = {}
    # original edges waiting to be scored, keyed by root pair
    pending: dict[tuple[int, int], list[int]] = {}
    canon = list(range(n))  # smallest original id in each cluster, per root

    for i, e in enumerate(rag.edges):
        key = (min(e.a, e.b), max(e.a, e.b))
        pair_state[key] = (e.strength, float(len(e.boundary_pixels)))
        pending.setdefault(key, []).append(i)

    heap = [(s, key[0], key[1]) for key, (s, _) in pair_state.items()]
    heapq.heapify(heap)
    merge_order: list[tuple[int, int, float]] = []
    prev_height = 0.0

    while heap:
        strength, ca, cb = heapq.heappop(heap)
        key = (ca, cb)
        state = pair_state.get(key)
        if state is None or state[0] != strength:
            continue  # stale entry
        ra, rb = uf.find(ca), uf.find(cb)
        if ra == rb:
            del pair_state[key]
            continue
        height = max(strength, prev_height)
        prev_height = height
        for ei in pending.pop(key, ()):
            scores[ei] = height
        merge_order.append((ca, cb, height))
        del pair_state[key]

        uf.union(ra, rb)
        root = uf.find(ra)
        new_id = min(canon[ra], canon[rb])
        canon[root] = new_id

        # collect surviving neighbor pairs of the merged cluster
        absorb: dict[int, tuple[float, float, list[int]]] = {}
        for old in (ca, cb):
            stale = [k for k in pair_state if old in k]
            for k in stale:
                other = k[0] if k[1] == old else k[1]
                s, wgt = pair_state.pop(k)
                idxs = pending.pop(k, [])
                if other in absorb:
                    s0, w0, i0 = absorb[other]
                    absorb[other] = (
                        (s0 * w0 + s * wgt) / (w0 + wgt),
                        w0 + wgt,
                        i0 + idxs,
                    )
                else:
                    absorb[other] = (s, wgt, idxs)
        for other, (s, wgt, idxs) in absorb.items():
            ro = uf.find(other)
            oid = canon[ro]
            nk = (min(new_id, oid), max(new_id, oid))
            if nk[0] == nk[1]:
                for ei in idxs:
                    scores[ei] = max(scores[ei], 0.0)  # same cluster already
                continue
            if nk in pair_state:
                s0, w0 = pair_state[nk]
                pair_state[nk] = ((s0 * w0 + s * wgt) / (w0 + wgt), w0 + wgt)
                pending.setdefault(nk, []).extend(idxs)
            else:
                pair_state[nk] = (s, wgt)
                if idxs:
                    pending.setdefault(nk, []).extend(idxs)
            heapq.heappush(heap, (pair_state[nk][0], nk[0], nk[1]))

    return UcmScores(scores=scores, merge_order=merge_order)


def write_partition(partition: RegionPartition, path: str | Path) -> None:
    """Region ids as a uint32 flat tensor plus a sidecar stats JSON."""
    write_array(partition.region_ids.astype(np.uint32), path)
    stats = {
        "region_count": partition.region_count,
        "areas": partition.areas.tolist(),
        "centroids": partition.centroids.tolist(),
    }
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(stats, fh)


def read_partition(path: str | Path) -> RegionPartition:
    ids = read_array(path)
    if ids.dtype != np.uint32 or ids.ndim != 2:
        raise ValueError(f"{path}: not a region-id tensor")
    return _partition_from_ids(ids.astype(np.int64))
