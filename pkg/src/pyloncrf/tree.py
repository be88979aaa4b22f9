"""Segmentation tree: agglomerative clustering of watershed leaves under a
convex combination of boundary, feature and centroid dissimilarities.

Nodes 0..R-1 are the leaves, nodes R..2R-2 the internal merges in order of
creation; the last node is the root. Merge heights are clamped to be
non-decreasing so the dendrogram is ultrametric by construction.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .regions import Rag, RegionPartition, UcmScores
from .tensorio import LabelMap


@dataclass
class SegTree:
    """Merge dendrogram over leaf regions, plus the leaf-adjacency edges the
    CRF couples. A flat baseline is represented as a forest where every leaf
    is its own root (``parent == -1``); ``build_tree`` always returns a
    proper single-root binary tree.
    """

    parent: np.ndarray  # node -> parent id, -1 for roots
    children: list[tuple[int, int] | None]  # None for leaves
    height: np.ndarray  # merge height, 0 for leaves
    area: np.ndarray  # pixels
    centroid: np.ndarray  # node x 2
    mean_likelihood: np.ndarray  # node x C
    mean_feature: np.ndarray | None  # node x F
    mean_elevation: np.ndarray | None  # node
    leaf_count: int
    leaf_ids: np.ndarray  # H x W int32 raster of leaf region ids
    leaf_edges: list[tuple[int, int, float]]  # (leaf a, leaf b, ucm score)
    edge_weights: np.ndarray | None = None  # filled by the energy model

    @property
    def node_count(self) -> int:
        return int(self.parent.shape[0])

    @property
    def root(self) -> int:
        roots = np.flatnonzero(self.parent == -1)
        if len(roots) != 1:
            raise ValueError("tree is a forest, no single root")
        return int(roots[0])

    def is_leaf(self, i: int) -> bool:
        return i < self.leaf_count

    def leaves_under(self, i: int) -> list[int]:
        stack, out = [i], []
        while stack:
            n = stack.pop()
            if self.is_leaf(n):
                out.append(n)
            else:
                stack.extend(self.children[n])
        return sorted(out)

    def path_to_root(self, leaf: int) -> list[int]:
        path = [leaf]
        while self.parent[path[-1]] != -1:
            path.append(int(self.parent[path[-1]]))
        return path

    def to_json(self) -> str:
        nodes = [
            {
                "id": i,
                "parent": int(self.parent[i]),
                "height": float(self.height[i]),
                "area": int(self.area[i]),
                "centroid": [float(self.centroid[i, 0]), float(self.centroid[i, 1])],
            }
            for i in range(self.node_count)
        ]
        return json.dumps({"leaf_count": self.leaf_count, "nodes": nodes}, indent=1)


def _minmax(values: np.ndarray) -> tuple[float, float]:
    if len(values) == 0:
        return 0.0, 1.0
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return lo, lo + 1.0  # constant component normalizes to 0
    return lo, hi


class TreeBuilder:
    """Holds the frozen initial min-max normalization of the three
    dissimilarity components and runs the greedy merging."""

    def __init__(
        self,
        partition: RegionPartition,
        rag: Rag,
        ucm: UcmScores,
        weights: tuple[float, float, float],
    ):
        if partition.mean_likelihood is None:
            raise ValueError("partition needs mean_likelihood (attach_region_means)")
        self.weights = weights
        self.r = partition.region_count
        self.areas = partition.areas.astype(np.float64)
        self.centroids = partition.centroids.copy()
        feats = partition.mean_feature
        self.features = (
            feats.copy() if feats is not None else partition.mean_likelihood.copy()
        )
        self.adj: dict[tuple[int, int], float] = {}  # cluster pair -> D^g base
        for e, score in zip(rag.edges, ucm.scores):
            self.adj[(e.a, e.b)] = float(score)

        dg = np.array([self.adj[k] for k in sorted(self.adj)])
        dh = np.array(
            [
                float(np.linalg.norm(self.features[a] - self.features[b]))
                for a, b in sorted(self.adj)
            ]
        )
        dc = np.array(
            [
                float(np.linalg.norm(self.centroids[a] - self.centroids[b]))
                for a, b in sorted(self.adj)
            ]
        )
        # frozen initial normalization, reused for every recomputed pair
        self.norm_g = _minmax(dg)
        self.norm_h = _minmax(dh)
        self.norm_c = _minmax(dc)

    def _norm(self, v: float, lohi: tuple[float, float]) -> float:
        lo, hi = lohi
        return min(1.0, max(0.0, (v - lo) / (hi - lo)))

    def pair_dissimilarity(self, i: int, j: int, weights=None) -> float:
        """Convex combination of the normalized boundary, feature and
        centroid dissimilarities of an adjacent pair."""
        key = (min(i, j), max(i, j))
        if key not in self.adj:
            raise ValueError(f"regions {i} and {j} are not adjacent")
        w1, w2, w3 = weights if weights is not None else self.weights
        dg = self._norm(self.adj[key], self.norm_g)
        dh = self._norm(
            float(np.linalg.norm(self.features[i] - self.features[j])), self.norm_h
        )
        dc = self._norm(
            float(np.linalg.norm(self.centroids[i] - self.centroids[j])), self.norm_c
        )
        return w1 * dg + w2 * dh + w3 * dc


def combine_dissimilarities(
    dg: float, dh: float, dc: float, weights: tuple[float, float, float]
) -> float:
    """Convex combination of already-normalized component dissimilarities."""
    return weights[0] * dg + weights[1] * dh + weights[2] * dc


def build_tree(
    partition: RegionPartition,
    rag: Rag,
    ucm: UcmScores,
    weights: tuple[float, float, float],
) -> SegTree:
    """Greedy agglomeration: repeatedly merge the adjacent pair with minimum
    combined dissimilarity, recomputing merged statistics area-weighted and
    the boundary component as the area-weighted mean of constituents. Ties
    break toward the smaller (i, j) id pair; heights are clamped monotone.
    """
    b = TreeBuilder(partition, rag, ucm, weights)
    r = b.r
    n_total = 2 * r - 1 if r > 0 else 0
    lik = partition.mean_likelihood
    c_classes = lik.shape[1]
    f_dim = b.features.shape[1]

    parent = np.full(n_total, -1, dtype=np.int64)
    children: list[tuple[int, int] | None] = [None] * n_total
    height = np.zeros(n_total)
    area = np.zeros(n_total)
    centroid = np.zeros((n_total, 2))
    mean_lik = np.zeros((n_total, c_classes))
    mean_feat = np.zeros((n_total, f_dim))
    mean_elev = np.zeros(n_total)
    has_elev = partition.mean_elevation is not None

    area[:r] = b.areas
    centroid[:r] = b.centroids
    mean_lik[:r] = lik
    mean_feat[:r] = b.features
    if has_elev:
        mean_elev[:r] = partition.mean_elevation

    leaf_edges = [
        (e.a, e.b, float(s)) for e, s in zip(rag.edges, ucm.scores)
    ]

    if r == 1:
        return SegTree(
            parent=parent, children=children, height=height, area=area,
            centroid=centroid, mean_likelihood=mean_lik, mean_feature=mean_feat,
            mean_elevation=mean_elev if has_elev else None, leaf_count=1,
            leaf_ids=partition.region_ids.copy(), leaf_edges=leaf_edges,
        )

    # cluster-level adjacency with the D^g base values; reuse builder state
    adj = dict(b.adj)

    def dstar(i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        dg = b._norm(adj[key], b.norm_g)
        dh = b._norm(float(np.linalg.norm(mean_feat[i] - mean_feat[j])), b.norm_h)
        dc = b._norm(float(np.linalg.norm(centroid[i] - centroid[j])), b.norm_c)
        return combine_dissimilarities(dg, dh, dc, weights)

    heap = [(dstar(i, j), i, j) for (i, j) in sorted(adj)]
    heapq.heapify(heap)
    alive = np.ones(n_total, dtype=bool)
    alive[r:] = False
    next_id = r
    prev_height = 0.0

    while next_id < n_total:
        if not heap:
            raise ValueError("region adjacency graph is disconnected")
        d, i, j = heapq.heappop(heap)
        key = (i, j)
        if key not in adj or not alive[i] or not alive[j]:
            continue
        if dstar(i, j) != d:
            continue  # stale priority
        m = next_id
        next_id += 1
        alive[i] = alive[j] = False
        alive[m] = True
        parent[i] = parent[j] = m
        children[m] = (i, j)
        prev_height = max(prev_height, d)
        height[m] = prev_height
        a_i, a_j = area[i], area[j]
        area[m] = a_i + a_j
        centroid[m] = (a_i * centroid[i] + a_j * centroid[j]) / area[m]
        mean_lik[m] = (a_i * mean_lik[i] + a_j * mean_lik[j]) / area[m]
        mean_feat[m] = (a_i * mean_feat[i] + a_j * mean_feat[j]) / area[m]
        mean_elev[m] = (a_i * mean_elev[i] + a_j * mean_elev[j]) / area[m]

        # rewire adjacency of i and j to m; D^g merges area-weighted
        neigh: dict[int, float] = {}
        for old in (i, j):
            for key2 in [k for k in adj if old in k]:
                other = key2[0] if key2[1] == old else key2[1]
                gval = adj.pop(key2)
                if other in (i, j):
                    continue
                if other in neigh:
                    # both i and j touched `other`: weight by merging areas
                    prev = neigh[other]
                    w_prev = a_i if old == j else a_j  # first recorded one
                    w_new = a_i if old == i else a_j
                    neigh[other] = (prev * w_prev + gval * w_new) / (w_prev + w_new)
                else:
                    neigh[other] = gval
        for other, gval in neigh.items():
            nk = (min(m, other), max(m, other))
            adj[nk] = gval
            heapq.heappush(heap, (dstar(nk[0], nk[1]), nk[0], nk[1]))

    return SegTree(
        parent=parent, children=children, height=height, area=area,
        centroid=centroid, mean_likelihood=mean_lik, mean_feature=mean_feat,
        mean_elevation=mean_elev if has_elev else None, leaf_count=r,
        leaf_ids=partition.region_ids.copy(), leaf_edges=leaf_edges,
    )


def flat_tree(partition: RegionPartition, leaf_edges: list[tuple[int, int, float]]) -> SegTree:
    """Degenerate forest for the flat CRF baselines: every leaf is a root."""
    if partition.mean_likelihood is None:
        raise ValueError("partition needs mean_likelihood (attach_region_means)")
    r = partition.region_count
    feats = (
        partition.mean_feature
        if partition.mean_feature is not None
        else partition.mean_likelihood
    )
    return SegTree(
        parent=np.full(r, -1, dtype=np.int64),
        children=[None] * r,
        height=np.zeros(r),
        area=partition.areas.astype(np.float64),
        centroid=partition.centroids.copy(),
        mean_likelihood=partition.mean_likelihood.copy(),
        mean_feature=np.array(feats, dtype=np.float64),
        mean_elevation=(
            partition.mean_elevation.copy()
            if partition.mean_elevation is not None
            else None
        ),
        leaf_count=r,
        leaf_ids=partition.region_ids.copy(),
        leaf_edges=list(leaf_edges),
    )


def cut_at(tree: SegTree, level: float) -> RegionPartition:
    """Flat partition formed by the highest nodes with height <= level."""
    if level < 0:
        raise ValueError("cut level must be >= 0")
    chosen: list[int] = []
    roots = np.flatnonzero(tree.parent == -1)
    stack = [int(x) for x in roots]
    while stack:
        n = stack.pop()
        if tree.height[n] <= level:
            chosen.append(n)
        else:
            stack.extend(tree.children[n])
    # paint: leaf -> chosen ancestor, then relabel densely over pixels
    owner = np.full(tree.leaf_count, -1, dtype=np.int64)
    for n in chosen:
        for leaf in tree.leaves_under(n):
            owner[leaf] = n
    ids = owner[tree.leaf_ids]
    from .regions import _partition_from_ids, _relabel_dense

    return _partition_from_ids(_relabel_dense(ids))


def export_tree(tree: SegTree, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(tree.to_json())
