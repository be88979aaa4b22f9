"""End-to-end orchestration of the five baseline modes.

All baselines share one code path: the mode only switches which structure
(none / flat forest / dendrogram) and which potentials participate, so the
comparisons isolate each pipeline stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import (
    EnergyModel,
    build_energy_model,
    compatibility,
    count_cooccurrence,
    potts_mu,
)
from .pylon import PylonSolution, alpha_expansion, unary_leaf_labels
from .regions import (
    Rag,
    RegionPartition,
    UcmScores,
    attach_region_means,
    build_rag,
    build_ucm,
    fuse_boundaries,
    majority_labels,
    watershed,
)
from .tensorio import LabelMap, Raster, RunConfig, validate_probability
from .tree import SegTree, build_tree, flat_tree


@dataclass
class SegmentResult:
    label_map: LabelMap
    partition: RegionPartition | None = None
    tree: SegTree | None = None
    model: EnergyModel | None = None
    solution: PylonSolution | None = None


def _check_shapes(cfg: RunConfig, likelihoods: Raster, *others: Raster | None) -> None:
    if likelihoods.channels != cfg.class_count:
        raise ValueError(
            f"likelihood raster has {likelihoods.channels} channels, "
            f"config expects {cfg.class_count}"
        )
    hw = (likelihoods.height, likelihoods.width)
    for r in others:
        if r is not None and (r.height, r.width) != hw:
            raise ValueError(
                f"raster shape {(r.height, r.width)} does not match likelihoods {hw}"
            )


def leaf_structure(
    cfg: RunConfig,
    likelihoods: Raster,
    boundaries: Raster,
    elevation: Raster | None = None,
    features: Raster | None = None,
) -> tuple[RegionPartition, Rag, UcmScores]:
    """Watershed leaves with attached statistics plus adjacency and UCM."""
    g = fuse_boundaries(boundaries)
    partition = watershed(g, cfg)
    attach_region_means(partition, likelihoods, elevation, features)
    rag = build_rag(partition, g)
    ucm = build_ucm(rag)
    return partition, rag, ucm


def segment(
    cfg: RunConfig,
    likelihoods: Raster,
    boundaries: Raster | None = None,
    elevation: Raster | None = None,
    features: Raster | None = None,
    mu: np.ndarray | None = None,
) -> SegmentResult:
    """Run one baseline mode end to end.

    ``features`` defaults to the likelihood raster (the network output is a
    legitimate stand-in for deep features); crf-color interprets it as the
    raw color image and drops the boundary/spatial/elevation terms. ``mu``
    defaults to a Potts matrix when no co-occurrence statistics are given.
    """
    mode = cfg.mode
    validate_probability(likelihoods, "likelihood raster")
    _check_shapes(cfg, likelihoods, boundaries, elevation, features)

    if mode == "unary-px":
        pred = np.argmax(likelihoods.values, axis=2).astype(np.uint8)
        return SegmentResult(label_map=LabelMap(pred))

    if boundaries is None:
        raise ValueError(f"mode {mode} needs a boundary raster")

    partition, rag, ucm = leaf_structure(
        cfg, likelihoods, boundaries, elevation, features
    )

    if mode == "unary-sp":
        per_region = np.argmax(partition.mean_likelihood, axis=1)
        pred = per_region[partition.region_ids].astype(np.uint8)
        return SegmentResult(label_map=LabelMap(pred), partition=partition)

    leaf_edges = [
        (e.a, e.b, float(s)) for e, s in zip(rag.edges, ucm.scores)
    ]
    lambdas = None
    if mode == "crf-color":
        if features is None:
            raise ValueError("crf-color needs the color image as features")
        lambdas = (cfg.lambdas[0], 0.0, 0.0, 0.0)
    if mode == "crf-tree":
        structure = build_tree(partition, rag, ucm, cfg.weights)
    else:
        structure = flat_tree(partition, leaf_edges)

    model = build_energy_model(structure, cfg, mu=mu, lambdas=lambdas)
    init = unary_leaf_labels(structure, model)
    solution = alpha_expansion(structure, model, init)
    return SegmentResult(
        label_map=solution.label_map, partition=partition, tree=structure,
        model=model, solution=solution,
    )


def estimate_compatibility(
    cfg: RunConfig,
    pairs: list[tuple[LabelMap, RegionPartition]],
) -> np.ndarray:
    """Co-occurrence counting over training leaves, then -log of the
    symmetrized conditionals with the capped never-seen pairs."""
    from .regions import _boundary_pixel_table

    counts = np.zeros((cfg.class_count, cfg.class_count), dtype=np.int64)
    for gt, partition in pairs:
        if gt.labels.shape != partition.region_ids.shape:
            raise ValueError("ground truth and partition shapes differ")
        labels = majority_labels(partition, gt)
        edges = sorted(_boundary_pixel_table(partition.region_ids))
        counts += count_cooccurrence(labels, edges, cfg.class_count)
    return compatibility(counts, cfg.mu_cap)
