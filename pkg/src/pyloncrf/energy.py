"""Gibbs energy assembly: unaries over tree nodes, four pairwise potentials
over leaf adjacency, and the co-occurrence compatibility matrix.

The reported total energy weighs each active node's unary by its pixel area
so that coarse and fine tree cuts compete on equal per-pixel footing; the
``unary`` function itself is the raw per-region potential
``-(gamma * log a + log p)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .tensorio import RunConfig
from .tree import SegTree


@dataclass
class EnergyModel:
    """Precomputed tables the solver consumes.

    ``unary`` is the raw per-region potential -(gamma log a + log p) built
    from the node's own mean likelihood. ``weighted`` is the aggregated cost
    an active region contributes to the total energy: the per-pixel negative
    log likelihoods of its leaves summed over the region, minus one
    per-region size credit gamma * log a. Summing leaf evidence makes coarse
    and fine cuts compete on identical data terms (a node is never cheaper
    than its best uniform refinement), which is what lets the pairwise terms
    and the size prior, not averaging artifacts, drive the regularization.
    """

    unary: np.ndarray  # node x C raw per-region potentials -(gamma log a + log p)
    weighted: np.ndarray  # node x C aggregated activation costs
    node_area: np.ndarray  # node
    edges: list[tuple[int, int]]  # leaf adjacency pairs
    phi_h: np.ndarray  # per edge
    phi_g: np.ndarray
    phi_c: np.ndarray
    phi_e: np.ndarray
    edge_weight: np.ndarray  # lambda-weighted sum per edge
    mu: np.ndarray  # C x C
    sigmas: dict[str, float]
    lambdas: tuple[float, float, float, float]
    gamma: float

    @property
    def class_count(self) -> int:
        return self.unary.shape[1]


class InfeasibleSolutionError(ValueError):
    """A labeling violating completeness or non-overlap."""


def unary(area: float, p: float, gamma: float, epsilon_prob: float = 1e-12) -> float:
    """-(gamma * log(area) + log(p)), with p clamped to [epsilon_prob, 1]."""
    p = min(1.0, max(epsilon_prob, p))
    return -(gamma * math.log(area) + math.log(p))


def smoothness(xh_i: np.ndarray, xh_j: np.ndarray, sigma_h: float) -> float:
    """exp(-||xh_i - xh_j||^2 / sigma_h): couples visually similar regions."""
    if sigma_h <= 0:
        raise ValueError("sigma_h must be positive")
    d2 = float(np.sum((np.asarray(xh_i, float) - np.asarray(xh_j, float)) ** 2))
    return math.exp(-d2 / sigma_h)


def edge_penalty(theta_ij: float, sigma_g: float) -> float:
    """exp(-theta / sigma_g): theta is the UCM score on the separating edge."""
    if sigma_g <= 0:
        raise ValueError("sigma_g must be positive")
    return math.exp(-theta_ij / sigma_g)


def spatial(xc_i: np.ndarray, xc_j: np.ndarray, sigma_c: float) -> float:
    """exp(-||xc_i - xc_j||^2 / sigma_c) over region centroids."""
    if sigma_c <= 0:
        raise ValueError("sigma_c must be positive")
    d2 = float(np.sum((np.asarray(xc_i, float) - np.asarray(xc_j, float)) ** 2))
    return math.exp(-d2 / sigma_c)


def elevation(xe_i: float, xe_j: float, sigma_e: float) -> float:
    """exp(-|xe_i - xe_j| / sigma_e); only relative differences matter."""
    if sigma_e <= 0:
        raise ValueError("sigma_e must be positive")
    return math.exp(-abs(float(xe_i) - float(xe_j)) / sigma_e)


def pairwise_sum(
    phis: tuple[float, float, float, float],
    lambdas: tuple[float, float, float, float],
) -> float:
    """lambda_h phi^h + lambda_g phi^g + lambda_c phi^c + lambda_e phi^e."""
    return sum(l * p for l, p in zip(lambdas, phis))


def compatibility(counts: np.ndarray, mu_cap: float) -> np.ndarray:
    """Label-compatibility matrix from adjacency co-occurrence counts.

    Row-normalized conditionals are symmetrized by averaging and passed
    through -log; the diagonal is forced to zero and never-seen pairs (and
    anything above the cap) sit at mu_cap.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
        raise ValueError("counts must be a square matrix")
    if not np.allclose(counts, counts.T):
        raise ValueError("co-occurrence counts must be symmetric")
    c = counts.shape[0]
    totals = counts.sum(axis=1)
    cond = np.zeros_like(counts)
    empty = totals == 0
    if np.any(empty):
        warnings.warn(
            f"classes {np.flatnonzero(empty).tolist()} have no adjacency counts; "
            "their compatibility rows are capped",
            stacklevel=2,
        )
    nz = ~empty
    cond[nz] = counts[nz] / totals[nz, None]
    sym = 0.5 * (cond + cond.T)
    mu = np.full((c, c), float(mu_cap))
    pos = sym > 0
    with np.errstate(divide="ignore"):
        mu[pos] = -np.log(sym[pos])
    mu = np.clip(mu, 0.0, mu_cap)
    np.fill_diagonal(mu, 0.0)
    return mu


def potts_mu(class_count: int) -> np.ndarray:
    """Fallback compatibility when no co-occurrence statistics are given."""
    mu = np.ones((class_count, class_count))
    np.fill_diagonal(mu, 0.0)
    return mu


def _median_sigma(values: np.ndarray) -> float:
    """Median with a degenerate-data guard: an all-equal component yields
    zero differences, so any positive sigma gives potential 1 everywhere."""
    if len(values) == 0:
        return 1.0
    m = float(np.median(values))
    return m if m > 0 else 1.0


def count_cooccurrence(region_labels: np.ndarray, edges: list[tuple[int, int]],
                       class_count: int) -> np.ndarray:
    """Symmetric C x C counts of class pairs over adjacent regions; regions
    labeled -1 (all-IGNORE) are skipped."""
    counts = np.zeros((class_count, class_count), dtype=np.int64)
    for a, b in edges:
        la, lb = int(region_labels[a]), int(region_labels[b])
        if la < 0 or lb < 0:
            continue
        counts[la, lb] += 1
        counts[lb, la] += 1
    return counts


def build_energy_model(
    tree: SegTree,
    cfg: RunConfig,
    mu: np.ndarray | None = None,
    lambdas: tuple[float, float, float, float] | None = None,
) -> EnergyModel:
    """Assemble unary and pairwise tables for a segmentation structure.

    Sigma medians are computed per image over this tree's leaf adjacency.
    ``lambdas`` overrides the config (the crf-color baseline zeroes all but
    the smoothness term).
    """
    lam = tuple(lambdas) if lambdas is not None else cfg.lambdas
    c = cfg.class_count
    if tree.mean_likelihood.shape[1] != c:
        raise ValueError(
            f"tree carries {tree.mean_likelihood.shape[1]} likelihood channels, "
            f"config says {c} classes"
        )
    mu = potts_mu(c) if mu is None else np.asarray(mu, dtype=np.float64)
    if mu.shape != (c, c):
        raise ValueError(f"mu must be {c}x{c}")

    p = np.clip(tree.mean_likelihood, cfg.epsilon_prob, 1.0)
    nll = -np.log(p)
    log_a = np.log(np.maximum(tree.area, 1.0))
    un = nll - cfg.gamma * log_a[:, None]
    n = tree.node_count
    data = np.zeros((n, c))
    r = tree.leaf_count
    data[:r] = tree.area[:r, None] * nll[:r]
    for m in range(r, n):  # children precede parents
        c1, c2 = tree.children[m]
        data[m] = data[c1] + data[c2]
    weighted = data - cfg.gamma * log_a[:, None]

    edges = [(a, b) for a, b, _ in tree.leaf_edges]
    thetas = np.array([t for _, _, t in tree.leaf_edges])
    feats = tree.mean_feature
    if feats is None:
        feats = tree.mean_likelihood
    d2_h = np.array(
        [float(np.sum((feats[a] - feats[b]) ** 2)) for a, b in edges]
    )
    d2_c = np.array(
        [
            float(np.sum((tree.centroid[a] - tree.centroid[b]) ** 2))
            for a, b in edges
        ]
    )
    if tree.mean_elevation is not None:
        d_e = np.array(
            [abs(float(tree.mean_elevation[a] - tree.mean_elevation[b])) for a, b in edges]
        )
    else:
        if lam[3] > 0 and edges:
            raise ValueError("lambda_e > 0 but no elevation data attached")
        d_e = np.zeros(len(edges))

    sig = {
        "h": _median_sigma(d2_h),
        "g": _median_sigma(thetas),
        "c": _median_sigma(d2_c),
        "e": _median_sigma(d_e),
    }
    phi_h = np.exp(-d2_h / sig["h"]) if len(edges) else np.zeros(0)
    phi_g = np.exp(-thetas / sig["g"]) if len(edges) else np.zeros(0)
    phi_c = np.exp(-d2_c / sig["c"]) if len(edges) else np.zeros(0)
    phi_e = np.exp(-d_e / sig["e"]) if len(edges) else np.zeros(0)
    weight = lam[0] * phi_h + lam[1] * phi_g + lam[2] * phi_c + lam[3] * phi_e

    model = EnergyModel(
        unary=un, weighted=weighted, node_area=tree.area.astype(np.float64),
        edges=edges, phi_h=phi_h, phi_g=phi_g, phi_c=phi_c, phi_e=phi_e,
        edge_weight=np.asarray(weight, dtype=np.float64), mu=mu, sigmas=sig,
        lambdas=tuple(lam), gamma=cfg.gamma,
    )
    tree.edge_weights = model.edge_weight
    return model


def check_feasible(tree: SegTree, node_labels: np.ndarray) -> None:
    """Every root-to-leaf path must contain exactly one non-zero label."""
    for leaf in range(tree.leaf_count):
        path = tree.path_to_root(leaf)
        active = [n for n in path if node_labels[n] != 0]
        if len(active) != 1:
            raise InfeasibleSolutionError(
                f"path of leaf {leaf} ({path}) has {len(active)} active nodes"
            )


def leaf_labels_of(tree: SegTree, node_labels: np.ndarray) -> np.ndarray:
    """Class index (0-based) per leaf under a feasible activation."""
    out = np.full(tree.leaf_count, -1, dtype=np.int64)
    for leaf in range(tree.leaf_count):
        for n in tree.path_to_root(leaf):
            if node_labels[n] != 0:
                out[leaf] = node_labels[n] - 1
                break
    return out


def total_energy(tree: SegTree, model: EnergyModel, node_labels: np.ndarray) -> float:
    """Independent evaluator: aggregated unaries of active nodes plus
    mu-weighted pairwise sums over leaf adjacency (same-label edges vanish
    through the null diagonal)."""
    check_feasible(tree, node_labels)
    e = 0.0
    for i in np.flatnonzero(node_labels != 0):
        e += model.weighted[i, node_labels[i] - 1]
    leaf_cls = leaf_labels_of(tree, node_labels)
    for (a, b), w in zip(model.edges, model.edge_weight):
        e += model.mu[leaf_cls[a], leaf_cls[b]] * w
    return float(e)
