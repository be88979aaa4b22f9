"""Independent oracles: brute-force enumerations the solvers are checked
against. These deliberately re-derive everything from first principles."""

from __future__ import annotations

import itertools

import numpy as np


def brute_force_min_cut(n, cap_source, cap_sink, arcs):
    """Exhaustive minimum s-t cut over all 2^n source-side subsets.

    arcs: list of (u, v, cap). Returns the minimum cut value.
    """
    best = np.inf
    for bits in range(2**n):
        side = [(bits >> i) & 1 for i in range(n)]  # 1 = source side
        cut = 0.0
        for v in range(n):
            if side[v]:
                cut += cap_sink[v]
            else:
                cut += cap_source[v]
        for u, v, cap in arcs:
            if side[u] and not side[v]:
                cut += cap
        best = min(best, cut)
    return best


def enumerate_boolean(energy):
    """All assignments of a PseudoBooleanEnergy with their values."""
    n = energy.num_vars
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits, dtype=np.int8)
        out.append((x, energy.evaluate(x)))
    return out


def antichain_covers(tree):
    """Every feasible active set: antichains covering all leaves exactly."""

    def covers(node):
        options = [[node]]
        ch = tree.children[node]
        if ch is not None:
            for left_cover in covers(ch[0]):
                for right_cover in covers(ch[1]):
                    options.append(left_cover + right_cover)
        return options

    roots = [int(r) for r in np.flatnonzero(tree.parent == -1)]
    all_covers = [[]]
    for r in roots:
        all_covers = [c + extra for c in all_covers for extra in covers(r)]
    return all_covers


def oracle_energy(tree, model, node_labels):
    """From-scratch evaluator (canonical order: active nodes ascending, then
    edges in model order) used to cross-check total_energy."""
    e = 0.0
    for i in range(tree.node_count):
        if node_labels[i] != 0:
            e += model.weighted[i, node_labels[i] - 1]
    leaf_cls = np.full(tree.leaf_count, -1, dtype=np.int64)
    for leaf in range(tree.leaf_count):
        node = leaf
        while node != -1:
            if node_labels[node] != 0:
                leaf_cls[leaf] = node_labels[node] - 1
                break
            node = int(tree.parent[node])
    for (a, b), w in zip(model.edges, model.edge_weight):
        e += model.mu[leaf_cls[a], leaf_cls[b]] * w
    return float(e)


def brute_force_pylon(tree, model, classes):
    """Exhaustive minimum over all feasible cuts x labelings.

    Returns (best_energy, best_node_labels) with the energy evaluated by
    oracle_energy on the winning labeling.
    """
    n = tree.node_count
    leaf_owner_cache = {}
    best_val = np.inf
    best_labels = None
    for cover in antichain_covers(tree):
        key = tuple(cover)
        if key not in leaf_owner_cache:
            owner = np.empty(tree.leaf_count, dtype=np.int64)
            for pos, node in enumerate(cover):
                for leaf in tree.leaves_under(node):
                    owner[leaf] = pos
            leaf_owner_cache[key] = owner
        owner = leaf_owner_cache[key]
        k = len(cover)
        grids = np.indices((len(classes),) * k).reshape(k, -1).T  # combos x k
        lbl = np.asarray(classes)[grids]  # class index per cover position
        un = np.zeros(lbl.shape[0])
        for pos, node in enumerate(cover):
            un += model.weighted[node, lbl[:, pos]]
        pw = np.zeros(lbl.shape[0])
        for (a, b), w in zip(model.edges, model.edge_weight):
            pw += model.mu[lbl[:, owner[a]], lbl[:, owner[b]]] * w
        tot = un + pw
        i = int(np.argmin(tot))
        if tot[i] < best_val:
            best_val = float(tot[i])
            labels = np.zeros(n, dtype=np.int64)
            for pos, node in enumerate(cover):
                labels[node] = int(lbl[i, pos]) + 1
            best_labels = labels
    return oracle_energy(tree, model, best_labels), best_labels


def random_tree(rng, n_leaves):
    """Random binary merge tree over n_leaves leaves, as (parent, children)."""
    parent = np.full(2 * n_leaves - 1, -1, dtype=np.int64)
    children = [None] * (2 * n_leaves - 1)
    alive = list(range(n_leaves))
    nxt = n_leaves
    while len(alive) > 1:
        i, j = sorted(rng.choice(len(alive), size=2, replace=False))
        a, b = alive[i], alive[j]
        parent[a] = parent[b] = nxt
        children[nxt] = (a, b)
        alive = [x for x in alive if x not in (a, b)] + [nxt]
        nxt += 1
    return parent, children


def random_instance(rng, n_leaves, n_classes, potts=False, mu_scale=1.0):
    """Random SegTree + EnergyModel pair for solver tests.

    potts=True gives a uniform off-diagonal mu (always submodular moves);
    otherwise mu is random symmetric nonneg, which can violate the triangle
    inequality and force QPBO moves.
    """
    from pyloncrf.energy import EnergyModel
    from pyloncrf.tree import SegTree

    parent, children = random_tree(rng, n_leaves)
    n = 2 * n_leaves - 1
    areas = np.ones(n)
    for i in range(n_leaves):
        areas[i] = rng.integers(1, 5)
    for m in range(n_leaves, n):
        c1, c2 = children[m]
        areas[m] = areas[c1] + areas[c2]
    tree = SegTree(
        parent=parent,
        children=children,
        height=np.zeros(n),
        area=areas,
        centroid=np.zeros((n, 2)),
        mean_likelihood=np.full((n, n_classes), 1.0 / n_classes),
        mean_feature=None,
        mean_elevation=None,
        leaf_count=n_leaves,
        leaf_ids=np.arange(n_leaves, dtype=np.int32)[None, :],
        leaf_edges=[],
    )
    edges = []
    for a in range(n_leaves - 1):
        edges.append((a, a + 1))  # chain keeps it connected
    extra = rng.integers(0, n_leaves + 1)
    for _ in range(extra):
        a, b = rng.choice(n_leaves, size=2, replace=False)
        key = (min(int(a), int(b)), max(int(a), int(b)))
        if key not in edges:
            edges.append(key)
    weighted = rng.normal(0.0, 2.0, size=(n, n_classes))
    if potts:
        mu = np.ones((n_classes, n_classes)) * mu_scale
        np.fill_diagonal(mu, 0.0)
    else:
        raw = rng.uniform(0.0, 3.0 * mu_scale, size=(n_classes, n_classes))
        mu = 0.5 * (raw + raw.T)
        np.fill_diagonal(mu, 0.0)
    edge_weight = rng.uniform(0.0, 2.0, size=len(edges))
    model = EnergyModel(
        unary=weighted / areas[:, None],
        weighted=weighted,
        node_area=areas,
        edges=edges,
        phi_h=np.zeros(len(edges)),
        phi_g=np.zeros(len(edges)),
        phi_c=np.zeros(len(edges)),
        phi_e=np.zeros(len(edges)),
        edge_weight=edge_weight,
        mu=mu,
        sigmas={"h": 1.0, "g": 1.0, "c": 1.0, "e": 1.0},
        lambdas=(1.0, 1.0, 1.0, 1.0),
        gamma=0.0,
    )
    tree.edge_weights = edge_weight
    return tree, model
