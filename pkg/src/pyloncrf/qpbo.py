"""Quadratic pseudo-boolean optimization via roof duality.

Every variable gets two nodes (literal and negation), every term is split
half-and-half across the two symmetric copies, and a single max-flow gives a
partial labeling with the persistency property: labeled variables agree with
some global optimum, and overwriting any labeling with the labeled values
never increases the energy (autarky).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maxflow import FlowGraph, max_flow, residual_reachability

UNLABELED = -1


@dataclass
class PseudoBooleanEnergy:
    """E(x) = const + sum_i theta_i(x_i) + sum_ij theta_ij(x_i, x_j).

    Unary terms are (cost at 0, cost at 1); pairwise tables are
    (E00, E01, E10, E11) over variable pair (p, q).
    """

    num_vars: int
    unary: list[tuple[int, float, float]] = field(default_factory=list)
    pairwise: list[tuple[int, int, tuple[float, float, float, float]]] = field(
        default_factory=list
    )
    constant: float = 0.0

    def add_unary(self, p: int, e0: float, e1: float) -> None:
        self.unary.append((p, e0, e1))

    def add_pairwise(self, p: int, q: int, table) -> None:
        if p == q:
            raise ValueError("pairwise term needs two distinct variables")
        self.pairwise.append((p, q, tuple(float(t) for t in table)))

    def evaluate(self, x: np.ndarray) -> float:
        e = self.constant
        for p, e0, e1 in self.unary:
            e += e1 if x[p] else e0
        for p, q, (a, b, c, d) in self.pairwise:
            e += (a, b, c, d)[2 * int(x[p]) + int(x[q])]
        return float(e)


def _node_ids(p: int) -> tuple[int, int]:
    return 2 * p, 2 * p + 1  # literal, negation


def _add_unary_cost(g: FlowGraph, p: int, on_one: float) -> None:
    """cost `on_one` when x_p = 1 (negative values flip to the 0 side)."""
    np_, nn = _node_ids(p)
    if on_one >= 0:
        g.add_terminal(np_, on_one / 2.0, 0.0)
        g.add_terminal(nn, 0.0, on_one / 2.0)
    else:
        g.add_terminal(np_, 0.0, -on_one / 2.0)
        g.add_terminal(nn, -on_one / 2.0, 0.0)


def qpbo(energy: PseudoBooleanEnergy) -> np.ndarray:
    """Partial labeling: entries in {0, 1, UNLABELED}."""
    n = energy.num_vars
    if n == 0:
        return np.zeros(0, dtype=np.int8)
    g = FlowGraph(2 * n)

    net_unary = np.zeros(n)
    for p, e0, e1 in energy.unary:
        net_unary[p] += e1 - e0

    for p, q, (a, b, c, d) in energy.pairwise:
        delta = b + c - a - d
        npp, npn = _node_ids(p)
        nqp, nqn = _node_ids(q)
        if delta >= 0:
            # E = A + (C-A) x_p + (D-C) x_q + delta * [x_p=0][x_q=1]
            net_unary[p] += c - a
            net_unary[q] += d - c
            if delta > 0:
                g.add_edge(npp, nqp, delta / 2.0)
                g.add_edge(nqn, npn, delta / 2.0)
        else:
            # E = A + (C-A) x_p + (B-A) x_q + (-delta) * [x_p=1][x_q=1]
            net_unary[p] += c - a
            net_unary[q] += b - a
            g.add_edge(npn, nqp, -delta / 2.0)
            g.add_edge(nqn, npp, -delta / 2.0)

    for p in range(n):
        if net_unary[p] != 0.0:
            _add_unary_cost(g, p, float(net_unary[p]))

    max_flow(g)
    s_reach, t_reach = residual_reachability(g)

    # side: True = sink side; frees default to source
    side = np.where(t_reach, True, False)
    side[s_reach] = False  # s_reach and t_reach are disjoint after max flow

    out = np.full(n, UNLABELED, dtype=np.int8)
    for p in range(n):
        npp, npn = _node_ids(p)
        det_p = s_reach[npp] or t_reach[npp]
        det_n = s_reach[npn] or t_reach[npn]
        if det_p and det_n and side[npp] != side[npn]:
            out[p] = 1 if side[npp] else 0
    return out
