"""Augmenting-path max-flow with search-tree reuse (Boykov-Kolmogorov style).

Terminal capacities live on the nodes (``cap_source`` / ``cap_sink``), arcs
connect non-terminal nodes and are stored in sister pairs ``(2k, 2k+1)``.
Arc scan order is insertion order and the active list is FIFO, so the cut is
deterministic for a fixed construction order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

_FREE, _S, _T = 0, 1, 2
_NONE, _TERM = -2, -1


class FlowGraph:
    """Directed flow network between implicit source and sink terminals."""

    def __init__(self, n: int = 0):
        self.cap_source = [0.0] * n
        self.cap_sink = [0.0] * n
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.head: list[int] = []
        self.res: list[float] = []

    @property
    def node_count(self) -> int:
        return len(self.adj)

    def add_nodes(self, k: int) -> int:
        base = len(self.adj)
        self.cap_source.extend([0.0] * k)
        self.cap_sink.extend([0.0] * k)
        self.adj.extend([] for _ in range(k))
        return base

    def add_terminal(self, v: int, cap_from_source: float, cap_to_sink: float) -> None:
        if cap_from_source < 0 or cap_to_sink < 0:
            raise ValueError("terminal capacities must be nonnegative")
        self.cap_source[v] += cap_from_source
        self.cap_sink[v] += cap_to_sink

    def add_edge(self, u: int, v: int, cap: float, rev_cap: float = 0.0) -> None:
        if cap < 0 or rev_cap < 0:
            raise ValueError("arc capacities must be nonnegative")
        if u == v:
            return
        a = len(self.head)
        self.head.extend((v, u))
        self.res.extend((cap, rev_cap))
        self.adj[u].append(a)
        self.adj[v].append(a + 1)


@dataclass
class FlowResult:
    flow: float
    source_side: np.ndarray  # True where the node sits on the source side
    graph: FlowGraph
    _labels: np.ndarray = field(repr=False, default=None)


def max_flow(g: FlowGraph) -> FlowResult:
    """Returns the maximum flow and a deterministic minimum cut.

    Free (disconnected) nodes land on the source side by convention, so a
    zero-capacity graph reports every node as source-side.
    """
    n = g.node_count
    head, res, adjacency = g.head, g.res, g.adj
    cs = list(g.cap_source)
    ct = list(g.cap_sink)

    flow = 0.0
    for v in range(n):
        m = min(cs[v], ct[v])
        if m > 0:
            flow += m
            cs[v] -= m
            ct[v] -= m

    label = [_FREE] * n
    parent = [_NONE] * n
    active = deque()
    for v in range(n):
        if cs[v] > 0:
            label[v] = _S
            parent[v] = _TERM
            active.append(v)
        elif ct[v] > 0:
            label[v] = _T
            parent[v] = _TERM
            active.append(v)

    orphans = deque()

    def rooted(x: int) -> bool:
        while True:
            p = parent[x]
            if p == _TERM:
                return True
            if p == _NONE:
                return False
            x = head[p ^ 1] if label[x] == _S else head[p]

    def adopt() -> None:
        while orphans:
            o = orphans.popleft()
            lab = label[o]
            if lab == _S and cs[o] > 0:
                parent[o] = _TERM
                continue
            if lab == _T and ct[o] > 0:
                parent[o] = _TERM
                continue
            found = False
            for a in adjacency[o]:
                w = head[a]
                if label[w] != lab:
                    continue
                ok = res[a ^ 1] > 0 if lab == _S else res[a] > 0
                if ok and rooted(w):
                    parent[o] = (a ^ 1) if lab == _S else a
                    found = True
                    break
            if found:
                continue
            for a in adjacency[o]:
                w = head[a]
                if label[w] != lab:
                    continue
                ok = res[a ^ 1] > 0 if lab == _S else res[a] > 0
                if ok:
                    active.append(w)  # potential parent, let it regrow
                pw = parent[w]
                if pw >= 0:
                    par = head[pw ^ 1] if lab == _S else head[pw]
                    if par == o:
                        parent[w] = _NONE
                        orphans.append(w)
            label[o] = _FREE
            parent[o] = _NONE

    def augment(a: int) -> None:
        nonlocal flow
        # a runs S -> T; find the bottleneck along root-to-root path
        m = res[a]
        x = head[a ^ 1]
        while parent[x] != _TERM:
            pa = parent[x]
            if res[pa] < m:
                m = res[pa]
            x = head[pa ^ 1]
        if cs[x] < m:
            m = cs[x]
        x = head[a]
        while parent[x] != _TERM:
            pa = parent[x]
            if res[pa] < m:
                m = res[pa]
            x = head[pa]
        if ct[x] < m:
            m = ct[x]

        flow += m
        res[a] -= m
        res[a ^ 1] += m
        x = head[a ^ 1]
        while parent[x] != _TERM:
            pa = parent[x]
            res[pa] -= m
            res[pa ^ 1] += m
            nx = head[pa ^ 1]
            if res[pa] <= 0:
                parent[x] = _NONE
                orphans.append(x)
            x = nx
        cs[x] -= m
        if cs[x] <= 0:
            parent[x] = _NONE
            orphans.append(x)
        x = head[a]
        while parent[x] != _TERM:
            pa = parent[x]
            res[pa] -= m
            res[pa ^ 1] += m
            nx = head[pa]
            if res[pa] <= 0:
                parent[x] = _NONE
                orphans.append(x)
            x = nx
        ct[x] -= m
        if ct[x] <= 0:
            parent[x] = _NONE
            orphans.append(x)

    while active:
        v = active[0]
        if label[v] == _FREE:
            active.popleft()
            continue
        boundary = -1
        if label[v] == _S:
            for a in adjacency[v]:
                if res[a] <= 0:
                    continue
                w = head[a]
                lw = label[w]
                if lw == _FREE:
                    label[w] = _S
                    parent[w] = a
                    active.append(w)
                elif lw == _T:
                    boundary = a
                    break
        else:
            for a in adjacency[v]:
                s = a ^ 1
                if res[s] <= 0:
                    continue
                w = head[a]
                lw = label[w]
                if lw == _FREE:
                    label[w] = _T
                    parent[w] = s
                    active.append(w)
                elif lw == _S:
                    boundary = s
                    break
        if boundary < 0:
            active.popleft()
            continue
        augment(boundary)
        adopt()

    g.res = res  # expose residuals for reachability analysis
    g._res_cs = cs
    g._res_ct = ct
    labels = np.array(label, dtype=np.int8)
    return FlowResult(
        flow=flow, source_side=labels != _T, graph=g, _labels=labels
    )


def residual_reachability(g: FlowGraph) -> tuple[np.ndarray, np.ndarray]:
    """After max_flow: (reachable from source, reaching sink) in the residual
    network. Used by the QPBO decode."""
    n = g.node_count
    cs = getattr(g, "_res_cs", None)
    ct = getattr(g, "_res_ct", None)
    if cs is None:
        raise RuntimeError("run max_flow first")
    s_reach = np.zeros(n, dtype=bool)
    q = deque(v for v in range(n) if cs[v] > 0)
    for v in q:
        s_reach[v] = True
    while q:
        u = q.popleft()
        for a in g.adj[u]:
            if g.res[a] > 0:
                w = g.head[a]
                if not s_reach[w]:
                    s_reach[w] = True
                    q.append(w)
    t_reach = np.zeros(n, dtype=bool)
    q = deque(v for v in range(n) if ct[v] > 0)
    for v in q:
        t_reach[v] = True
    while q:
        u = q.popleft()
        for a in g.adj[u]:
            # arc head[a] -> u has residual res[a^1]; we walk backwards
            if g.res[a ^ 1] > 0:
                w = g.head[a]
                if not t_reach[w]:
                    t_reach[w] = True
                    q.append(w)
    return s_reach, t_reach
