"""Syndrome decoders over a :class:`DecodingGraph`.

* :func:`mwpm_decode` is the exact reference: shortest paths between flagged
  detectors, a boundary twin per detector, and blossom matching on the
  completed graph.
* :func:`brute_force_decode` minimises over every pairing by subset dynamic
  programming; it is only meant for small syndromes.
* :class:`UnionFindDecoder` grows clusters and peels a spanning forest.
* :class:`BatchMatcher` wraps the PyMatching sparse blossom implementation for
  Monte Carlo throughput.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import networkx as nx
import numpy as np

from .graph import DecodingGraph, UnreachableDetector

MAX_BRUTE_FORCE = 16


@dataclass(frozen=True)
class Matching:
    cost: float
    observables: int
    pairs: tuple[tuple[int, int], ...]  # (a, b) detector pairs; b == boundary for boundary matches


def _distances(graph: DecodingGraph, events: list[int]):
    dist, pred = graph.shortest_paths(events)
    b = graph.boundary
    for i, e in enumerate(events):
        others = [dist[i, f] for f in events if f != e]
        if not np.isfinite(dist[i, b]) and not any(np.isfinite(x) for x in others):
            raise UnreachableDetector(f"detector {e} is isolated")
    return dist, pred


def _pair_mask(graph, events, pred, i, j) -> int:
    target = graph.boundary if j is None else events[j]
    return graph.path_observables(pred[i], events[i], target)


def mwpm_decode(graph: DecodingGraph, events) -> Matching:
    """Exact minimum-weight perfect matching of flagged detectors (boundary allowed)."""
    events = sorted(set(int(e) for e in events))
    if not events:
        return Matching(0.0, 0, ())
    dist, pred = _distances(graph, events)
    b = graph.boundary
    g = nx.Graph()
    n = len(events)
    big = 1.0 + sum(float(x) for x in dist[np.isfinite(dist)])
    for i in range(n):
        if np.isfinite(dist[i, b]):
            g.add_edge(("d", i), ("b", i), weight=big - dist[i, b])
        for j in range(i + 1, n):
            if np.isfinite(dist[i, events[j]]):
                g.add_edge(("d", i), ("d", j), weight=big - dist[i, events[j]])
            g.add_edge(("b", i), ("b", j), weight=big)
    mate = nx.max_weight_matching(g, maxcardinality=True)
    cost = 0.0
    mask = 0
    pairs = []
    for u, v in mate:
        if u[0] == "b" and v[0] == "b":
            continue
        if u[0] == "b":
            u, v = v, u
        i = u[1]
        if v[0] == "b":
            if v[1] != i:
                raise UnreachableDetector("matching used a foreign boundary twin")
            cost += dist[i, b]
            mask ^= _pair_mask(graph, events, pred, i, None)
            pairs.append((events[i], b))
        else:
            j = v[1]
            i, j = min(i, j), max(i, j)
            cost += dist[i, events[j]]
            mask ^= _pair_mask(graph, events, pred, i, j)
            pairs.append((events[i], events[j]))
    if len(pairs) * 2 - sum(1 for p in pairs if p[1] == b) != n:
        raise UnreachableDetector("no perfect matching exists for this syndrome")
    return Matching(float(cost), mask, tuple(sorted(pairs)))


def brute_force_decode(graph: DecodingGraph, events) -> Matching:
    """Minimum over all pairings, by dynamic programming over subsets."""
    events = sorted(set(int(e) for e in events))
    n = len(events)
    if n > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force is limited to {MAX_BRUTE_FORCE} detectors")
    if not n:
        return Matching(0.0, 0, ())
    dist, pred = _distances(graph, events)
    b = graph.boundary

    @lru_cache(maxsize=None)
    def best(mask: int) -> tuple[float, tuple]:
        if mask == 0:
            return 0.0, ()
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        options = []
        if np.isfinite(dist[i, b]):
            c, sol = best(rest)
            options.append((dist[i, b] + c, ((i, None),) + sol))
        for j in range(i + 1, n):
            if rest >> j & 1 and np.isfinite(dist[i, events[j]]):
                c, sol = best(rest & ~(1 << j))
                options.append((dist[i, events[j]] + c, ((i, j),) + sol))
        if not options:
            return float("inf"), ()
        return min(options, key=lambda o: o[0])

    cost, sol = best((1 << n) - 1)
    if not np.isfinite(cost):
        raise UnreachableDetector("no perfect matching exists for this syndrome")
    mask = 0
    pairs = []
    for i, j in sol:
        mask ^= _pair_mask(graph, events, pred, i, j)
        pairs.append((events[i], b if j is None else events[j]))
    return Matching(float(cost), mask, tuple(sorted(pairs)))


class UnionFindDecoder:
    """Weighted cluster growth followed by peeling.

    Odd clusters grow continuously along their incident edges, whose lengths are
    the log-likelihood weights; growth jumps straight to the next edge
    completion. Clusters stop once they are even or reach the boundary.
    """

    def __init__(self, graph: DecodingGraph):
        self.graph = graph
        self.edges = graph.edge_list
        weights = np.array([graph.weight(u, v) for u, v in self.edges])
        self.weights = weights.tolist()
        self.length = np.maximum(weights, 1e-9)
        self.masks = [graph.edges[e][1] for e in self.edges]
        self.adj = graph.neighbours()

    def decode(self, events) -> int:
        g = self.graph
        n = g.num_detectors + 1
        b = g.boundary
        flagged = np.zeros(n, dtype=bool)
        flagged[list(events)] = True
        if not flagged.any():
            return 0
        parent = list(range(n))
        odd = flagged.astype(np.int64).tolist()
        touches = [False] * n
        touches[b] = True
        members = {v: [v] for v in range(n)}
        support = np.zeros(len(self.edges))
        grown = np.zeros(len(self.edges), dtype=bool)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x, y):
            rx, ry = find(x), find(y)
            if rx == ry:
                return
            if len(members[rx]) < len(members[ry]):
                rx, ry = ry, rx
            parent[ry] = rx
            odd[rx] ^= odd[ry]
            touches[rx] = touches[rx] or touches[ry]
            members[rx].extend(members.pop(ry))

        def active_roots():
            return [r for r in members if odd[r] and not touches[r]]

        roots = active_roots()
        while roots:
            # grow every active cluster at unit speed until the next edge completes
            rate: dict[int, int] = {}
            for r in roots:
                for v in members[r]:
                    for _, e in self.adj[v]:
                        if not grown[e]:
                            rate[e] = rate.get(e, 0) + 1
            dt = min((self.length[e] - support[e]) / k for e, k in rate.items())
            fuse = []
            for e, k in rate.items():
                support[e] += dt * k
                if support[e] >= self.length[e] - 1e-9:
                    grown[e] = True
                    fuse.append(self.edges[e])
            for v, w in fuse:
                union(v, w)
            roots = active_roots()

        # Peel a spanning forest of the grown edges. Components are built without
        # the boundary node; only components holding an odd number of flagged
        # detectors are hung from the boundary through one of their grown boundary edges.
        # Tree edges are picked lightest first, so peeling follows likely paths.
        adj_grown: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        boundary_edge: dict[int, int] = {}
        tree = list(range(n))

        def tfind(x):
            while tree[x] != x:
                tree[x] = tree[tree[x]]
                x = tree[x]
            return x

        for e in sorted(np.flatnonzero(grown).tolist(), key=lambda e: (self.weights[e], e)):
            u, v = self.edges[e]
            if v == b:
                if u not in boundary_edge or self.weights[e] < self.weights[boundary_edge[u]]:
                    boundary_edge[u] = e
                continue
            ru, rv = tfind(u), tfind(v)
            if ru == rv:
                continue
            tree[ru] = rv
            adj_grown[u].append((v, e))
            adj_grown[v].append((u, e))
        seen = np.zeros(n, dtype=bool)
        mark = flagged.copy()
        mask = 0
        for s in np.flatnonzero(flagged):
            if seen[s]:
                continue
            seen[s] = True
            comp = [int(s)]
            order: list[tuple[int, int, int]] = []  # (vertex, parent, edge), parents first
            stack = [int(s)]
            while stack:
                x = stack.pop()
                for y, e in adj_grown[x]:
                    if not seen[y]:
                        seen[y] = True
                        comp.append(y)
                        order.append((y, x, e))
                        stack.append(y)
            if sum(bool(mark[v]) for v in comp) % 2:
                anchor = min((v for v in comp if v in boundary_edge),
                             key=lambda v: self.weights[boundary_edge[v]], default=None)
                if anchor is None:
                    raise UnreachableDetector("odd cluster without a boundary connection")
                order = _reroot(order, int(s), anchor)
                mask ^= self.masks[boundary_edge[anchor]]
                mark[anchor] ^= True
            for v, par, e in reversed(order):
                if mark[v]:
                    mask ^= self.masks[e]
                    mark[v] = False
                    mark[par] ^= True
        if mark[:b].any():
            raise UnreachableDetector("union-find left unmatched detectors")
        return mask


def _reroot(order: list[tuple[int, int, int]], root: int, new_root: int) -> list[tuple[int, int, int]]:
    """Re-express a tree (given as parent-first edge list) rooted at ``new_root``."""
    adj: dict[int, list[tuple[int, int]]] = {root: []}
    for v, par, e in order:
        adj.setdefault(v, []).append((par, e))
        adj.setdefault(par, []).append((v, e))
    out = []
    seen = {new_root}
    stack = [new_root]
    while stack:
        x = stack.pop()
        for y, e in adj[x]:
            if y not in seen:
                seen.add(y)
                out.append((y, x, e))
                stack.append(y)
    return out


class BatchMatcher:
    """Minimum-weight perfect matching for many shots through PyMatching."""

    def __init__(self, graph: DecodingGraph):
        import pymatching

        m = pymatching.Matching()
        for (u, v), (p, obs) in graph.edges.items():
            ids = {i for i in range(graph.num_observables) if obs >> i & 1}
            w = max(np.log((1 - p) / p), 0.0)
            if v == graph.boundary:
                m.add_boundary_edge(u, fault_ids=ids, weight=w, error_probability=p)
            else:
                m.add_edge(u, v, fault_ids=ids, weight=w, error_probability=p)
        present = set()
        for u, v in graph.edges:
            present.update((u, v))
        for det in range(graph.num_detectors):
            if det not in present:
                m.add_boundary_edge(det, weight=1e6, error_probability=1e-12)  # keeps node ids dense
        m.ensure_num_fault_ids(graph.num_observables)
        self.matching = m
        self.num_observables = graph.num_observables

    def decode_batch(self, detectors: np.ndarray) -> np.ndarray:
        """(shots, detectors) bool -> (shots, observables) bool predictions."""
        pred = self.matching.decode_batch(detectors.astype(np.uint8))
        pred = np.asarray(pred, dtype=bool)
        if pred.shape[1] < self.num_observables:
            pred = np.pad(pred, ((0, 0), (0, self.num_observables - pred.shape[1])))
        return pred[:, : self.num_observables]
