"""Weighted matching graph built from a graphlike detector error model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .dem import DetectorErrorModel, xor_prob


class UnreachableDetector(ValueError):
    """A flagged detector cannot be paired with anything."""


def edge_weight(p: float) -> float:
    return math.log((1 - p) / p)


@dataclass
class DecodingGraph:
    """Detectors 0..n-1 plus a boundary node n; one edge per endpoint pair.

    Parallel faults with the same observable mask are merged by XOR-probability.
    When parallel faults disagree on the observable mask the most likely one is
    kept (a matching graph carries one label per edge).
    """

    num_detectors: int
    num_observables: int
    edges: dict[tuple[int, int], tuple[float, int]]  # (u, v) with u < v -> (probability, observable mask)

    @property
    def boundary(self) -> int:
        return self.num_detectors

    @classmethod
    def from_dem(cls, dem: DetectorErrorModel) -> "DecodingGraph":
        if not dem.is_graphlike:
            raise ValueError("detector error model is not graphlike; decompose it first")
        nd = dem.num_detectors
        merged: dict[tuple[int, int], dict[int, float]] = {}
        for f in dem.faults:
            if not f.detectors:
                continue
            u, v = (f.detectors[0], nd) if len(f.detectors) == 1 else f.detectors
            slot = merged.setdefault((u, v), {})
            slot[f.observables] = xor_prob(slot.get(f.observables, 0.0), f.probability)
        edges = {}
        for key, options in merged.items():
            obs, p = max(options.items(), key=lambda kv: (kv[1], -kv[0]))
            edges[key] = (min(p, 0.5), obs)
        return cls(nd, dem.num_observables, edges)

    def weight(self, u: int, v: int) -> float:
        p, _ = self.edges[(min(u, v), max(u, v))]
        return edge_weight(p)

    @cached_property
    def _sparse(self) -> csr_matrix:
        n = self.num_detectors + 1
        rows, cols, w = [], [], []
        for (u, v), (p, _) in self.edges.items():
            wt = max(edge_weight(p), 1e-12)  # zero weights would vanish from the sparse matrix
            rows += [u, v]
            cols += [v, u]
            w += [wt, wt]
        return csr_matrix((w, (rows, cols)), shape=(n, n))

    def shortest_paths(self, sources) -> tuple[np.ndarray, np.ndarray]:
        """Distances and predecessors from each source (rows follow ``sources``)."""
        dist, pred = dijkstra(self._sparse, directed=False, indices=list(sources), return_predecessors=True)
        return np.atleast_2d(dist), np.atleast_2d(pred)

    def path_observables(self, pred_row: np.ndarray, source: int, target: int) -> int:
        """Observable mask accumulated along the shortest path ``source`` -> ``target``."""
        mask = 0
        node = target
        while node != source:
            prev = int(pred_row[node])
            if prev < 0:
                raise UnreachableDetector(f"no path from {source} to {target}")
            mask ^= self.edges[(min(prev, node), max(prev, node))][1]
            node = prev
        return mask

    def neighbours(self) -> list[list[tuple[int, int]]]:
        """Adjacency lists of (neighbour, edge index) with edges in ``edge_list`` order."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.num_detectors + 1)]
        for i, (u, v) in enumerate(self.edge_list):
            adj[u].append((v, i))
            adj[v].append((u, i))
        return adj

    @cached_property
    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self.edges)
