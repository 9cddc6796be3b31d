"""Persistent homology over attention point clouds.

H0 comes from a Kruskal sweep (a component's death is the edge that
merges it, so finite H0 lifetimes are exactly the MST edge weights);
H1 from Z/2 boundary-matrix reduction over edges and triangles capped at
the filtration limit. Only H0/H1 are supported and the complex is built
densely, which is fine at the double-digit point counts attention
summaries produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvariantViolation
from .trace_model import AttentionBlock


@dataclass(frozen=True)
class PointCloud:
    points: tuple[tuple[float, ...], ...]
    labels: tuple[tuple[int, int], ...] | None = None  # optional (layer, head) tags

    def __post_init__(self):
        if not self.points:
            raise InvariantViolation("point cloud needs at least one point")
        dim = len(self.points[0])
        for p in self.points:
            if len(p) != dim:
                raise DimensionMismatch(f"point of dimension {len(p)}, expected {dim}")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "PointCloud":
        return cls(tuple(tuple(float(x) for x in row) for row in rows))

    @classmethod
    def from_attention(cls, block: AttentionBlock) -> "PointCloud":
        return cls.from_rows(block.rows())


@dataclass(frozen=True)
class PersistenceDiagram:
    """(birth, death, dim) for classes that die; (birth, dim) for classes
    that survive the filtration cap."""

    pairs: tuple[tuple[float, float, int], ...]
    essential: tuple[tuple[float, int], ...]

    def __post_init__(self):
        for birth, death, _ in self.pairs:
            if death < birth:
                raise InvariantViolation(f"death {death} before birth {birth}")

    def finite_pairs(self, dim: int) -> list[tuple[float, float]]:
        return [(b, d) for b, d, p in self.pairs if p == dim]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def pairwise_distances(cloud: PointCloud) -> np.ndarray:
    """Euclidean distance matrix; the one metric every consumer (and every
    test oracle) shares, so multisets can be compared exactly."""
    pts = np.asarray(cloud.points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def rips_persistence(cloud: PointCloud, max_dim: int = 1, epsilon_cap: float | None = None) -> PersistenceDiagram:
    """Vietoris-Rips persistence up to H1 with edges capped at epsilon_cap
    (default: the largest pairwise distance, so everything connects)."""
    if max_dim not in (0, 1):
        raise InvariantViolation("max_dim must be 0 or 1")
    n = len(cloud.points)
    dist = pairwise_distances(cloud)
    if epsilon_cap is None:
        epsilon_cap = float(dist.max()) if n > 1 else 1.0
    if epsilon_cap <= 0.0:
        raise InvariantViolation("epsilon_cap must be positive")

    edges = [
        (float(dist[i, j]), i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if dist[i, j] <= epsilon_cap
    ]
    edges.sort()

    pairs: list[tuple[float, float, int]] = []
    uf = _UnionFind(n)
    positive_edges: list[int] = []  # indices into `edges` that close a cycle
    for idx, (d, i, j) in enumerate(edges):
        if uf.union(i, j):
            pairs.append((0.0, d, 0))
        else:
            positive_edges.append(idx)
    n_components = len({uf.find(i) for i in range(n)})
    essential: list[tuple[float, int]] = [(0.0, 0)] * n_components

    if max_dim >= 1 and n >= 3:
        edge_index = {(i, j): idx for idx, (_, i, j) in enumerate(edges)}
        triangles = []
        for i in range(n):
            for j in range(i + 1, n):
                if dist[i, j] > epsilon_cap:
                    continue
                for k in range(j + 1, n):
                    f = max(dist[i, j], dist[i, k], dist[j, k])
                    if f <= epsilon_cap:
                        triangles.append((float(f), i, j, k))
        triangles.sort()

        # Reduce triangle columns over edge rows; the surviving low of each
        # column is the positive edge whose cycle the triangle fills.
        low_to_column: dict[int, frozenset[int]] = {}
        paired_edges: set[int] = set()
        for f, i, j, k in triangles:
            column = frozenset((edge_index[(i, j)], edge_index[(i, k)], edge_index[(j, k)]))
            while column:
                low = max(column)
                if low not in low_to_column:
                    break
                column = column ^ low_to_column[low]
            if column:
                low = max(column)
                low_to_column[low] = column
                paired_edges.add(low)
                pairs.append((edges[low][0], f, 1))
        for idx in positive_edges:
            if idx not in paired_edges:
                essential.append((edges[idx][0], 1))

    pairs.sort()
    essential.sort()
    return PersistenceDiagram(tuple(pairs), tuple(essential))


def fragmentation(diagram: PersistenceDiagram) -> float:
    """Total lifetime of finite H0 classes; survivors under the cap are
    excluded because they never die."""
    return math.fsum(d - b for b, d in diagram.finite_pairs(0))


def coherence(diagram: PersistenceDiagram) -> float:
    """Total lifetime of H1 classes (loops) that get filled in."""
    return math.fsum(d - b for b, d in diagram.finite_pairs(1))
