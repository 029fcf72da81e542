"""
Connectivity helpers: union-find and window component labelling
"""
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class UnionFind:
    """Disjoint sets over 0..n-1 with union by rank and path compression"""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return ra

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)


def component_labels(n_vertices: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Component label per vertex of an undirected graph given by an edge list"""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    graph = coo_matrix((np.ones(src.shape[0], dtype=np.int8), (src, dst)), shape=(n_vertices, n_vertices))
    _, labels = connected_components(graph.tocsr(), directed=False)
    return labels


class WindowGraph:
    """Component labels for the vertices of a rectangular window of Z^2"""

    def __init__(self, x0: int, x1: int, y0: int, y1: int, labels: np.ndarray):
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.width = x1 - x0 + 1
        self.labels = labels

    def index(self, x: int, y: int) -> int:
        if not (self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1):
            raise KeyError(f"({x}, {y}) lies outside the window")
        return (y - self.y0) * self.width + (x - self.x0)

    def label(self, x: int, y: int) -> int:
        return int(self.labels[self.index(x, y)])

    def connected(self, a: Sequence[int], b: Sequence[int]) -> bool:
        return self.label(*a) == self.label(*b)
