# ipsim/graph/graph_builder.py
"""
Finite stand-ins for the transitive graphs the toolkit works on.

Tori replace the Z^d lattices exactly (translations act transitively).
Regular trees and the tetrahedron tree are infinite, so they are truncated
to a ball around a root and every vertex records how far it sits from the
truncation (``interior_radius_map``).
"""
from __future__ import annotations

import logging
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from ipsim.config import config
from ipsim.exceptions import GraphError, SizeCapError

logger = logging.getLogger(__name__)


class GraphKind(str, Enum):
    TORUS = "torus"
    TREE_BALL = "tree"
    TETRA_TREE_BALL = "tetra"
    CUSTOM = "custom"


TREE_KINDS = (GraphKind.TREE_BALL, GraphKind.TETRA_TREE_BALL)


class Graph:
    """Immutable undirected graph on vertices 0..V-1."""

    def __init__(
        self,
        adjacency: Sequence[Iterable[int]],
        kind: GraphKind,
        params: Optional[Dict[str, int]] = None,
        interior_radius: Optional[Sequence[int]] = None,
        root: int = 0,
    ):
        adj = tuple(tuple(sorted(set(int(y) for y in nbrs))) for nbrs in adjacency)
        n = len(adj)
        for x, nbrs in enumerate(adj):
            for y in nbrs:
                if y == x:
                    raise GraphError(f"self-loop at vertex {x}")
                if not 0 <= y < n:
                    raise GraphError(f"vertex {x} has neighbour {y} outside 0..{n - 1}")
                if x not in adj[y]:
                    raise GraphError(f"edge {x}-{y} is not symmetric")

        self._adjacency = adj
        self._kind = GraphKind(kind)
        self._params = dict(params or {})
        self._root = int(root)

        self._nx = nx.Graph()
        self._nx.add_nodes_from(range(n))
        self._nx.add_edges_from((x, y) for x, nbrs in enumerate(adj) for y in nbrs if x < y)

        if interior_radius is None:
            interior_radius = [
                max(nx.single_source_shortest_path_length(self._nx, x).values()) for x in range(n)
            ]
        radius = np.asarray(interior_radius, dtype=np.int64)
        radius.setflags(write=False)
        self._interior_radius = radius

        degrees = np.fromiter((len(a) for a in adj), dtype=np.int64, count=n)
        degrees.setflags(write=False)
        self._degrees = degrees

    # ------------------------------------------------------------------ basics
    @classmethod
    def from_adjacency(cls, adjacency: Sequence[Iterable[int]], label: str = "custom") -> "Graph":
        """Arbitrary small graph; every vertex counts as interior."""
        return cls(adjacency, GraphKind.CUSTOM, params={"label": label})

    @property
    def V(self) -> int:
        return len(self._adjacency)

    @property
    def vertices(self) -> range:
        return range(self.V)

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    @property
    def degree(self) -> int:
        """Uniform degree r (the maximum degree, leaves of truncations excepted)."""
        return int(self._degrees.max()) if self.V else 0

    @property
    def kind(self) -> GraphKind:
        return self._kind

    @property
    def params(self) -> Dict[str, int]:
        return dict(self._params)

    @property
    def root(self) -> int:
        return self._root

    @property
    def interior_radius_map(self) -> np.ndarray:
        return self._interior_radius

    def neighbors(self, x: int) -> Tuple[int, ...]:
        return self._adjacency[x]

    def check_vertex(self, x: int) -> int:
        if not 0 <= int(x) < self.V:
            raise GraphError(f"vertex {x} outside 0..{self.V - 1}")
        return int(x)

    def distances_from(self, x: int, cutoff: Optional[int] = None) -> Dict[int, int]:
        return nx.single_source_shortest_path_length(self._nx, self.check_vertex(x), cutoff=cutoff)

    def without_edge(self, x: int, y: int) -> "Graph":
        """Copy with one edge removed (used to exercise the transitivity audit)."""
        adj = [set(a) for a in self._adjacency]
        adj[x].discard(y)
        adj[y].discard(x)
        return Graph.from_adjacency(adj, label=f"{self._kind.value}-minus-edge")

    def describe(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self._params.items())
        return f"{self._kind.value}({args})"

    def __repr__(self) -> str:
        return f"Graph({self.describe()}, V={self.V}, r={self.degree})"


# ---------------------------------------------------------------------- torus
def torus_coords(v: int, d: int, side: int) -> Tuple[int, ...]:
    return tuple((v // side ** i) % side for i in range(d))


def torus_index(coords: Sequence[int], side: int) -> int:
    return int(sum((int(c) % side) * side ** i for i, c in enumerate(coords)))


def build_torus(d: int, side: int) -> Graph:
    """d-dimensional discrete torus (Z/side)^d with nearest-neighbour edges."""
    if d < 1:
        raise GraphError(f"torus dimension must be >= 1, got {d}")
    if side < 3:
        raise GraphError(f"torus side must be >= 3 for a simple graph, got {side}")
    n = side ** d
    if n > config.MAX_VERTICES:
        raise SizeCapError(f"torus({d}, {side}) has {n} vertices, cap is {config.MAX_VERTICES}")

    lattice = nx.grid_graph(dim=[side] * d, periodic=True)

    def _index(node) -> int:
        coords = node if isinstance(node, tuple) else (node,)
        return torus_index(coords, side)

    adjacency: List[List[int]] = [[] for _ in range(n)]
    for u, v in lattice.edges():
        a, b = _index(u), _index(v)
        adjacency[a].append(b)
        adjacency[b].append(a)

    diameter = d * (side // 2)
    logger.debug("built torus d=%d side=%d V=%d", d, side, n)
    return Graph(
        adjacency,
        GraphKind.TORUS,
        params={"dim": d, "side": side},
        interior_radius=[diameter] * n,
    )


# ---------------------------------------------------------------- tree balls
def tree_ball_size(degree: int, radius: int) -> int:
    return 1 + sum(degree * (degree - 1) ** (m - 1) for m in range(1, radius + 1))


def build_tree_ball(degree: int, radius: int) -> Graph:
    """
    Ball of radius ``radius`` in the Cayley graph of the free product of
    ``degree`` copies of Z/2: vertices are reduced words, neighbours differ
    by one generator on the right.
    """
    if degree < 3:
        raise GraphError(f"tree degree must be >= 3, got {degree}")
    if radius < 1:
        raise GraphError(f"tree radius must be >= 1, got {radius}")
    size = tree_ball_size(degree, radius)
    if size > config.MAX_VERTICES:
        raise SizeCapError(
            f"tree ball (r={degree}, n={radius}) has {size} vertices, cap is {config.MAX_VERTICES}"
        )

    # index -> (last letter, depth)
    last: List[int] = [-1]
    depth: List[int] = [0]
    adjacency: List[List[int]] = [[]]
    frontier = [0]
    for level in range(1, radius + 1):
        nxt = []
        for parent in frontier:
            for g in range(degree):
                if g == last[parent]:
                    continue
                child = len(last)
                last.append(g)
                depth.append(level)
                adjacency.append([parent])
                adjacency[parent].append(child)
                nxt.append(child)
        frontier = nxt

    return Graph(
        adjacency,
        GraphKind.TREE_BALL,
        params={"degree": degree, "radius": radius},
        interior_radius=[radius - dp for dp in depth],
        root=0,
    )


def _reduce(word: Tuple[int, ...], g: int) -> Tuple[int, ...]:
    if word and word[-1] == g:
        return word[:-1]
    return word + (g,)


def _tetra_neighbors(vertex: Tuple[Tuple[int, ...], int]) -> List[Tuple[Tuple[int, ...], int]]:
    cell, corner = vertex
    out = [(cell, c) for c in range(4) if c != corner]
    out.append((_reduce(cell, corner), corner))
    return out


def build_tetra_tree_ball(radius: int) -> Graph:
    """
    Ball around a root vertex of the degree-4 tree whose nodes are replaced
    by tetrahedra. A vertex is (cell, corner): the cells form a 4-regular
    tree, the four corners of a cell form a 4-clique, and corner c of a cell
    carries the single tree edge towards the neighbouring cell across
    generator c.
    """
    if radius < 1:
        raise GraphError(f"tetra-tree radius must be >= 1, got {radius}")

    root = ((), 0)
    index = {root: 0}
    dist = [0]
    frontier = [root]
    for level in range(1, radius + 1):
        nxt = []
        for v in frontier:
            for w in _tetra_neighbors(v):
                if w not in index:
                    index[w] = len(dist)
                    dist.append(level)
                    nxt.append(w)
                    if len(dist) > config.MAX_VERTICES:
                        raise SizeCapError(
                            f"tetra-tree ball of radius {radius} exceeds the cap of {config.MAX_VERTICES} vertices"
                        )
        frontier = nxt

    adjacency: List[List[int]] = [[] for _ in range(len(dist))]
    for v, i in index.items():
        for w in _tetra_neighbors(v):
            j = index.get(w)
            if j is not None:
                adjacency[i].append(j)

    return Graph(
        adjacency,
        GraphKind.TETRA_TREE_BALL,
        params={"radius": radius},
        interior_radius=[radius - dp for dp in dist],
        root=0,
    )


def build_graph(kind: str, **kwargs) -> Graph:
    """Dispatch on the ``graph.type`` of an experiment config."""
    kind = GraphKind(kind)
    if kind == GraphKind.TORUS:
        return build_torus(kwargs["dim"], kwargs["side"])
    if kind == GraphKind.TREE_BALL:
        return build_tree_ball(kwargs["degree"], kwargs["radius"])
    if kind == GraphKind.TETRA_TREE_BALL:
        return build_tetra_tree_ball(kwargs["radius"])
    raise GraphError(f"graph kind {kind.value!r} cannot be built from a config")
