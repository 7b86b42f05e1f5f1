"""Finite graphs carrying spins: the vertex set, weighted edges and graph metric.

Edge weights are stored once per edge and read per model: J_xy for spin
Hamiltonians, r_xy for exclusion processes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from spinlab.errors import DomainError

log = logging.getLogger(__name__)

SpinLike = Union[int, float, str, Fraction]
Edge = Tuple[int, int, float]

# distance between vertices in different components
INFINITE = math.inf


def as_spin(s: SpinLike) -> Fraction:
    """Parse 1/2, "3/2", 0.5, 1 ... into an exact half-integer spin."""
    try:
        f = Fraction(s).limit_denominator(2) if isinstance(s, float) else Fraction(s)
    except (ValueError, ZeroDivisionError, TypeError):
        raise DomainError(f"not a spin magnitude: {s!r}")
    if f <= 0 or (2 * f).denominator != 1:
        raise DomainError(f"spin must be a positive half-integer, got {s!r}")
    if isinstance(s, float) and abs(float(f) - s) > 1e-12:
        raise DomainError(f"spin must be a positive half-integer, got {s!r}")
    return f


@dataclass(frozen=True)
class SpinGraph:
    n_vertices: int
    edges: Tuple[Edge, ...]
    spins: Tuple[Fraction, ...] = field(default=())

    def __post_init__(self):
        if self.n_vertices < 1:
            raise DomainError("a graph needs at least one vertex")
        if not self.spins:
            object.__setattr__(self, "spins", (Fraction(1, 2),) * self.n_vertices)
        if len(self.spins) != self.n_vertices:
            raise DomainError(f"{len(self.spins)} spins for {self.n_vertices} vertices")
        object.__setattr__(self, "spins", tuple(as_spin(s) for s in self.spins))

        seen = set()
        clean: List[Edge] = []
        for x, y, w in self.edges:
            x, y, w = int(x), int(y), float(w)
            if x == y:
                raise DomainError(f"self-loop at vertex {x}")
            for v in (x, y):
                if not 0 <= v < self.n_vertices:
                    raise DomainError(f"edge ({x},{y}) references unknown vertex {v}")
            key = (min(x, y), max(x, y))
            if key in seen:
                raise DomainError(f"duplicate edge {key}")
            if not math.isfinite(w):
                raise DomainError(f"edge {key} has non-finite weight {w}")
            seen.add(key)
            clean.append((x, y, w))
        object.__setattr__(self, "edges", tuple(clean))

    @property
    def vertices(self) -> range:
        return range(self.n_vertices)

    @cached_property
    def nx_graph(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(self.vertices)
        for x, y, w in self.edges:
            G.add_edge(x, y, weight=w)
        return G

    @cached_property
    def distances(self) -> np.ndarray:
        """All-pairs BFS distance matrix (float, inf between components)."""
        D = np.full((self.n_vertices, self.n_vertices), INFINITE)
        for x, row in nx.all_pairs_shortest_path_length(self.nx_graph):
            for y, d in row.items():
                D[x, y] = d
        D.setflags(write=False)
        return D

    @cached_property
    def is_connected(self) -> bool:
        return nx.is_connected(self.nx_graph)

    def weight(self, x: int, y: int) -> float:
        data = self.nx_graph.get_edge_data(x, y)
        if data is None:
            raise DomainError(f"no edge between {x} and {y}")
        return data["weight"]

    def with_weights(self, weights: Sequence[float]) -> "SpinGraph":
        if len(weights) != len(self.edges):
            raise DomainError(f"{len(weights)} weights for {len(self.edges)} edges")
        return SpinGraph(self.n_vertices, tuple((x, y, w) for (x, y, _), w in zip(self.edges, weights)), self.spins)

    def with_spins(self, s: SpinLike) -> "SpinGraph":
        return SpinGraph(self.n_vertices, self.edges, (as_spin(s),) * self.n_vertices)

    @property
    def site_dims(self) -> Tuple[int, ...]:
        return tuple(int(2 * s + 1) for s in self.spins)


def _check_vertex(g: SpinGraph, x: int) -> int:
    if not isinstance(x, (int, np.integer)) or not 0 <= x < g.n_vertices:
        raise DomainError(f"unknown vertex {x!r}")
    return int(x)


def _check_set(g: SpinGraph, X: Iterable[int], what: str) -> List[int]:
    X = sorted({_check_vertex(g, x) for x in X})
    if not X:
        raise DomainError(f"{what} must be nonempty")
    return X


def graph_distance(g: SpinGraph, x: int, y: int) -> float:
    x, y = _check_vertex(g, x), _check_vertex(g, y)
    d = g.distances[x, y]
    return d if d == INFINITE else int(d)


def diameter(g: SpinGraph, X: Iterable[int]) -> float:
    X = _check_set(g, X, "X")
    d = g.distances[np.ix_(X, X)].max()
    return d if d == INFINITE else int(d)


def set_distance(g: SpinGraph, x: int, Y: Iterable[int]) -> float:
    x = _check_vertex(g, x)
    Y = _check_set(g, Y, "Y")
    d = g.distances[x, Y].min()
    return d if d == INFINITE else int(d)


def minimum_spacing(g: SpinGraph) -> float:
    """inf over distinct pairs of d(x,y); 1 for every graph with an edge."""
    if g.n_vertices < 2:
        raise DomainError("minimum spacing needs two vertices")
    D = g.distances.copy()
    np.fill_diagonal(D, INFINITE)
    return float(D.min())


def require_connected(g: SpinGraph, what: str) -> None:
    if not g.is_connected:
        raise DomainError(f"{what} needs a connected graph (graph metric must be finite)")


def bipartition(g: SpinGraph) -> Tuple[List[int], List[int]]:
    """Two-colouring (A, B) with vertex 0's colour as A; DomainError if not bipartite."""
    if not nx.is_bipartite(g.nx_graph):
        raise DomainError("graph is not bipartite")
    colour = nx.bipartite.color(g.nx_graph)
    # colour each component so the smallest vertex lands in A
    for comp in nx.connected_components(g.nx_graph):
        first = min(comp)
        if colour[first] == 1:
            for v in comp:
                colour[v] = 1 - colour[v]
    A = sorted(v for v, c in colour.items() if c == 0)
    B = sorted(v for v, c in colour.items() if c == 1)
    return A, B


def check_bipartition(g: SpinGraph, A: Sequence[int], B: Sequence[int]) -> None:
    A, B = set(A), set(B)
    if A & B or (A | B) != set(g.vertices):
        raise DomainError("A and B must partition the vertex set")
    for x, y, _ in g.edges:
        if (x in A) == (y in A):
            raise DomainError(f"edge ({x},{y}) does not cross the partition")


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def from_edges(n: int, edges: Iterable[Sequence], spins: Optional[Sequence[SpinLike]] = None,
               spin: SpinLike = Fraction(1, 2)) -> SpinGraph:
    edges = tuple((int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0) for e in edges)
    if spins is None:
        spins = (spin,) * n
    return SpinGraph(n, edges, tuple(spins))


def path_graph(L: int, J: float = 1.0, spin: SpinLike = Fraction(1, 2)) -> SpinGraph:
    return from_edges(L, [(x, x + 1, J) for x in range(L - 1)], spin=spin)


def ring_graph(L: int, J: float = 1.0, spin: SpinLike = Fraction(1, 2)) -> SpinGraph:
    """Path plus the closing edge (L−1, 0); needs L ≥ 3 to avoid a duplicate edge."""
    if L < 3:
        raise DomainError("a ring needs at least 3 vertices")
    return from_edges(L, [(x, (x + 1) % L, J) for x in range(L)], spin=spin)


def complete_graph(n: int, J: float = 1.0, spin: SpinLike = Fraction(1, 2)) -> SpinGraph:
    return from_edges(n, [(x, y, J) for x in range(n) for y in range(x + 1, n)], spin=spin)


def star_graph(n_leaves: int, J: float = 1.0, spin: SpinLike = Fraction(1, 2)) -> SpinGraph:
    return from_edges(n_leaves + 1, [(0, y, J) for y in range(1, n_leaves + 1)], spin=spin)


def random_connected_graph(n: int, rng: np.random.Generator, p: float = 0.5,
                           rates: Tuple[float, float] = (0.5, 2.0)) -> SpinGraph:
    """Erdős–Rényi G(n, p) conditioned on connectivity, uniform random positive weights."""
    if n < 2:
        raise DomainError("need at least 2 vertices")
    for _ in range(1000):
        G = nx.gnp_random_graph(n, p, seed=int(rng.integers(2**31)))
        if nx.is_connected(G):
            break
    else:
        raise DomainError(f"no connected G({n},{p}) sample found")
    edges = [(x, y, float(rng.uniform(*rates))) for x, y in sorted(G.edges())]
    return from_edges(n, edges)


def translate(g: SpinGraph, shift: int) -> SpinGraph:
    """Relabel vertex x as (x + shift) mod |V|."""
    n = g.n_vertices
    spins = [None] * n
    for x, s in enumerate(g.spins):
        spins[(x + shift) % n] = s
    return SpinGraph(n, tuple(((x + shift) % n, (y + shift) % n, w) for x, y, w in g.edges), tuple(spins))


# ---------------------------------------------------------------------------
# Graph file: "vertices N", then "x y weight" lines, then optional "spin x s"
# ---------------------------------------------------------------------------

def parse_graph(text: str) -> SpinGraph:
    n: Optional[int] = None
    edges: List[Edge] = []
    spins: Dict[int, Fraction] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if n is None:
                if parts[0] != "vertices" or len(parts) != 2:
                    raise DomainError("first line must be 'vertices N'")
                n = int(parts[1])
            elif parts[0] == "spin":
                if len(parts) != 3:
                    raise DomainError("expected 'spin x s'")
                spins[int(parts[1])] = as_spin(parts[2])
            else:
                if spins:
                    raise DomainError("edge lines must precede spin lines")
                if len(parts) != 3:
                    raise DomainError("expected 'x y weight'")
                edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except (ValueError, IndexError) as exc:
            raise DomainError(f"graph file line {lineno}: {exc}") from exc
    if n is None:
        raise DomainError("graph file is empty")
    for x in spins:
        if not 0 <= x < n:
            raise DomainError(f"spin line for unknown vertex {x}")
    return SpinGraph(n, tuple(edges), tuple(spins.get(x, Fraction(1, 2)) for x in range(n)))


def load_graph(path: Union[str, Path]) -> SpinGraph:
    g = parse_graph(Path(path).read_text(encoding="utf-8"))
    log.debug("loaded graph", extra={"path": str(path), "vertices": g.n_vertices, "edges": len(g.edges)})
    return g


def dump_graph(g: SpinGraph) -> str:
    lines = [f"vertices {g.n_vertices}"]
    lines += [f"{x} {y} {w!r}" for x, y, w in g.edges]
    lines += [f"spin {x} {s}" for x, s in enumerate(g.spins) if s != Fraction(1, 2)]
    return "\n".join(lines) + "\n"
