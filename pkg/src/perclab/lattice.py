"""Geometry of the hypercubic lattice: boxes, boundaries, edge lists.

Vertices are plain tuples of ints, edges are lexicographically ordered
vertex pairs.  All derived lists come out in a canonical deterministic
order so that repeated constructions (and the seeded samplers built on
top) are reproducible bit for bit.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

Vertex = tuple[int, ...]
Edge = tuple[Vertex, Vertex]

# Desk-scale guard: coordinates beyond this would risk overflowing the
# 64-bit index arithmetic in the kernels, so reject loudly instead.
MAX_COORD = 2**31 - 2


def origin(d: int) -> Vertex:
    return (0,) * d


def _check_vertex(v: Vertex, d: int) -> None:
    if len(v) != d:
        raise ValueError(f"vertex {v} has dimension {len(v)}, expected {d}")
    for c in v:
        if not isinstance(c, int):
            raise TypeError(f"vertex {v} has non-integer coordinate {c!r}")
        if abs(c) > MAX_COORD:
            raise ValueError(f"coordinate {c} exceeds supported range ±{MAX_COORD}")


def canonical_edge(u: Vertex, v: Vertex) -> Edge:
    """Store the smaller endpoint first (lexicographic tuple order)."""
    return (u, v) if u <= v else (v, u)


def neighbors(v: Vertex) -> Iterator[Vertex]:
    """The 2d nearest neighbours of v, in axis order, minus before plus."""
    for i in range(len(v)):
        yield v[:i] + (v[i] - 1,) + v[i + 1:]
        yield v[:i] + (v[i] + 1,) + v[i + 1:]


class VertexSet:
    """A finite set of lattice vertices containing the origin.

    Membership queries go through a frozenset; iteration and the derived
    edge lists use sorted order.  Instances are immutable after
    construction and safe to share between threads.
    """

    def __init__(self, vertices: Iterable[Vertex]):
        vs = {tuple(v) for v in vertices}
        if not vs:
            raise ValueError("vertex set is empty")
        d = len(next(iter(vs)))
        if d < 1:
            raise ValueError("vertices must have dimension >= 1")
        for v in vs:
            _check_vertex(v, d)
        if origin(d) not in vs:
            raise ValueError("vertex set must contain the origin")
        self._set = frozenset(vs)
        self.dim = d
        self.vertices: tuple[Vertex, ...] = tuple(sorted(vs))
        self._internal: tuple[Edge, ...] | None = None
        self._boundary: tuple[tuple[Edge, Vertex], ...] | None = None

    def __contains__(self, v: Vertex) -> bool:
        return v in self._set

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self) -> Iterator[Vertex]:
        return iter(self.vertices)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VertexSet) and self._set == other._set

    def __hash__(self) -> int:
        return hash(self._set)

    def __repr__(self) -> str:
        if len(self.vertices) <= 4:
            return f"VertexSet({list(self.vertices)})"
        return f"VertexSet(<{len(self.vertices)} vertices, d={self.dim}>)"

    @property
    def internal_edges(self) -> tuple[Edge, ...]:
        """All nearest-neighbour edges with both endpoints in the set."""
        if self._internal is None:
            edges = set()
            for v in self.vertices:
                for w in neighbors(v):
                    if w in self._set:
                        edges.add(canonical_edge(v, w))
            self._internal = tuple(sorted(edges))
        return self._internal

    @property
    def boundary_edges(self) -> tuple[tuple[Edge, Vertex], ...]:
        """Edges {x,y} with x inside and y outside, tagged with inner x."""
        if self._boundary is None:
            out = []
            for v in self.vertices:
                for w in neighbors(v):
                    if w not in self._set:
                        out.append((canonical_edge(v, w), v))
            out.sort()
            self._boundary = tuple(out)
        return self._boundary

    def max_norm(self) -> int:
        """max over vertices of the sup-norm; the smallest n with S ⊆ Λ_n."""
        return max(max(abs(c) for c in v) for v in self.vertices)


class Box(VertexSet):
    """The box Λ_n = {-n,...,n}^d viewed as a VertexSet."""

    def __init__(self, d: int, n: int):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        if n < 0:
            raise ValueError("radius must be >= 0")
        if n > MAX_COORD:
            raise ValueError(f"radius {n} exceeds supported range {MAX_COORD}")
        rng = range(-n, n + 1)
        vs = [(c,) for c in rng]
        for _ in range(d - 1):
            vs = [v + (c,) for v in vs for c in rng]
        super().__init__(vs)
        self.d = d
        self.n = n

    @property
    def boundary_vertices(self) -> tuple[Vertex, ...]:
        """∂Λ_n = Λ_n \\ Λ_{n-1}; for n = 0 just the origin."""
        if self.n == 0:
            return (origin(self.d),)
        return tuple(v for v in self.vertices
                     if max(abs(c) for c in v) == self.n)

    def __repr__(self) -> str:
        return f"Box(d={self.d}, n={self.n})"


def make_box(d: int, n: int) -> Box:
    """Construct Λ_n; rejects d = 0 and negative radii."""
    return Box(d, n)


def edge_boundary(s: VertexSet) -> tuple[tuple[Edge, Vertex], ...]:
    return s.boundary_edges


def internal_edges(s: VertexSet) -> tuple[Edge, ...]:
    return s.internal_edges


def parse_set_file(text: str) -> VertexSet:
    """Parse the vertex-set text format.

    One vertex per line, whitespace-separated integer coordinates;
    `#` starts a comment; blank lines ignored.
    """
    vs: list[Vertex] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            v = tuple(int(tok) for tok in line.split())
        except ValueError:
            raise ValueError(f"set file line {lineno}: not integers: {raw!r}")
        vs.append(v)
    if not vs:
        raise ValueError("set file contains no vertices")
    dims = {len(v) for v in vs}
    if len(dims) != 1:
        raise ValueError(f"set file mixes dimensions {sorted(dims)}")
    return VertexSet(vs)


def format_set_file(s: VertexSet) -> str:
    """Inverse of parse_set_file (canonical vertex order)."""
    return "\n".join(" ".join(str(c) for c in v) for v in s.vertices) + "\n"


def load_set_file(path) -> VertexSet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_set_file(fh.read())


def vertices_from_json(coords: Sequence[Sequence[int]]) -> VertexSet:
    return VertexSet(tuple(int(c) for c in v) for v in coords)
