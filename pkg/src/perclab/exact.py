"""Exact enumeration over edge configurations of small regions.

Everything here is arbitrary-precision rational arithmetic: connection
probabilities, reach probabilities, the phi functional, pivotal
probabilities and the blocking-surface decomposition all come out as
polynomials in p with exact coefficients, or exact values at rational p.
The 2^E configuration sweeps run in the selected kernel backend, which
only ever returns integer counts; no floating point enters this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from . import kernels
from .lattice import Box, Edge, Vertex, VertexSet, make_box, origin

Rational = Fraction


class BudgetExceededError(RuntimeError):
    """An enumeration would exceed the configured budget."""


def frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_frac(s: str) -> Fraction:
    """Exact rational from 'num/den' or a decimal string (never via float)."""
    return Fraction(s.strip())


def _pow2_str(n: int) -> str:
    """Readable size: exact power of two as 2^k, else the integer."""
    if n > 0 and n & (n - 1) == 0:
        return f"2^{n.bit_length() - 1}"
    return str(n)


@dataclass(frozen=True)
class EnumerationBudget:
    """Hard caps that make every enumeration fail fast instead of hanging."""

    max_configs: int = 2**22
    max_subsets: int = 2**20

    def __post_init__(self):
        if self.max_configs < 1 or self.max_subsets < 1:
            raise ValueError("budget limits must be positive")

    def require_configs(self, n_edges: int) -> None:
        if n_edges > 62 or (1 << n_edges) > self.max_configs:
            raise BudgetExceededError(
                f"enumeration needs 2^{n_edges} configurations, "
                f"budget allows {_pow2_str(self.max_configs)}; "
                f"raise max_configs to proceed")

    def require_subsets(self, n_subsets: int) -> None:
        if n_subsets > self.max_subsets:
            raise BudgetExceededError(
                f"enumeration needs {_pow2_str(n_subsets)} subsets, "
                f"budget allows {_pow2_str(self.max_subsets)}; "
                f"raise max_subsets to proceed")


DEFAULT_BUDGET = EnumerationBudget()


class RationalPolynomial:
    """Dense univariate polynomial in p with exact rational coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[Fraction | int]):
        cs = [Fraction(c) for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        if not cs:
            cs = [Fraction(0)]
        self.coeffs: tuple[Fraction, ...] = tuple(cs)

    @classmethod
    def zero(cls) -> "RationalPolynomial":
        return cls([0])

    @classmethod
    def constant(cls, c) -> "RationalPolynomial":
        return cls([c])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return self.coeffs == (Fraction(0),)

    def __call__(self, x):
        """Horner evaluation; exact when x is a Fraction."""
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x + c
        return acc

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, RationalPolynomial)
                and self.coeffs == other.coeffs)

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __add__(self, other: "RationalPolynomial") -> "RationalPolynomial":
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return RationalPolynomial(out)

    def __sub__(self, other: "RationalPolynomial") -> "RationalPolynomial":
        return self + (-other)

    def __neg__(self) -> "RationalPolynomial":
        return RationalPolynomial([-c for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, RationalPolynomial):
            out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, a in enumerate(self.coeffs):
                if a:
                    for j, b in enumerate(other.coeffs):
                        out[i + j] += a * b
            return RationalPolynomial(out)
        return RationalPolynomial([c * other for c in self.coeffs])

    __rmul__ = __mul__

    def shift_up(self) -> "RationalPolynomial":
        """Multiply by p."""
        return RationalPolynomial([Fraction(0), *self.coeffs])

    def derivative(self) -> "RationalPolynomial":
        if len(self.coeffs) == 1:
            return RationalPolynomial.zero()
        return RationalPolynomial(
            [k * c for k, c in enumerate(self.coeffs)][1:])

    def to_json(self) -> dict:
        return {"coeffs": [frac_str(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> "RationalPolynomial":
        return cls([parse_frac(s) for s in obj["coeffs"]])

    def __repr__(self) -> str:
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0 and self.degree > 0:
                continue
            if k == 0:
                terms.append(frac_str(c))
            elif k == 1:
                terms.append(f"{frac_str(c)}*p")
            else:
                terms.append(f"{frac_str(c)}*p^{k}")
        return "RationalPolynomial(" + " + ".join(terms) + ")"


def poly_from_counts(counts: Sequence[int], n_edges: int) -> RationalPolynomial:
    """Σ_k counts[k] p^k (1-p)^(E-k) expanded to dense integer coefficients."""
    out = [0] * (n_edges + 1)
    for k, n_k in enumerate(counts):
        if n_k:
            for j in range(n_edges - k + 1):
                out[k + j] += n_k * (-1) ** j * math.comb(n_edges - k, j)
    return RationalPolynomial(out)


def value_from_counts(counts: Sequence[int], n_edges: int,
                      p: Fraction) -> Fraction:
    """Σ_k counts[k] p^k (1-p)^(E-k) evaluated directly (no expansion)."""
    p = Fraction(p)
    q = 1 - p
    p_pow = [Fraction(1)]
    q_pow = [Fraction(1)]
    for _ in range(n_edges):
        p_pow.append(p_pow[-1] * p)
        q_pow.append(q_pow[-1] * q)
    return sum((n_k * p_pow[k] * q_pow[n_edges - k]
                for k, n_k in enumerate(counts)), Fraction(0))


# ---------------------------------------------------------------------------
# indexed graphs fed to the kernels

@dataclass(frozen=True)
class IndexedGraph:
    """A VertexSet flattened to integer indices for the kernels."""

    vertices: tuple[Vertex, ...]
    index: dict
    edges: tuple[Edge, ...]
    edges_u: tuple[int, ...]
    edges_v: tuple[int, ...]

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def _index_set(s: VertexSet) -> IndexedGraph:
    verts = s.vertices
    index = {v: i for i, v in enumerate(verts)}
    edges = s.internal_edges
    if len(verts) > 64:
        raise BudgetExceededError(
            f"exact enumeration supports at most 64 vertices, got {len(verts)}")
    return IndexedGraph(
        vertices=verts,
        index=index,
        edges=edges,
        edges_u=tuple(index[e[0]] for e in edges),
        edges_v=tuple(index[e[1]] for e in edges),
    )


@lru_cache(maxsize=None)
def _box_graph(d: int, n: int) -> tuple[Box, IndexedGraph, int]:
    """Box, its indexed graph, and the bitmask of ∂Λ_n vertices."""
    box = make_box(d, n)
    g = _index_set(box)
    bmask = 0
    for v in box.boundary_vertices:
        bmask |= 1 << g.index[v]
    return box, g, bmask


def _inner_profile(s: VertexSet) -> tuple[tuple[Vertex, ...], dict]:
    """Distinct inner endpoints of ΔS and their edge multiplicities."""
    weights: dict = {}
    for _edge, inner in s.boundary_edges:
        weights[inner] = weights.get(inner, 0) + 1
    targets = tuple(sorted(weights))
    return targets, weights


@lru_cache(maxsize=None)
def _connect_counts(s: VertexSet,
                    targets: tuple[Vertex, ...]) -> tuple[tuple[int, ...], ...]:
    """Configuration counts of {0 ↔_S x} for each target x, one sweep."""
    g = _index_set(s)
    masks = [1 << g.index[x] for x in targets]
    counts = kernels.subset_connectivity_counts(
        len(g.vertices), list(g.edges_u), list(g.edges_v),
        g.index[origin(s.dim)], masks)
    return tuple(tuple(c) for c in counts)


# ---------------------------------------------------------------------------
# operations

def box_edge_count(d: int, n: int) -> int:
    """|internal edges of Λ_n| = 2dn(2n+1)^(d-1), without building the box."""
    return 2 * d * n * (2 * n + 1) ** (d - 1) if n > 0 else 0


def box_vertex_count(d: int, n: int) -> int:
    return (2 * n + 1) ** d


def connect_poly(s: VertexSet, x: Vertex,
                 budget: EnumerationBudget = DEFAULT_BUDGET) -> RationalPolynomial:
    """Exact P_p[0 ↔_S x] using only edges internal to S."""
    x = tuple(x)
    if x not in s:
        raise ValueError(f"target {x} is not in the set")
    budget.require_configs(len(s.internal_edges))
    counts = _connect_counts(s, (x,))[0]
    return poly_from_counts(counts, len(s.internal_edges))


def reach_poly(d: int, n: int,
               budget: EnumerationBudget = DEFAULT_BUDGET) -> RationalPolynomial:
    """Exact P_p[0 ↔ ∂Λ_n].

    Any path from the origin meets ∂Λ_n before using an edge outside Λ_n,
    so the event depends on the internal edges of Λ_n only and the sweep
    stays finite.
    """
    _check_box_dims(d, n)
    if n == 0:
        return RationalPolynomial.constant(1)
    budget.require_configs(box_edge_count(d, n))
    box, g, bmask = _box_graph(d, n)
    counts = kernels.subset_connectivity_counts(
        len(g.vertices), list(g.edges_u), list(g.edges_v),
        g.index[origin(d)], [bmask])[0]
    return poly_from_counts(counts, g.n_edges)


def _check_box_dims(d: int, n: int) -> None:
    if d < 2:
        raise ValueError("box events require dimension >= 2")
    if n < 0:
        raise ValueError("box radius must be >= 0")


def phi_exact(s: VertexSet,
              budget: EnumerationBudget = DEFAULT_BUDGET) -> RationalPolynomial:
    """The functional phi_p(S) = p · Σ_{{x,y} in ΔS} P_p[0 ↔_S x].

    The sum runs over boundary edges, so an inner endpoint with several
    outgoing edges contributes once per edge.
    """
    budget.require_configs(len(s.internal_edges))
    targets, weights = _inner_profile(s)
    all_counts = _connect_counts(s, targets)
    total = RationalPolynomial.zero()
    n_edges = len(s.internal_edges)
    for x, counts in zip(targets, all_counts):
        total = total + weights[x] * poly_from_counts(counts, n_edges)
    return total.shift_up()


def phi_value_direct(s: VertexSet, p: Fraction,
                     budget: EnumerationBudget = DEFAULT_BUDGET) -> Fraction:
    """phi_p(S) at rational p, evaluated straight from configuration counts.

    Independent of the polynomial expansion path; used to re-verify
    certificates.
    """
    budget.require_configs(len(s.internal_edges))
    p = Fraction(p)
    targets, weights = _inner_profile(s)
    all_counts = _connect_counts(s, targets)
    n_edges = len(s.internal_edges)
    return p * sum((weights[x] * value_from_counts(counts, n_edges, p)
                    for x, counts in zip(targets, all_counts)), Fraction(0))


@dataclass(frozen=True)
class PivotalReport:
    """Per-edge pivotality polynomials for {0 ↔ ∂Λ_n} and their sum."""

    per_edge: dict
    total: RationalPolynomial


@lru_cache(maxsize=None)
def _pivotal_counts(d: int, n: int) -> tuple[tuple[int, ...], ...]:
    box, g, bmask = _box_graph(d, n)
    return tuple(tuple(c) for c in kernels.subset_pivotal_counts(
        len(g.vertices), list(g.edges_u), list(g.edges_v),
        g.index[origin(d)], bmask))


def pivotal_report(d: int, n: int,
                   budget: EnumerationBudget = DEFAULT_BUDGET) -> PivotalReport:
    """Pivotality polynomials of every internal edge of Λ_n, one sweep."""
    _check_box_dims(d, n)
    budget.require_configs(box_edge_count(d, n))
    box, g, bmask = _box_graph(d, n)
    counts = _pivotal_counts(d, n)
    per_edge = {e: poly_from_counts(c, g.n_edges)
                for e, c in zip(g.edges, counts)}
    total = RationalPolynomial.zero()
    for poly in per_edge.values():
        total = total + poly
    return PivotalReport(per_edge=per_edge, total=total)


def pivotal_poly(d: int, n: int, e: Edge,
                 budget: EnumerationBudget = DEFAULT_BUDGET) -> RationalPolynomial:
    """Exact P_p[e pivotal for 0 ↔ ∂Λ_n]."""
    report = pivotal_report(d, n, budget)
    e = tuple(sorted((tuple(e[0]), tuple(e[1]))))
    if e not in report.per_edge:
        raise ValueError(f"edge {e} is not internal to the box")
    return report.per_edge[e]


def russo_residual(d: int, n: int,
                   budget: EnumerationBudget = DEFAULT_BUDGET) -> RationalPolynomial:
    """d/dp P_p[0 ↔ ∂Λ_n] minus the sum of pivotal probabilities.

    Russo's formula says this is identically zero; returning the residual
    keeps both enumeration routes visible to the caller.
    """
    lhs = reach_poly(d, n, budget).derivative()
    rhs = pivotal_report(d, n, budget).total
    return lhs - rhs


@dataclass(frozen=True)
class BlockingRow:
    """One candidate blocked set S in the outermost-surface decomposition."""

    vertices: tuple[Vertex, ...]
    prob: Fraction                  # P_p[S_blocked = S]
    joint_sum: Fraction             # Σ_{{x,y} in ΔS} P_p[0 ↔_S x, S_blocked = S]
    factorization_ok: bool          # joint == P[0 ↔_S x] · P[S_blocked = S] per x


@dataclass(frozen=True)
class BlockingTable:
    p: Fraction
    rows: tuple[BlockingRow, ...]
    reassembled: Fraction           # Σ over rows of joint_sum
    target: Fraction                # (1-p) · d/dp P_p[0 ↔ ∂Λ_n]
    blocked_total: Fraction         # Σ over rows of prob
    not_reached: Fraction           # 1 - P_p[0 ↔ ∂Λ_n]

    @property
    def identity_ok(self) -> bool:
        return (self.reassembled == self.target
                and self.blocked_total == self.not_reached
                and all(r.factorization_ok for r in self.rows))


def _iter_origin_subsets(n_vertices: int, origin_index: int):
    """All vertex bitmasks over n_vertices that contain the origin bit."""
    rest = [i for i in range(n_vertices) if i != origin_index]
    for m in range(1 << len(rest)):
        sm = 1 << origin_index
        for j, i in enumerate(rest):
            if (m >> j) & 1:
                sm |= 1 << i
        yield sm


@lru_cache(maxsize=None)
def _blocking_counts(d: int, n: int):
    """Per-subset blocked-set and joint counts; independent of p."""
    box, g, bmask = _box_graph(d, n)
    oi = g.index[origin(d)]
    edge_index = {e: i for i, e in enumerate(g.edges)}
    out = []
    for sm in _iter_origin_subsets(len(g.vertices), oi):
        sverts = tuple(g.vertices[i] for i in range(len(g.vertices))
                       if (sm >> i) & 1)
        sset = VertexSet(sverts)
        s_edge_mask = 0
        for e in sset.internal_edges:
            s_edge_mask |= 1 << edge_index[e]
        targets, weights = _inner_profile(sset)
        target_idx = [g.index[x] for x in targets]
        s_counts, joint = kernels.subset_blocking_joint_counts(
            len(g.vertices), list(g.edges_u), list(g.edges_v),
            bmask, sm, s_edge_mask, oi, target_idx)
        out.append((sset, targets, weights,
                    tuple(s_counts), tuple(tuple(j) for j in joint)))
    return tuple(out)


def blocking_decomposition(d: int, n: int, p: Fraction,
                           budget: EnumerationBudget = DEFAULT_BUDGET) -> BlockingTable:
    """Decompose (1-p)·d/dp P_p[0 ↔ ∂Λ_n] over the blocked set.

    The blocked set of a configuration is the set of box vertices not
    joined to ∂Λ_n.  For each candidate value S containing the origin the
    table lists P_p[blocked = S] and the joint sum over ΔS, checks the
    exact factorization P_p[0 ↔_S x, blocked = S] =
    P_p[0 ↔_S x]·P_p[blocked = S] (the blocked-set event only looks at
    edges outside S), and reassembles the derivative identity.
    """
    _check_box_dims(d, n)
    p = Fraction(p)
    budget.require_subsets(1 << (box_vertex_count(d, n) - 1))
    budget.require_configs(box_edge_count(d, n))
    box, g, bmask = _box_graph(d, n)
    n_edges = g.n_edges
    rows = []
    reassembled = Fraction(0)
    blocked_total = Fraction(0)
    for sset, targets, weights, s_counts, joint in _blocking_counts(d, n):
        sprob = value_from_counts(s_counts, n_edges, p)
        joint_sum = Fraction(0)
        fact_ok = True
        marg_counts = _connect_counts(sset, targets)
        n_s_edges = len(sset.internal_edges)
        for x, jc, mc in zip(targets, joint, marg_counts):
            jval = value_from_counts(jc, n_edges, p)
            joint_sum += weights[x] * jval
            marginal = value_from_counts(mc, n_s_edges, p)
            if jval != marginal * sprob:
                fact_ok = False
        reassembled += joint_sum
        blocked_total += sprob
        rows.append(BlockingRow(vertices=sset.vertices, prob=sprob,
                                joint_sum=joint_sum, factorization_ok=fact_ok))
    reach = reach_poly(d, n, budget)
    target = (1 - p) * reach.derivative()(p)
    return BlockingTable(p=p, rows=tuple(rows), reassembled=reassembled,
                         target=target, blocked_total=blocked_total,
                         not_reached=1 - reach(p))


@dataclass(frozen=True)
class LemmaCheck:
    """Two-sided evaluation of the differential inequality at one p."""

    p: Fraction
    lhs: Fraction                   # d/dp P_p[0 ↔ ∂Λ_n]
    rhs: Fraction                   # inf_S phi_p(S) · (1 - P_p)/ (p(1-p))
    inf_phi: Fraction
    minimizer: tuple[Vertex, ...]

    @property
    def ok(self) -> bool:
        return self.lhs >= self.rhs


@lru_cache(maxsize=None)
def _subset_phi_polys(d: int, n: int):
    """phi polynomial for every subset of Λ_n containing the origin."""
    box, g, _ = _box_graph(d, n)
    oi = g.index[origin(d)]
    out = []
    for sm in _iter_origin_subsets(len(g.vertices), oi):
        sverts = tuple(g.vertices[i] for i in range(len(g.vertices))
                       if (sm >> i) & 1)
        sset = VertexSet(sverts)
        out.append((sset.vertices, phi_exact(sset)))
    return tuple(out)


def lemma_check(d: int, n: int, p: Fraction,
                budget: EnumerationBudget = DEFAULT_BUDGET) -> LemmaCheck:
    """Exact lhs ≥ rhs check of the derivative lower bound at rational p.

    The infimum runs over all subsets of Λ_n containing the origin, by
    exhaustive enumeration.
    """
    _check_box_dims(d, n)
    if n < 1:
        raise ValueError("the differential inequality is stated for n >= 1")
    p = Fraction(p)
    if p <= 0 or p >= 1:
        raise ValueError("p must lie strictly between 0 and 1")
    budget.require_subsets(1 << (box_vertex_count(d, n) - 1))
    budget.require_configs(box_edge_count(d, n))
    best = None
    best_verts: tuple[Vertex, ...] = ()
    for verts, poly in _subset_phi_polys(d, n):
        val = poly(p)
        if best is None or val < best:
            best = val
            best_verts = verts
    reach = reach_poly(d, n, budget)
    lhs = reach.derivative()(p)
    rhs = best * (1 - reach(p)) / (p * (1 - p))
    return LemmaCheck(p=p, lhs=lhs, rhs=rhs, inf_phi=best,
                      minimizer=best_verts)
