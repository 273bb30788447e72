"""Certified critical-point bounds and finite-volume certificates.

A rational p with phi_p(S) <= 1 for a finite witness S containing the
origin certifies p <= p_c: phi is strictly increasing in p on (0,1], so
every q < p has phi_q(S) < 1, and such q lie below the critical point.
All certifying arithmetic is exact; Monte Carlo only ever confronts the
certificates, never produces them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import exact
from .estimator import MeanEstimate, SampleSpec, estimate_phi
from .exact import (DEFAULT_BUDGET, BudgetExceededError, EnumerationBudget,
                    frac_str, parse_frac)
from .lattice import Vertex, VertexSet, make_box

DEFAULT_WIDTH_TOL = Fraction(1, 2**30)


class CertificateError(ValueError):
    """No certificate can be issued from the given witness."""


@dataclass(frozen=True)
class PcLowerBound:
    """A certified rational lower bound on the critical point."""

    bound: Fraction
    phi_at_bound: Fraction          # <= 1, exact
    witness: VertexSet
    interval: tuple[Fraction, Fraction]
    method: str = "exact"


@dataclass(frozen=True)
class LadderEntry:
    k: int
    interval: tuple[Fraction, Fraction] | None
    bound: Fraction | None
    phi_at_bound: Fraction | None
    error: str | None = None


@dataclass(frozen=True)
class PcLadder:
    entries: tuple[LadderEntry, ...]
    best: PcLowerBound


@dataclass(frozen=True)
class DecayCertificate:
    """Witness data for the induction bound P_p[0 ↔ ∂Λ_{kL}] <= phi^(k-1)."""

    witness: VertexSet
    p: Fraction
    phi: Fraction                   # < 1, exact
    length: int                     # smallest L with S ⊆ Λ_{L-1}

    def bound_at(self, k: int) -> Fraction:
        if k < 1:
            raise ValueError("k must be >= 1")
        return self.phi ** (k - 1)


@dataclass(frozen=True)
class MeanFieldFloor:
    """Finite-volume lower bound (p - pc_ref)/(p(1 - pc_ref)) on reach."""

    p: Fraction
    pc_ref: Fraction
    floor: Fraction


def pstar(s: VertexSet, width_tol: Fraction = DEFAULT_WIDTH_TOL,
          budget: EnumerationBudget = DEFAULT_BUDGET) -> tuple[Fraction, Fraction]:
    """Bracket the root of phi_p(S) = 1 by exact bisection.

    Returns (lo, hi) with phi_lo(S) < 1 <= phi_hi(S) and hi - lo <=
    width_tol.  Well-posed because phi_0 = 0, phi_1 = |ΔS| >= 2d and phi is
    continuous and strictly increasing on (0, 1].
    """
    width_tol = Fraction(width_tol)
    if width_tol <= 0:
        raise ValueError("width_tol must be positive")
    poly = exact.phi_exact(s, budget)
    lo, hi = Fraction(0), Fraction(1)
    if poly(hi) < 1:
        raise CertificateError("phi_1(S) < 1; not a valid finite witness")
    while hi - lo > width_tol:
        mid = (lo + hi) / 2
        if poly(mid) < 1:
            lo = mid
        else:
            hi = mid
    return lo, hi


def simplest_in_interval(lo: Fraction, hi: Fraction) -> Fraction:
    """The smallest-denominator rational in the closed interval [lo, hi]."""
    lo, hi = Fraction(lo), Fraction(hi)
    if lo > hi:
        raise ValueError("empty interval")
    if lo == hi:
        return lo
    fl = lo.numerator // lo.denominator
    ceil_lo = -((-lo.numerator) // lo.denominator)
    floor_hi = hi.numerator // hi.denominator
    if ceil_lo <= floor_hi:
        return Fraction(ceil_lo)
    return fl + 1 / simplest_in_interval(1 / (hi - fl), 1 / (lo - fl))


def _certified_from_interval(s: VertexSet, interval: tuple[Fraction, Fraction],
                             budget: EnumerationBudget) -> PcLowerBound:
    """Best certifiable rational in the interval.

    phi is strictly increasing, so any b with phi(b) <= 1 certifies
    b <= p_c.  The simplest rational in the bracket recovers thresholds
    that are exactly rational (phi there equals 1); otherwise the lower
    endpoint, where phi < 1 outright, is the certificate.
    """
    lo, hi = interval
    poly = exact.phi_exact(s, budget)
    cand = simplest_in_interval(lo, hi)
    phi_cand = poly(cand)
    if phi_cand <= 1:
        return PcLowerBound(bound=cand, phi_at_bound=phi_cand, witness=s,
                            interval=interval)
    phi_lo = poly(lo)
    return PcLowerBound(bound=lo, phi_at_bound=phi_lo, witness=s,
                        interval=interval)


def pc_lower_bound(d: int, k_max: int,
                   width_tol: Fraction = DEFAULT_WIDTH_TOL,
                   budget: EnumerationBudget = DEFAULT_BUDGET) -> PcLadder:
    """Certified lower-bound ladder over box witnesses Λ_0..Λ_k_max.

    Per-box thresholds need not be monotone in k, so the final bound is the
    running maximum; boxes beyond the enumeration budget are reported, not
    silently skipped.
    """
    if d < 2:
        raise ValueError("dimension must be >= 2")
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    entries = []
    best: PcLowerBound | None = None
    for k in range(k_max + 1):
        try:
            budget.require_configs(exact.box_edge_count(d, k))
            box = make_box(d, k)
            interval = pstar(box, width_tol, budget)
            cert = _certified_from_interval(box, interval, budget)
            entries.append(LadderEntry(k=k, interval=interval,
                                       bound=cert.bound,
                                       phi_at_bound=cert.phi_at_bound))
            if best is None or cert.bound > best.bound:
                best = cert
        except BudgetExceededError as e:
            entries.append(LadderEntry(k=k, interval=None, bound=None,
                                       phi_at_bound=None, error=str(e)))
    assert best is not None  # k = 0 has no edges and always fits the budget
    return PcLadder(entries=tuple(entries), best=best)


def decay_certificate(d: int, p: Fraction, s: VertexSet,
                      budget: EnumerationBudget = DEFAULT_BUDGET) -> DecayCertificate:
    """Certificate that reach probabilities decay like phi^(k-1).

    Refuses unless phi_p(S) < 1 holds exactly; L is the smallest integer
    with S ⊆ Λ_{L-1}.
    """
    if s.dim != d:
        raise ValueError(f"witness dimension {s.dim} != {d}")
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    phi = exact.phi_exact(s, budget)(p)
    if phi >= 1:
        raise CertificateError(
            f"phi_p(S) = {frac_str(phi)} >= 1 at p = {frac_str(p)}; "
            f"no decay certificate from this witness")
    return DecayCertificate(witness=s, p=p, phi=phi,
                            length=s.max_norm() + 1)


def meanfield_floor(p: Fraction, pc_ref: Fraction) -> MeanFieldFloor:
    """The mean-field lower bound (p - pc_ref)/(p(1 - pc_ref)).

    Valid for P_p[0 ↔ ∂Λ_n] at every n >= 1 when pc_ref is (a lower bound
    on) the critical point and p > pc_ref.  p = 1 is allowed and gives 1.
    """
    p = Fraction(p)
    pc_ref = Fraction(pc_ref)
    if not 0 <= pc_ref < 1:
        raise ValueError("pc_ref must lie in [0, 1)")
    if not pc_ref < p <= 1:
        raise ValueError("the floor is vacuous unless pc_ref < p <= 1")
    floor = (p - pc_ref) / (p * (1 - pc_ref))
    return MeanFieldFloor(p=p, pc_ref=pc_ref, floor=floor)


def phi_sequence_exact(d: int, p: Fraction, k_max: int,
                       budget: EnumerationBudget = DEFAULT_BUDGET) -> list[Fraction]:
    """phi_p(Λ_0..Λ_k_max) exactly; diverging sums diagnose p > p_c."""
    p = Fraction(p)
    out = []
    for k in range(k_max + 1):
        budget.require_configs(exact.box_edge_count(d, k))
        out.append(exact.phi_exact(make_box(d, k), budget)(p))
    return out


def phi_sequence_mc(d: int, k_max: int, spec: SampleSpec) -> list[MeanEstimate]:
    """Monte Carlo phi_p(Λ_0..Λ_k_max) at spec.p, for boxes beyond the
    exact budget."""
    return [estimate_phi(make_box(d, k), spec) for k in range(k_max + 1)]


# ---------------------------------------------------------------------------
# certificate serialization and from-scratch re-verification

def _witness_json(s: VertexSet) -> list[list[int]]:
    return [list(v) for v in s.vertices]


def decay_certificate_to_json(cert: DecayCertificate) -> dict:
    return {
        "kind": "decay-certificate",
        "dim": cert.witness.dim,
        "p": frac_str(cert.p),
        "phi": frac_str(cert.phi),
        "L": cert.length,
        "witness": _witness_json(cert.witness),
    }


def pc_bound_to_json(bound: PcLowerBound) -> dict:
    return {
        "kind": "pc-lower-bound",
        "dim": bound.witness.dim,
        "bound": frac_str(bound.bound),
        "phi_at_bound": frac_str(bound.phi_at_bound),
        "interval": [frac_str(bound.interval[0]), frac_str(bound.interval[1])],
        "witness": _witness_json(bound.witness),
        "method": bound.method,
    }


@dataclass(frozen=True)
class VerifyResult:
    kind: str
    ok: bool
    details: dict


def verify_certificate_json(obj: dict,
                            budget: EnumerationBudget = DEFAULT_BUDGET) -> VerifyResult:
    """Re-check a serialized certificate from scratch.

    Recomputes phi by direct evaluation of configuration counts (a route
    independent of the polynomial expansion used when the certificate was
    issued).
    """
    kind = obj.get("kind")
    witness = VertexSet(tuple(int(c) for c in v) for v in obj["witness"])
    if witness.dim != int(obj["dim"]):
        return VerifyResult(kind=str(kind), ok=False,
                            details={"reason": "witness dimension mismatch"})
    if kind == "decay-certificate":
        p = parse_frac(obj["p"])
        phi = exact.phi_value_direct(witness, p, budget)
        ok = (phi < 1 and phi == parse_frac(obj["phi"])
              and int(obj["L"]) == witness.max_norm() + 1)
        return VerifyResult(kind=kind, ok=ok,
                            details={"phi_recomputed": frac_str(phi)})
    if kind == "pc-lower-bound":
        bound = parse_frac(obj["bound"])
        phi = exact.phi_value_direct(witness, bound, budget)
        ok = phi <= 1 and phi == parse_frac(obj["phi_at_bound"])
        return VerifyResult(kind=kind, ok=ok,
                            details={"phi_recomputed": frac_str(phi)})
    return VerifyResult(kind=str(kind), ok=False,
                        details={"reason": f"unknown certificate kind {kind!r}"})
