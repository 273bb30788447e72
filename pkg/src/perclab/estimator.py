"""Seeded Monte Carlo estimators built on lazy cluster exploration.

Every estimate is a pure function of (p, trials, seed): edge states come
from the counter-based stream in `rng`, accumulation is over exact integer
sums, and workers only change how the trial range is scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels, rng
from .lattice import Edge, Vertex, VertexSet, canonical_edge, origin

Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class SampleSpec:
    """Sampling configuration; `workers` affects scheduling only."""

    p: float
    trials: int
    seed: int
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ValueError("workers must be positive")


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    z = Z95
    p_hat = successes / trials
    denom = 1.0 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denom
    margin = (z / denom) * math.sqrt(
        p_hat * (1.0 - p_hat) / trials + z * z / (4.0 * trials * trials))
    return max(0.0, center - margin), min(1.0, center + margin)


@dataclass(frozen=True)
class BernoulliEstimate:
    successes: int
    trials: int
    point: float
    ci_low: float
    ci_high: float

    @classmethod
    def from_counts(cls, successes: int, trials: int) -> "BernoulliEstimate":
        lo, hi = wilson_interval(successes, trials)
        return cls(successes=successes, trials=trials,
                   point=successes / trials, ci_low=lo, ci_high=hi)

    @property
    def std_err(self) -> float:
        return math.sqrt(self.point * (1.0 - self.point) / self.trials)


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    sample_sd: float
    trials: int
    ci_low: float
    ci_high: float

    @property
    def std_err(self) -> float:
        return self.sample_sd / math.sqrt(self.trials)


@dataclass(frozen=True)
class ClusterTrace:
    """Record of one lazy exploration of the origin's cluster."""

    cluster: tuple[Vertex, ...]
    reached_boundary: bool
    edges_revealed: int
    max_norm: int
    revealed: dict = field(compare=False)


def _shards(trials: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous (start, count) trial ranges covering [0, trials)."""
    workers = min(workers, trials)
    base, rem = divmod(trials, workers)
    out = []
    start = 0
    for i in range(workers):
        count = base + (1 if i < rem else 0)
        out.append((start, count))
        start += count
    return out


def _run_shards(fn, spec: SampleSpec):
    """fn(trial_start, count) per shard, merged in shard order."""
    shards = _shards(spec.trials, spec.workers)
    if len(shards) == 1:
        return [fn(*shards[0])]
    with ThreadPoolExecutor(max_workers=len(shards)) as pool:
        futures = [pool.submit(fn, start, count) for start, count in shards]
        return [f.result() for f in futures]


def explore_cluster(d: int, n: int, spec: SampleSpec,
                    trial_index: int = 0) -> ClusterTrace:
    """One lazy breadth-first revelation of the origin's open cluster in Λ_n.

    Each internal edge of Λ_n is sampled at most once (when an endpoint is
    expanded toward an unvisited neighbour); edges outside Λ_n are never
    touched; exploration halts as soon as a vertex of ∂Λ_n is discovered.
    """
    if n < 1:
        raise ValueError("stop radius must be >= 1")
    tkey = rng.trial_key(spec.seed, trial_index)
    start = origin(d)
    visited = {start}
    queue = [start]
    head = 0
    revealed: dict[Edge, bool] = {}
    reached = False
    max_norm = 0
    while head < len(queue) and not reached:
        v = queue[head]
        head += 1
        for axis in range(d):
            for direction in (-1, 1):
                if reached:
                    break
                c = v[axis] + direction
                if abs(c) > n:
                    continue
                w = v[:axis] + (c,) + v[axis + 1:]
                if w in visited:
                    continue
                smaller = w if direction == -1 else v
                code = rng.edge_code(axis, smaller)
                is_open = rng.edge_is_open(tkey, code, spec.p)
                revealed[canonical_edge(v, w)] = is_open
                if is_open:
                    visited.add(w)
                    queue.append(w)
                    norm = max(abs(x) for x in w)
                    if norm > max_norm:
                        max_norm = norm
                    if norm == n:
                        reached = True
            if reached:
                break
    return ClusterTrace(cluster=tuple(sorted(visited)),
                        reached_boundary=reached,
                        edges_revealed=len(revealed),
                        max_norm=max_norm,
                        revealed=revealed)


def estimate_reach(d: int, n: int, spec: SampleSpec) -> BernoulliEstimate:
    """Indicator average of {0 ↔ ∂Λ_n} over seeded lazy explorations."""
    if n < 1:
        raise ValueError("box radius must be >= 1")
    hists = _run_shards(
        lambda start, count: kernels.mc_reach_maxnorm_hist(
            d, n, spec.p, spec.seed, start, count), spec)
    successes = sum(h[n] for h in hists)
    return BernoulliEstimate.from_counts(successes, spec.trials)


def estimate_reach_profile(d: int, n_list: Sequence[int],
                           spec: SampleSpec) -> dict[int, BernoulliEstimate]:
    """Coupled reach estimates for nested boxes from the same trials.

    One exploration per trial inside the largest box; the indicator for a
    smaller n is whether the explored cluster attained sup-norm n, which
    equals the single-box indicator trial by trial.
    """
    ns = sorted(set(int(n) for n in n_list))
    if not ns or ns[0] < 1:
        raise ValueError("box radii must be >= 1")
    m = ns[-1]
    hists = _run_shards(
        lambda start, count: kernels.mc_reach_maxnorm_hist(
            d, m, spec.p, spec.seed, start, count), spec)
    hist = [sum(h[k] for h in hists) for k in range(m + 1)]
    out = {}
    for n in ns:
        successes = sum(hist[k] for k in range(n, m + 1))
        out[n] = BernoulliEstimate.from_counts(successes, spec.trials)
    return out


def reach_indicators(d: int, n: int, spec: SampleSpec) -> np.ndarray:
    """Per-trial reach indicators (for coupling checks)."""
    parts = _run_shards(
        lambda start, count: kernels.mc_reach_indicators(
            d, n, spec.p, spec.seed, start, count), spec)
    return np.concatenate([np.asarray(part, dtype=np.uint8)
                           for part in parts])


def _graph_arrays(s: VertexSet):
    """CSR adjacency with per-edge lattice codes plus boundary weights."""
    index = {v: i for i, v in enumerate(s.vertices)}
    adj: list[list[tuple[int, int]]] = [[] for _ in s.vertices]
    for u, v in s.internal_edges:
        axis = next(i for i in range(len(u)) if u[i] != v[i])
        code = rng.edge_code(axis, u)  # u is the lex-smaller endpoint
        adj[index[u]].append((index[v], code))
        adj[index[v]].append((index[u], code))
    indptr = np.zeros(len(s.vertices) + 1, dtype=np.int32)
    adjv = []
    adjcode = []
    for i, lst in enumerate(adj):
        lst.sort()
        for j, code in lst:
            adjv.append(j)
            adjcode.append(code)
        indptr[i + 1] = len(adjv)
    weights = np.zeros(len(s.vertices), dtype=np.int64)
    for _edge, inner in s.boundary_edges:
        weights[index[inner]] += 1
    return (indptr, np.array(adjv, dtype=np.int32),
            np.array(adjcode, dtype=np.uint64), weights, index)


def estimate_connect(s: VertexSet, x: Vertex,
                     spec: SampleSpec) -> BernoulliEstimate:
    """Indicator average of {0 ↔_S x} via cluster exploration inside S."""
    x = tuple(x)
    if x not in s:
        raise ValueError(f"target {x} is not in the set")
    indptr, adjv, adjcode, weights, index = _graph_arrays(s)
    src = index[origin(s.dim)]
    tgt = index[x]
    parts = _run_shards(
        lambda start, count: kernels.mc_graph_stats(
            indptr, adjv, adjcode, weights, src, tgt,
            spec.p, spec.seed, start, count), spec)
    successes = sum(int(part[0]) for part in parts)
    return BernoulliEstimate.from_counts(successes, spec.trials)


def estimate_phi(s: VertexSet, spec: SampleSpec) -> MeanEstimate:
    """Unbiased estimator of phi_p(S).

    Per trial, explore the cluster of the origin inside S and count the
    boundary edges of ΔS whose inner endpoint fell in the cluster; the
    estimate is p times the average count, since
    phi_p(S) = p · E[#{(x,y) in ΔS : 0 ↔_S x}].
    """
    indptr, adjv, adjcode, weights, index = _graph_arrays(s)
    src = index[origin(s.dim)]
    parts = _run_shards(
        lambda start, count: kernels.mc_graph_stats(
            indptr, adjv, adjcode, weights, src, -1,
            spec.p, spec.seed, start, count), spec)
    sum_w = sum(int(part[1]) for part in parts)
    sum_w2 = sum(int(part[2]) for part in parts)
    t = spec.trials
    mean_count = sum_w / t
    if t > 1:
        var_count = max(0.0, (sum_w2 - sum_w * sum_w / t) / (t - 1))
    else:
        var_count = 0.0
    mean = spec.p * mean_count
    sd = spec.p * math.sqrt(var_count)
    half = Z95 * sd / math.sqrt(t)
    return MeanEstimate(mean=mean, sample_sd=sd, trials=t,
                        ci_low=mean - half, ci_high=mean + half)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line through (n, log estimate)."""

    slope: float
    intercept: float
    r_squared: float
    used: tuple[tuple[int, float], ...]
    dropped: tuple[int, ...]


def fit_decay(points: Sequence[tuple[int, float]]) -> DecayFit:
    """Fit log(estimate) ~ intercept + slope·n; slope is −ĉ.

    Points with non-positive estimates carry no log value; they are
    dropped and reported rather than patched with a pseudocount.
    """
    used = tuple((int(n), float(v)) for n, v in points if v > 0.0)
    dropped = tuple(int(n) for n, v in points if v <= 0.0)
    if len(used) < 3:
        raise ValueError(
            f"need at least 3 positive points to fit, got {len(used)} "
            f"(dropped: {list(dropped)})")
    xs = np.array([n for n, _ in used], dtype=np.float64)
    ys = np.log(np.array([v for _, v in used], dtype=np.float64))
    xbar = xs.mean()
    ybar = ys.mean()
    sxx = float(((xs - xbar) ** 2).sum())
    sxy = float(((xs - xbar) * (ys - ybar)).sum())
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    resid = ys - (intercept + slope * xs)
    ss_res = float((resid**2).sum())
    ss_tot = float(((ys - ybar) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(slope=slope, intercept=intercept, r_squared=r2,
                    used=used, dropped=dropped)
