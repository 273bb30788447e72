"""Pure-Python (NumPy) kernel backend.

Implements the same six entry points as the compiled extension in
`_kernels_cy.pyx` and must agree with it bit for bit; `tests/test_kernels.py`
enforces the equivalence.  Exact-enumeration kernels sweep configurations in
chunks of fixed index order, so sharding cannot change the integer counts.
"""

from __future__ import annotations

import numpy as np

from .rng import EDGE_SALT, MASK64, fin, mix, trial_key

_U64 = np.uint64
_CHUNK = 1 << 16

_FIN_M1 = _U64(0xBF58476D1CE4E5B9)
_FIN_M2 = _U64(0x94D049BB133111EB)
_INV53 = 2.0**-53


def _fin_vec(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _FIN_M1
        z = (z ^ (z >> _U64(27))) * _FIN_M2
        return z ^ (z >> _U64(31))


def _mix_vec(a, b):
    with np.errstate(over="ignore"):
        return _fin_vec(_fin_vec(a) + b)


def _edge_codes_vec(axis: int, coords) -> np.ndarray:
    """Vectorized rng.edge_code over rows of an int64 coords array."""
    h = np.full(coords.shape[0], fin(EDGE_SALT ^ axis), dtype=_U64)
    for j in range(coords.shape[1]):
        h = _mix_vec(h, coords[:, j].astype(np.int64).astype(_U64))
    return h


def _closure(masks, reach, edge_bits, end_bits):
    """Connected closure: grow per-config reach sets along open edges."""
    while True:
        changed = False
        for eb, both in zip(edge_bits, end_bits):
            rb = reach & both
            touch = ((masks & eb) != 0) & (rb != 0) & (rb != both)
            if touch.any():
                reach[touch] |= both
                changed = True
        if not changed:
            return reach


def _edge_arrays(edges_u, edges_v):
    edge_bits = [_U64(1 << e) for e in range(len(edges_u))]
    end_bits = [_U64((1 << u) | (1 << v)) for u, v in zip(edges_u, edges_v)]
    return edge_bits, end_bits


def subset_connectivity_counts(num_vertices, edges_u, edges_v, source,
                               target_masks):
    """counts[t][k]: configurations with k open edges whose open cluster of
    `source` meets target_masks[t], over all 2^E configurations."""
    n_edges = len(edges_u)
    edge_bits, end_bits = _edge_arrays(edges_u, edges_v)
    src = _U64(1 << source)
    tms = [_U64(tm) for tm in target_masks]
    counts = [np.zeros(n_edges + 1, dtype=np.int64) for _ in tms]
    total = 1 << n_edges
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        masks = np.arange(lo, hi, dtype=_U64)
        reach = np.full(hi - lo, src, dtype=_U64)
        _closure(masks, reach, edge_bits, end_bits)
        pc = np.bitwise_count(masks).astype(np.int64)
        for t, tm in enumerate(tms):
            sel = (reach & tm) != 0
            counts[t] += np.bincount(pc[sel], minlength=n_edges + 1)
    return [c.tolist() for c in counts]


def subset_pivotal_counts(num_vertices, edges_u, edges_v, source, target_mask):
    """counts[e][k]: configurations (k open edges) where edge e is pivotal
    for the event {cluster of source meets target_mask}."""
    n_edges = len(edges_u)
    edge_bits, end_bits = _edge_arrays(edges_u, edges_v)
    src = _U64(1 << source)
    tm = _U64(target_mask)
    total = 1 << n_edges

    hit = np.empty(total, dtype=bool)
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        masks = np.arange(lo, hi, dtype=_U64)
        reach = np.full(hi - lo, src, dtype=_U64)
        _closure(masks, reach, edge_bits, end_bits)
        hit[lo:hi] = (reach & tm) != 0

    counts = [np.zeros(n_edges + 1, dtype=np.int64) for _ in range(n_edges)]
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        masks = np.arange(lo, hi, dtype=np.int64)
        pc = np.bitwise_count(masks.astype(_U64)).astype(np.int64)
        for e in range(n_edges):
            bit = 1 << e
            piv = hit[masks | bit] & ~hit[masks & ~bit]
            counts[e] += np.bincount(pc[piv], minlength=n_edges + 1)
    return [c.tolist() for c in counts]


def subset_blocking_joint_counts(num_vertices, edges_u, edges_v,
                                 boundary_mask, s_mask, s_edge_mask,
                                 source, targets):
    """For the event {blocked set == s_mask}: counts by open-edge number of
    the event alone (s_counts) and, per target x, jointly with {source
    connected to x using open edges internal to the blocked set}.

    The blocked set of a configuration is the set of vertices NOT joined to
    boundary_mask by open edges.
    """
    n_edges = len(edges_u)
    edge_bits, end_bits = _edge_arrays(edges_u, edges_v)
    all_v = _U64((1 << num_vertices) - 1)
    bnd = _U64(boundary_mask)
    sm = _U64(s_mask)
    sem = _U64(s_edge_mask)
    src = _U64(1 << source)
    s_counts = np.zeros(n_edges + 1, dtype=np.int64)
    joint = [np.zeros(n_edges + 1, dtype=np.int64) for _ in targets]
    total = 1 << n_edges
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        masks = np.arange(lo, hi, dtype=_U64)
        reach_b = np.full(hi - lo, bnd, dtype=_U64)
        _closure(masks, reach_b, edge_bits, end_bits)
        sel = (all_v & ~reach_b) == sm
        if not sel.any():
            continue
        m_sel = masks[sel]
        pc = np.bitwise_count(m_sel).astype(np.int64)
        s_counts += np.bincount(pc, minlength=n_edges + 1)
        reach_s = np.full(m_sel.shape, src, dtype=_U64)
        _closure(m_sel & sem, reach_s, edge_bits, end_bits)
        for t, x in enumerate(targets):
            hit = (reach_s & _U64(1 << x)) != 0
            joint[t] += np.bincount(pc[hit], minlength=n_edges + 1)
    return s_counts.tolist(), [c.tolist() for c in joint]


class _BoxWork:
    """Reusable per-box buffers for the trial loop."""

    def __init__(self, d: int, n: int):
        side = 2 * n + 1
        self.d = d
        self.n = n
        self.size = side**d
        self.strides = np.array([side**i for i in range(d)], dtype=np.int64)
        self.origin_code = int(np.sum(n * self.strides))
        self.visited = np.zeros(self.size, dtype=bool)


def _explore_box_maxnorm(work: _BoxWork, p: float, tkey: int) -> int:
    """One lazy BFS trial; returns the largest sup-norm among visited
    vertices (== n exactly when the boundary was reached)."""
    d, n = work.d, work.n
    work.visited[:] = False
    work.visited[work.origin_code] = True
    codes = np.array([work.origin_code], dtype=np.int64)
    coords = np.zeros((1, d), dtype=np.int64)
    tk = np.full(1, tkey, dtype=_U64)
    maxnorm = 0
    while codes.size:
        new_codes = []
        new_coords = []
        for axis in range(d):
            stride = work.strides[axis]
            for direction in (-1, 1):
                nc = coords[:, axis] + direction
                valid = np.abs(nc) <= n
                if not valid.any():
                    continue
                idx = np.nonzero(valid)[0]
                ncodes = codes[idx] + direction * stride
                fresh = ~work.visited[ncodes]
                if not fresh.any():
                    continue
                idx = idx[fresh]
                ncodes = ncodes[fresh]
                low = coords[idx].copy()
                if direction == -1:
                    low[:, axis] -= 1
                ecodes = _edge_codes_vec(axis, low)
                bits = _mix_vec(np.broadcast_to(tk, ecodes.shape), ecodes)
                is_open = (bits >> _U64(11)).astype(np.float64) * _INV53 < p
                if not is_open.any():
                    continue
                ncodes = ncodes[is_open]
                ncrd = coords[idx[is_open]].copy()
                ncrd[:, axis] += direction
                work.visited[ncodes] = True
                new_codes.append(ncodes)
                new_coords.append(ncrd)
        if not new_codes:
            break
        codes = np.concatenate(new_codes)
        coords = np.concatenate(new_coords)
        layer_norm = int(np.abs(coords).max())
        if layer_norm > maxnorm:
            maxnorm = layer_norm
            if maxnorm >= n:
                return n
    return maxnorm


def mc_reach_maxnorm_hist(d, n, p, seed, trial_start, trials):
    """hist[m]: trials whose exploration in Λ_n attained max sup-norm m."""
    work = _BoxWork(d, n)
    hist = np.zeros(n + 1, dtype=np.int64)
    for t in range(trial_start, trial_start + trials):
        hist[_explore_box_maxnorm(work, p, trial_key(seed, t))] += 1
    return hist.tolist()


def mc_reach_indicators(d, n, p, seed, trial_start, trials):
    """Per-trial 0/1 array of the event {origin reaches ∂Λ_n}."""
    work = _BoxWork(d, n)
    out = np.zeros(trials, dtype=np.uint8)
    for i, t in enumerate(range(trial_start, trial_start + trials)):
        if _explore_box_maxnorm(work, p, trial_key(seed, t)) >= n:
            out[i] = 1
    return out


def mc_graph_stats(indptr, adjv, adjcode, weights, source, target,
                   p, seed, trial_start, trials):
    """Cluster-of-source statistics on an explicit graph.

    Returns (successes, sum_w, sum_w2): trials whose cluster contains
    `target` (ignored if target < 0), and the exact integer sum / sum of
    squares over trials of the weight of the cluster.
    """
    num_vertices = len(indptr) - 1
    if num_vertices <= 64:
        return _graph_stats_bitmask(indptr, adjv, adjcode, weights, source,
                                    target, p, seed, trial_start, trials)
    return _graph_stats_scalar(indptr, adjv, adjcode, weights, source,
                               target, p, seed, trial_start, trials)


def _graph_edge_list(indptr, adjv, adjcode):
    """Recover the undirected edge list (u < v) with codes from CSR form."""
    edges = []
    for u in range(len(indptr) - 1):
        for k in range(indptr[u], indptr[u + 1]):
            v = adjv[k]
            if u < v:
                edges.append((u, v, adjcode[k]))
    return edges


def _graph_stats_bitmask(indptr, adjv, adjcode, weights, source, target,
                         p, seed, trial_start, trials):
    edges = _graph_edge_list(indptr, adjv, adjcode)
    ecodes = np.array([c for _, _, c in edges], dtype=_U64)
    end_bits = [_U64((1 << u) | (1 << v)) for u, v, _ in edges]
    src = _U64(1 << source)
    successes = 0
    sum_w = 0
    sum_w2 = 0
    wl = [int(w) for w in weights]
    for lo in range(trial_start, trial_start + trials, _CHUNK):
        cnt = min(_CHUNK, trial_start + trials - lo)
        tkeys = _mix_vec(np.full(cnt, seed, dtype=_U64),
                         np.arange(lo, lo + cnt, dtype=_U64))
        is_open = np.empty((cnt, len(edges)), dtype=bool)
        for e in range(len(edges)):
            bits = _mix_vec(tkeys, np.full(cnt, ecodes[e], dtype=_U64))
            is_open[:, e] = (bits >> _U64(11)).astype(np.float64) * _INV53 < p
        reach = np.full(cnt, src, dtype=_U64)
        while True:
            changed = False
            for e, both in enumerate(end_bits):
                rb = reach & both
                touch = is_open[:, e] & (rb != 0) & (rb != both)
                if touch.any():
                    reach[touch] |= both
                    changed = True
            if not changed:
                break
        if target >= 0:
            successes += int(((reach >> _U64(target)) & _U64(1)).sum())
        w_tot = np.zeros(cnt, dtype=np.int64)
        for v, w in enumerate(wl):
            if w:
                w_tot += w * ((reach >> _U64(v)) & _U64(1)).astype(np.int64)
        sum_w += int(w_tot.sum())
        sum_w2 += int((w_tot * w_tot).sum())
    return successes, sum_w, sum_w2


def _graph_stats_scalar(indptr, adjv, adjcode, weights, source, target,
                        p, seed, trial_start, trials):
    adj = [[(int(adjv[k]), int(adjcode[k]))
            for k in range(indptr[u], indptr[u + 1])]
           for u in range(len(indptr) - 1)]
    wl = [int(w) for w in weights]
    threshold = p
    successes = 0
    sum_w = 0
    sum_w2 = 0
    num_vertices = len(adj)
    visited = bytearray(num_vertices)
    for t in range(trial_start, trial_start + trials):
        tkey = trial_key(seed, t)
        for i in range(num_vertices):
            visited[i] = 0
        visited[source] = 1
        stack = [source]
        w_tot = wl[source]
        hit = source == target
        while stack:
            u = stack.pop()
            for v, code in adj[u]:
                if visited[v]:
                    continue
                if ((mix(tkey, code) >> 11) * _INV53) < threshold:
                    visited[v] = 1
                    w_tot += wl[v]
                    if v == target:
                        hit = True
                    stack.append(v)
        if hit:
            successes += 1
        sum_w += w_tot
        sum_w2 += w_tot * w_tot
    return successes, sum_w, sum_w2
