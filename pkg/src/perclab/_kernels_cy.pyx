# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Hot loops only: exact configuration sweeps and the per-trial lazy cluster
exploration.  Must agree bit for bit with `_kernels_py`; the random stream
is the one documented in `rng.py`.
"""

from libc.stdint cimport uint64_t, int64_t, uint32_t, int32_t, uint8_t
from libc.stdlib cimport malloc, calloc, free

import numpy as np

cdef uint64_t EDGE_SALT = <uint64_t>0xE5C3A9D81B67F24D
cdef uint64_t FIN_M1 = <uint64_t>0xBF58476D1CE4E5B9
cdef uint64_t FIN_M2 = <uint64_t>0x94D049BB133111EB
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t c_fin(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * FIN_M1
    z = (z ^ (z >> 27)) * FIN_M2
    return z ^ (z >> 31)


cdef inline uint64_t c_mix(uint64_t a, uint64_t b) nogil:
    return c_fin(c_fin(a) + b)


cdef inline int c_popcount(uint64_t x) nogil:
    x = x - ((x >> 1) & <uint64_t>0x5555555555555555)
    x = (x & <uint64_t>0x3333333333333333) + ((x >> 2) & <uint64_t>0x3333333333333333)
    x = (x + (x >> 4)) & <uint64_t>0x0F0F0F0F0F0F0F0F
    return <int>((x * <uint64_t>0x0101010101010101) >> 56)


cdef inline uint64_t c_closure(uint64_t mask, uint64_t start, int n_edges,
                               uint64_t* end_both) nogil:
    cdef uint64_t reach = start
    cdef uint64_t rb, both
    cdef bint changed = True
    cdef int e
    while changed:
        changed = False
        for e in range(n_edges):
            if (mask >> e) & 1:
                both = end_both[e]
                rb = reach & both
                if rb != 0 and rb != both:
                    reach = reach | both
                    changed = True
    return reach


cdef uint64_t* _end_both(list edges_u, list edges_v):
    cdef int n_edges = len(edges_u)
    cdef uint64_t* arr = <uint64_t*> malloc(n_edges * sizeof(uint64_t))
    cdef int e
    for e in range(n_edges):
        arr[e] = (<uint64_t>1 << <int>edges_u[e]) | (<uint64_t>1 << <int>edges_v[e])
    return arr


def fin_u64(z):
    """Bit-equality hook for tests."""
    return c_fin(<uint64_t>z)


def mix_u64(a, b):
    return c_mix(<uint64_t>a, <uint64_t>b)


def subset_connectivity_counts(num_vertices, edges_u, edges_v, source,
                               target_masks):
    cdef int n_edges = len(edges_u)
    cdef int n_targets = len(target_masks)
    cdef uint64_t* end_both = _end_both(edges_u, edges_v)
    cdef uint64_t* tms = <uint64_t*> malloc(n_targets * sizeof(uint64_t))
    cdef int64_t* counts = <int64_t*> calloc(n_targets * (n_edges + 1),
                                             sizeof(int64_t))
    cdef uint64_t src = <uint64_t>1 << <int>source
    cdef uint64_t total = <uint64_t>1 << n_edges
    cdef uint64_t mask, reach
    cdef int t, pc
    for t in range(n_targets):
        tms[t] = <uint64_t>target_masks[t]
    try:
        with nogil:
            for mask in range(total):
                reach = c_closure(mask, src, n_edges, end_both)
                pc = c_popcount(mask)
                for t in range(n_targets):
                    if reach & tms[t]:
                        counts[t * (n_edges + 1) + pc] += 1
        return [[counts[t * (n_edges + 1) + k] for k in range(n_edges + 1)]
                for t in range(n_targets)]
    finally:
        free(end_both)
        free(tms)
        free(counts)


def subset_pivotal_counts(num_vertices, edges_u, edges_v, source, target_mask):
    cdef int n_edges = len(edges_u)
    cdef uint64_t* end_both = _end_both(edges_u, edges_v)
    cdef uint64_t total = <uint64_t>1 << n_edges
    cdef uint8_t* hits = <uint8_t*> malloc(total)
    cdef int64_t* counts = <int64_t*> calloc(n_edges * (n_edges + 1),
                                             sizeof(int64_t))
    cdef uint64_t src = <uint64_t>1 << <int>source
    cdef uint64_t tm = <uint64_t>target_mask
    cdef uint64_t mask, bit
    cdef int e, pc
    try:
        with nogil:
            for mask in range(total):
                hits[mask] = 1 if (c_closure(mask, src, n_edges, end_both) & tm) else 0
            for mask in range(total):
                pc = c_popcount(mask)
                for e in range(n_edges):
                    bit = <uint64_t>1 << e
                    if hits[mask | bit] and not hits[mask & ~bit]:
                        counts[e * (n_edges + 1) + pc] += 1
        return [[counts[e * (n_edges + 1) + k] for k in range(n_edges + 1)]
                for e in range(n_edges)]
    finally:
        free(end_both)
        free(hits)
        free(counts)


def subset_blocking_joint_counts(num_vertices, edges_u, edges_v,
                                 boundary_mask, s_mask, s_edge_mask,
                                 source, targets):
    cdef int n_edges = len(edges_u)
    cdef int n_targets = len(targets)
    cdef uint64_t* end_both = _end_both(edges_u, edges_v)
    cdef int64_t* s_counts = <int64_t*> calloc(n_edges + 1, sizeof(int64_t))
    cdef int64_t* joint = <int64_t*> calloc(n_targets * (n_edges + 1),
                                            sizeof(int64_t))
    cdef int* tgt = <int*> malloc(n_targets * sizeof(int))
    cdef uint64_t all_v = (<uint64_t>1 << <int>num_vertices) - 1
    cdef uint64_t bnd = <uint64_t>boundary_mask
    cdef uint64_t sm = <uint64_t>s_mask
    cdef uint64_t sem = <uint64_t>s_edge_mask
    cdef uint64_t src = <uint64_t>1 << <int>source
    cdef uint64_t total = <uint64_t>1 << n_edges
    cdef uint64_t mask, reach_b, reach_s
    cdef int t, pc
    for t in range(n_targets):
        tgt[t] = <int>targets[t]
    try:
        with nogil:
            for mask in range(total):
                reach_b = c_closure(mask, bnd, n_edges, end_both)
                if (all_v & ~reach_b) != sm:
                    continue
                pc = c_popcount(mask)
                s_counts[pc] += 1
                reach_s = c_closure(mask & sem, src, n_edges, end_both)
                for t in range(n_targets):
                    if (reach_s >> tgt[t]) & 1:
                        joint[t * (n_edges + 1) + pc] += 1
        return ([s_counts[k] for k in range(n_edges + 1)],
                [[joint[t * (n_edges + 1) + k] for k in range(n_edges + 1)]
                 for t in range(n_targets)])
    finally:
        free(end_both)
        free(s_counts)
        free(joint)
        free(tgt)


cdef int _explore_box(int d, int n, double p, uint64_t tkey,
                      int64_t* strides, uint32_t* visited, uint32_t stamp,
                      int64_t* qcodes, int32_t* qcoords) nogil:
    """One lazy BFS trial in Λ_n; returns max sup-norm among visited."""
    cdef int64_t head = 0, tail = 1
    cdef int64_t code, ncode, base, nb, ocode = 0
    cdef int axis, i, step, maxnorm = 0, norm
    cdef int32_t c, ncv, v, av
    cdef uint64_t h, bits
    cdef uint64_t ftk = c_fin(tkey)  # mix(tkey, h) == c_fin(ftk + h)
    for i in range(d):
        ocode += n * strides[i]
    visited[ocode] = stamp
    qcodes[0] = ocode
    for i in range(d):
        qcoords[i] = 0
    while head < tail:
        code = qcodes[head]
        base = head * d
        for axis in range(d):
            for step in range(2):
                c = qcoords[base + axis]
                ncv = c + 2 * step - 1
                if ncv > n or ncv < -n:
                    continue
                ncode = code + (2 * step - 1) * strides[axis]
                if visited[ncode] == stamp:
                    continue
                # code of the edge: coords of the lex-smaller endpoint
                h = c_fin(EDGE_SALT ^ <uint64_t>axis)
                for i in range(d):
                    v = qcoords[base + i]
                    if i == axis and step == 0:
                        v = ncv
                    h = c_mix(h, <uint64_t><int64_t>v)
                bits = c_fin(ftk + h)
                if ((bits >> 11) * INV53) < p:
                    visited[ncode] = stamp
                    qcodes[tail] = ncode
                    nb = tail * d
                    norm = 0
                    for i in range(d):
                        v = qcoords[base + i]
                        if i == axis:
                            v = ncv
                        qcoords[nb + i] = v
                        av = -v if v < 0 else v
                        if av > norm:
                            norm = av
                    tail += 1
                    if norm > maxnorm:
                        maxnorm = norm
                        if maxnorm >= n:
                            return n
        head += 1
    return maxnorm


cdef struct BoxBuffers:
    int64_t* strides
    uint32_t* visited
    int64_t* qcodes
    int32_t* qcoords
    int64_t size


cdef int _alloc_box(int d, int n, BoxBuffers* buf) except -1:
    cdef int64_t side = 2 * n + 1
    cdef int64_t size = 1
    cdef int i
    buf.strides = <int64_t*> malloc(d * sizeof(int64_t))
    for i in range(d):
        buf.strides[i] = size
        size *= side
    buf.size = size
    buf.visited = <uint32_t*> calloc(size, sizeof(uint32_t))
    buf.qcodes = <int64_t*> malloc(size * sizeof(int64_t))
    buf.qcoords = <int32_t*> malloc(size * d * sizeof(int32_t))
    if (buf.visited == NULL or buf.qcodes == NULL or buf.qcoords == NULL
            or buf.strides == NULL):
        raise MemoryError("box buffers")
    return 0


cdef void _free_box(BoxBuffers* buf) noexcept:
    free(buf.strides)
    free(buf.visited)
    free(buf.qcodes)
    free(buf.qcoords)


def mc_reach_maxnorm_hist(d, n, p, seed, trial_start, trials):
    cdef int cd = d, cn = n
    cdef double cp = p
    cdef uint64_t cseed = <uint64_t>seed
    cdef uint64_t t0 = <uint64_t>trial_start
    cdef int64_t nt = trials
    cdef BoxBuffers buf
    cdef int64_t* hist = <int64_t*> calloc(cn + 1, sizeof(int64_t))
    cdef int64_t i
    cdef uint64_t tkey
    _alloc_box(cd, cn, &buf)
    try:
        with nogil:
            for i in range(nt):
                tkey = c_mix(cseed, t0 + <uint64_t>i)
                hist[_explore_box(cd, cn, cp, tkey, buf.strides, buf.visited,
                                  <uint32_t>(i + 1), buf.qcodes, buf.qcoords)] += 1
        return [hist[k] for k in range(cn + 1)]
    finally:
        _free_box(&buf)
        free(hist)


def mc_reach_indicators(d, n, p, seed, trial_start, trials):
    cdef int cd = d, cn = n
    cdef double cp = p
    cdef uint64_t cseed = <uint64_t>seed
    cdef uint64_t t0 = <uint64_t>trial_start
    cdef int64_t nt = trials
    cdef BoxBuffers buf
    out = np.zeros(trials, dtype=np.uint8)
    cdef uint8_t[::1] view = out
    cdef int64_t i
    cdef uint64_t tkey
    _alloc_box(cd, cn, &buf)
    try:
        with nogil:
            for i in range(nt):
                tkey = c_mix(cseed, t0 + <uint64_t>i)
                if _explore_box(cd, cn, cp, tkey, buf.strides, buf.visited,
                                <uint32_t>(i + 1), buf.qcodes, buf.qcoords) >= cn:
                    view[i] = 1
        return out
    finally:
        _free_box(&buf)


def mc_graph_stats(indptr, adjv, adjcode, weights, source, target,
                   p, seed, trial_start, trials):
    cdef int32_t[::1] v_indptr = indptr
    cdef int32_t[::1] v_adjv = adjv
    cdef uint64_t[::1] v_code = adjcode
    cdef int64_t[::1] v_w = weights
    cdef int num_vertices = v_indptr.shape[0] - 1
    cdef int src = source, tgt = target
    cdef double cp = p
    cdef uint64_t cseed = <uint64_t>seed
    cdef uint64_t t0 = <uint64_t>trial_start
    cdef int64_t nt = trials
    cdef uint32_t* visited = <uint32_t*> calloc(num_vertices, sizeof(uint32_t))
    cdef int32_t* stack = <int32_t*> malloc(num_vertices * sizeof(int32_t))
    cdef int64_t successes = 0, sum_w = 0, sum_w2 = 0, w_tot
    cdef int64_t i
    cdef int32_t u, v2
    cdef int64_t sp, k
    cdef uint64_t ftk
    cdef uint32_t stamp
    cdef bint hit
    if visited == NULL or stack == NULL:
        free(visited)
        free(stack)
        raise MemoryError("graph buffers")
    try:
        with nogil:
            for i in range(nt):
                # mix(trial_key, code) == c_fin(ftk + code) with ftk hoisted
                ftk = c_fin(c_mix(cseed, t0 + <uint64_t>i))
                stamp = <uint32_t>(i + 1)
                visited[src] = stamp
                stack[0] = src
                sp = 1
                w_tot = v_w[src]
                hit = src == tgt
                while sp > 0:
                    sp -= 1
                    u = stack[sp]
                    for k in range(v_indptr[u], v_indptr[u + 1]):
                        v2 = v_adjv[k]
                        if visited[v2] == stamp:
                            continue
                        if ((c_fin(ftk + v_code[k]) >> 11) * INV53) < cp:
                            visited[v2] = stamp
                            w_tot += v_w[v2]
                            if v2 == tgt:
                                hit = True
                            stack[sp] = v2
                            sp += 1
                if hit:
                    successes += 1
                sum_w += w_tot
                sum_w2 += w_tot * w_tot
        return successes, sum_w, sum_w2
    finally:
        free(visited)
        free(stack)
