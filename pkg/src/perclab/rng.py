"""Counter-based random stream shared by every sampling backend.

Each edge variate is a pure function of (master seed, trial index, edge),
so lazy cluster exploration can reveal edges in any order, coupled runs at
different p reuse the same uniforms, and sharding trials across workers
cannot change a single sample.

Construction (all arithmetic mod 2^64):

    trial_key          = mix(seed, trial_index)
    edge_code(axis, x) = fold of mix over (EDGE_SALT ^ axis, coords of x)
                         where x is the lexicographically smaller endpoint
    uniform            = (mix(trial_key, edge_code) >> 11) * 2^-53

mix(a, b) = fin(fin(a) + b) with fin the splitmix64 finalizer.  The first
argument is avalanched before the second enters, so mix is asymmetric:
seed/trial pairs like (1, 2) and (2, 1) cannot collide the way a
symmetric combiner would, and distinct seeds give genuinely disjoint
trial-key ranges rather than permutations of each other.  The scalar
functions here are the reference; the NumPy and Cython kernels
reimplement them verbatim and are tested for bit equality against these.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
EDGE_SALT = 0xE5C3A9D81B67F24D

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def fin(z: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix(a: int, b: int) -> int:
    """Combine two 64-bit words into one well-mixed word (asymmetric)."""
    return fin(fin(a) + (b & MASK64))


def trial_key(seed: int, trial_index: int) -> int:
    """Per-trial stream key."""
    return mix(seed, trial_index)


def edge_code(axis: int, coords: tuple[int, ...]) -> int:
    """Canonical 64-bit code of a lattice edge.

    `coords` are the coordinates of the lexicographically smaller endpoint
    (for the edge {x, x+e_axis} that is x); negative coordinates enter as
    their two's-complement 64-bit image, so codes are stable across runs,
    boxes, and platforms.
    """
    h = fin(EDGE_SALT ^ axis)
    for c in coords:
        h = mix(h, c & MASK64)
    return h


def edge_uniform(tkey: int, ecode: int) -> float:
    """Uniform variate in [0, 1) attached to (trial, edge)."""
    return (mix(tkey, ecode) >> 11) * 2.0**-53


def edge_is_open(tkey: int, ecode: int, p: float) -> bool:
    """Bernoulli(p) state of an edge within one trial."""
    return edge_uniform(tkey, ecode) < p
