"""Kernel backend selection.

The compiled extension is used when importable; otherwise the NumPy
fallback.  Set PERCLAB_FORCE_FALLBACK=1 to insist on the fallback (used by
the benchmark and the backend-equivalence tests).  Both backends implement
the same six functions with bit-identical results:

    subset_connectivity_counts(num_vertices, edges_u, edges_v, source, target_masks)
    subset_pivotal_counts(num_vertices, edges_u, edges_v, source, target_mask)
    subset_blocking_joint_counts(num_vertices, edges_u, edges_v, boundary_mask,
                                 s_mask, s_edge_mask, source, targets)
    mc_reach_maxnorm_hist(d, n, p, seed, trial_start, trials)
    mc_reach_indicators(d, n, p, seed, trial_start, trials)
    mc_graph_stats(indptr, adjv, adjcode, weights, source, target, p, seed,
                   trial_start, trials)
"""

from __future__ import annotations

import os


def _select():
    if not os.environ.get("PERCLAB_FORCE_FALLBACK"):
        try:
            from . import _kernels_cy
            return _kernels_cy, "cython"
        except ImportError:
            pass
    from . import _kernels_py
    return _kernels_py, "python"


_impl, BACKEND = _select()

subset_connectivity_counts = _impl.subset_connectivity_counts
subset_pivotal_counts = _impl.subset_pivotal_counts
subset_blocking_joint_counts = _impl.subset_blocking_joint_counts
mc_reach_maxnorm_hist = _impl.mc_reach_maxnorm_hist
mc_reach_indicators = _impl.mc_reach_indicators
mc_graph_stats = _impl.mc_graph_stats


def available_backends() -> dict[str, object]:
    """All importable backends by name (for benchmarks and tests)."""
    from . import _kernels_py
    out: dict[str, object] = {"python": _kernels_py}
    try:
        from . import _kernels_cy
        out["cython"] = _kernels_cy
    except ImportError:
        pass
    return out
