"""perclab: a laboratory for Bernoulli bond percolation on Z^d.

Exact rational-polynomial enumeration of connection probabilities and the
phi functional on small regions, certified rational lower bounds on the
critical point, and seeded Monte Carlo cluster exploration for the
finite-volume inequalities.
"""

from .kernels import BACKEND
from .lattice import Box, VertexSet, make_box

__version__ = "0.1.0"

__all__ = ["BACKEND", "Box", "VertexSet", "make_box", "__version__"]
