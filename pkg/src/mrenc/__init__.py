"""One-shot federated learning over non-convex Lipschitz losses.

Machines summarize their sampled losses into bit-budgeted multi-resolution
packets; the server rebuilds an approximate loss surface and returns its
minimizer.  The package also ships the hard loss families, naive baselines,
an information-theoretic coin-flipping testbed, and an experiment harness.
"""

from .errors import ConfigError, DecodeError, EstimationFailedError
from .grids import GridCoord, ProblemDims, ResolutionParams, compute_delta

__all__ = [
    "ConfigError",
    "DecodeError",
    "EstimationFailedError",
    "GridCoord",
    "ProblemDims",
    "ResolutionParams",
    "compute_delta",
]
