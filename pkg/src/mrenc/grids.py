"""Multi-resolution grid geometry on [-1,1]^d.

The domain is tiled, at each level l, into 2^(l*d) equal sub-cubes of edge
2^(1-l); grid level l is the set of their centers.  Level 0 is the single
root point at the origin.  The finest level t and the edge scale delta are
derived from the problem dimensions (machine count m, samples n, bit budget
B, dimension d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ProblemDims:
    """Problem size: m machines, n samples each, B bits per machine, dimension d."""

    m: int
    n: int
    B: int
    d: int

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"machine count must be >= 1, got {self.m}")
        if self.n < 2 or self.n % 2 != 0:
            raise ConfigError(f"samples per machine must be even and >= 2, got {self.n}")
        if self.d < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.d}")
        if self.m * self.n < 3:
            raise ConfigError("need m*n >= 3 so that ln(mn) > 1")
        if self.B < self.d * math.log2(self.m * self.n):
            raise ConfigError(
                f"bit budget B={self.B} below feasibility floor "
                f"d*log2(mn) = {self.d * math.log2(self.m * self.n):.2f}"
            )

    @property
    def mn(self) -> int:
        return self.m * self.n


@dataclass(frozen=True)
class ResolutionParams:
    """Edge scale delta, finest level t, and accuracy target epsilon."""

    delta: float
    t: int
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError(f"delta must lie in (0, 1], got {self.delta}")
        if self.t < 0:
            raise ConfigError(f"level count must be non-negative, got {self.t}")
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")


def compute_delta(dims: ProblemDims) -> ResolutionParams:
    """Derive (delta, t, epsilon) from the problem dimensions.

    delta = min(1, ln(mn) * max(ln(mn)/(mB)^(1/d), m^(-1/2))), the finest
    level is t = ceil(log2(1/delta)), and epsilon = 4*delta*sqrt(d)*ln(mn)/sqrt(n).
    """
    ln_mn = math.log(dims.mn)
    raw = ln_mn * max(ln_mn / (dims.m * dims.B) ** (1.0 / dims.d), dims.m ** -0.5)
    delta = min(1.0, raw)
    # tiny slack so that delta == 2^-k does not round t up a level
    t = 0 if delta >= 1.0 else math.ceil(math.log2(1.0 / delta) - 1e-12)
    epsilon = 4.0 * delta * math.sqrt(dims.d) * ln_mn / math.sqrt(dims.n)
    return ResolutionParams(delta=delta, t=t, epsilon=epsilon)


@dataclass(frozen=True)
class GridCoord:
    """A grid point: level l plus d integer cell indices, each in [0, 2^l).

    Stored as integers so equality and deduplication are exact; the float
    center is derived on demand.
    """

    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ConfigError(f"level must be non-negative, got {self.level}")
        hi = 1 << self.level
        for i in self.index:
            if not 0 <= i < hi:
                raise ConfigError(f"index {self.index} out of range for level {self.level}")

    @property
    def d(self) -> int:
        return len(self.index)

    def center(self) -> np.ndarray:
        """Center coordinates: -1 + 2^(-l) * (2*i + 1) per axis, in (-1, 1)."""
        scale = 2.0 ** -self.level
        return np.array([-1.0 + scale * (2 * i + 1) for i in self.index])

    def sort_key(self) -> tuple:
        return (self.level, self.index)


def root(d: int) -> GridCoord:
    """The single level-0 point at the origin."""
    return GridCoord(0, (0,) * d)


def parent(p: GridCoord) -> GridCoord:
    """The level l-1 point whose cube contains p; distance sqrt(d)*2^-l."""
    if p.level < 1:
        raise ConfigError("the root point has no parent")
    return GridCoord(p.level - 1, tuple(i // 2 for i in p.index))


def children(p: GridCoord) -> list[GridCoord]:
    """All 2^d points one level finer whose parent is p."""
    pts = [()]
    for i in p.index:
        pts = [pre + (2 * i + b,) for pre in pts for b in (0, 1)]
    return [GridCoord(p.level + 1, idx) for idx in pts]


def level_distribution(t: int, d: int) -> np.ndarray:
    """Probability of sampling each level 1..t: Pr(l) proportional to 2^((d-2)l).

    Returns an empty vector for t = 0 (the encoder then emits nothing).
    """
    if t < 0:
        raise ConfigError(f"level count must be non-negative, got {t}")
    if t == 0:
        return np.zeros(0)
    weights = np.array([2.0 ** ((d - 2) * l) for l in range(1, t + 1)])
    return weights / weights.sum()


def sample_grid_point(params: ResolutionParams, d: int, rng: np.random.Generator) -> GridCoord:
    """Draw a level from the level distribution, then a uniform point in it."""
    if params.t < 1:
        raise ConfigError("cannot sample a grid point when t = 0")
    probs = level_distribution(params.t, d)
    level = int(rng.choice(np.arange(1, params.t + 1), p=probs))
    index = tuple(int(i) for i in rng.integers(0, 1 << level, size=d))
    return GridCoord(level, index)


def cell_bounds(p: GridCoord, params: ResolutionParams) -> tuple[np.ndarray, np.ndarray]:
    """The cube of edge 2*delta centered at a finest-level point, clipped to the domain."""
    if p.level != params.t:
        raise ConfigError(f"cells are defined at level t={params.t}, got level {p.level}")
    c = p.center()
    lo = np.maximum(c - params.delta, -1.0)
    hi = np.minimum(c + params.delta, 1.0)
    return lo, hi
