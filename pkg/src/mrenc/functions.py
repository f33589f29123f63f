"""Loss-function families: Lipschitz-1 samples over [-1,1]^d and their distributions.

Three concrete families:

* sign-weighted hat grids (one grid point carries a biased sign coin) used
  to exercise the identification-hardness machinery,
* the 3x3 integer-grid variant with hat radius 1/2,
* a two-layer ReLU regression loss on d=4, rescaled to be 1-Lipschitz.

A point-mass wrapper turns any fixed loss into a noiseless distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError


def hat_function(theta, radius: float) -> float:
    """radius - ||theta|| inside the radius ball, zero outside; 1-Lipschitz."""
    if radius <= 0:
        raise ConfigError(f"hat radius must be positive, got {radius}")
    return max(0.0, radius - float(np.linalg.norm(theta)))


@dataclass(frozen=True)
class SignGridSpec:
    """Geometry of a regular grid of disjoint hat supports covering [-1,1]^d."""

    d: int
    g: int              # points per axis
    first_center: float
    spacing: float
    radius: float

    @property
    def n_points(self) -> int:
        return self.g ** self.d

    def center(self, index: tuple[int, ...]) -> np.ndarray:
        return np.array([self.first_center + self.spacing * i for i in index])

    def flat(self, index: tuple[int, ...]) -> int:
        out = 0
        for i in index:
            if not 0 <= i < self.g:
                raise ConfigError(f"grid index {index} out of range for g={self.g}")
            out = out * self.g + i
        return out

    def nearest_index(self, theta) -> tuple[int, ...]:
        idx = np.rint((np.asarray(theta) - self.first_center) / self.spacing).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, self.g - 1))

    def all_centers(self) -> np.ndarray:
        axes = self.first_center + self.spacing * np.arange(self.g)
        mesh = np.meshgrid(*([axes] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def lower_bound_grid(dims) -> SignGridSpec:
    """The mB-point grid with edge 2/(mB)^(1/d) and hat radius (mB)^(-1/d).

    Requires (mB)^(1/d) to be an integer.
    """
    mB = dims.m * dims.B
    g = round(mB ** (1.0 / dims.d))
    if g ** dims.d != mB:
        raise ConfigError(f"(mB)^(1/d) must be integral: mB={mB}, d={dims.d}")
    return SignGridSpec(
        d=dims.d, g=g, first_center=-1.0 + 1.0 / g, spacing=2.0 / g, radius=1.0 / g
    )


def nine_point_grid() -> SignGridSpec:
    """The 3x3 integer grid {-1,0,1}^2 with hat radius 1/2."""
    return SignGridSpec(d=2, g=3, first_center=-1.0, spacing=1.0, radius=0.5)


class SignGridLoss:
    """f(theta) = sum over grid points q of sign(q) * hat(theta - q).

    Supports are disjoint, so the sum collapses to the nearest grid point.
    """

    def __init__(self, spec: SignGridSpec, signs: np.ndarray):
        if signs.shape != (spec.n_points,):
            raise ConfigError(f"need {spec.n_points} signs, got shape {signs.shape}")
        self.spec = spec
        self.signs = np.asarray(signs, dtype=np.float64)

    def __call__(self, theta) -> float:
        return float(self.evaluate_batch(np.asarray(theta, dtype=np.float64)[None, :])[0])

    def evaluate_batch(self, thetas: np.ndarray) -> np.ndarray:
        s = self.spec
        return kernels.sign_grid_mean_loss(
            thetas, self.signs, s.first_center, s.spacing, s.g, s.radius
        )

    def brute_force(self, theta) -> float:
        """Full sum over all grid points; test oracle for the nearest-point shortcut."""
        theta = np.asarray(theta, dtype=np.float64)
        dists = np.linalg.norm(self.spec.all_centers() - theta, axis=1)
        return float(np.sum(self.signs * np.maximum(self.spec.radius - dists, 0.0)))


def f_sigma(signs: np.ndarray, spec: SignGridSpec, theta) -> float:
    """Evaluate the sign-weighted hat sum at theta."""
    return SignGridLoss(spec, signs)(theta)


class SignGridDistribution:
    """Random sign assignment with one biased grid point.

    Signs are independent fair coins except at point p, where the sign is +1
    with probability 1/2 - bias.  The expected loss is -2*bias*hat(theta - p),
    minimized at p.
    """

    closed_form = True

    def __init__(self, spec: SignGridSpec, p_index: tuple[int, ...], bias: float):
        if not 0.0 < bias < 0.5:
            raise ConfigError(f"sign bias must lie in (0, 1/2), got {bias}")
        self.spec = spec
        self.d = spec.d
        self.p_index = tuple(p_index)
        self.p_flat = spec.flat(self.p_index)
        self.bias = bias
        self.minimizer = spec.center(self.p_index)
        self.min_value = -2.0 * bias * spec.radius

    def sample(self, rng: np.random.Generator) -> SignGridLoss:
        signs = rng.integers(0, 2, size=self.spec.n_points).astype(np.float64) * 2.0 - 1.0
        signs[self.p_flat] = 1.0 if rng.random() < 0.5 - self.bias else -1.0
        return SignGridLoss(self.spec, signs)

    def expected_loss_batch(self, thetas: np.ndarray) -> np.ndarray:
        dists = np.linalg.norm(thetas - self.minimizer, axis=1)
        return -2.0 * self.bias * np.maximum(self.spec.radius - dists, 0.0)

    def expected_loss(self, theta) -> float:
        return float(self.expected_loss_batch(np.asarray(theta, dtype=np.float64)[None, :])[0])


def distribution_Pp(p_index: tuple[int, ...], C: float, dims) -> SignGridDistribution:
    """The hard instance on the mB-point grid: bias 1/(2*C*sqrt(n)*ln(mB)) at p."""
    mB = dims.m * dims.B
    denom = C * math.sqrt(dims.n) * math.log(mB)
    if denom <= 1.0:
        raise ConfigError(f"C*sqrt(n)*ln(mB) must exceed 1, got {denom:.4f}")
    return SignGridDistribution(lower_bound_grid(dims), p_index, bias=1.0 / (2.0 * denom))


def nine_point_family(p_index: tuple[int, int], mn: int) -> SignGridDistribution:
    """The 9-point instance: bias 1/(4*sqrt(mn)) at p, hat radius 1/2."""
    if mn < 4:
        raise ConfigError(f"need mn >= 4, got {mn}")
    return SignGridDistribution(nine_point_grid(), p_index, bias=1.0 / (4.0 * math.sqrt(mn)))


# ---------------------------------------------------------------------------
# two-layer ReLU regression on d = 4


def relu_prediction(theta1: np.ndarray, x: np.ndarray) -> float:
    """Forward map sum_r w2[r] * relu(theta1 @ x)_r with w2 = (1, -1)."""
    h = np.maximum(theta1 @ x, 0.0)
    return float(h[0] - h[1])


class ReluSampleLoss:
    """Scaled squared residual of one (x, y) observation.

    The domain point theta in [-1,1]^4 maps to the model matrix 2*theta
    reshaped to (2, 2); the residual is squared and multiplied by inv_scale
    so the family is 1-Lipschitz over the domain.
    """

    def __init__(self, x: np.ndarray, y: float, inv_scale: float):
        self.x = np.asarray(x, dtype=np.float64)
        self.y = float(y)
        self.inv_scale = float(inv_scale)

    def __call__(self, theta) -> float:
        return float(self.evaluate_batch(np.asarray(theta, dtype=np.float64)[None, :])[0])

    def evaluate_batch(self, thetas: np.ndarray) -> np.ndarray:
        return kernels.relu_mean_loss(
            thetas, self.x[None, :], np.array([self.y]), self.inv_scale
        )


class ReluRegressionFamily:
    """Observations y = w2' relu(theta1_true x) + noise with x clipped to [-3,3]^2.

    The scale constant is estimated once per family (2x the largest
    finite-difference slope seen over random pairs) so every sampled loss
    passes a Lipschitz-1 check with margin.
    """

    closed_form = False
    d = 4

    def __init__(
        self,
        theta1_true: np.ndarray,
        noise_var: float,
        rng: np.random.Generator,
        calibration_pairs: int = 100_000,
    ):
        theta1_true = np.asarray(theta1_true, dtype=np.float64)
        if theta1_true.shape != (2, 2):
            raise ConfigError(f"theta1_true must be 2x2, got {theta1_true.shape}")
        if np.any(np.abs(theta1_true) > 2.0):
            raise ConfigError("theta1_true entries must lie in [-2, 2]")
        if noise_var < 0:
            raise ConfigError(f"noise variance must be non-negative, got {noise_var}")
        self.theta1_true = theta1_true
        self.noise_var = float(noise_var)
        self.noise_sd = math.sqrt(noise_var)
        self.inv_scale = 1.0 / self._calibrate_scale(rng, calibration_pairs)
        # the model reproduces the truth at theta1_true/2, leaving pure noise
        self.minimizer = (theta1_true / 2.0).ravel().copy()
        self.min_value = self.noise_var * self.inv_scale

    def _draw_xy(self, rng: np.random.Generator, size: int):
        xs = np.clip(rng.standard_normal((size, 2)), -3.0, 3.0)
        h = np.maximum(xs @ self.theta1_true.T, 0.0)
        ys = h[:, 0] - h[:, 1] + self.noise_sd * rng.standard_normal(size)
        return xs, ys

    def _calibrate_scale(self, rng: np.random.Generator, pairs: int) -> float:
        xs, ys = self._draw_xy(rng, pairs)
        ta = rng.uniform(-1.0, 1.0, size=(pairs, 4))
        tb = rng.uniform(-1.0, 1.0, size=(pairs, 4))
        ra = ys - _pairwise_prediction(ta, xs)
        rb = ys - _pairwise_prediction(tb, xs)
        gaps = np.abs(ra * ra - rb * rb)
        seps = np.linalg.norm(ta - tb, axis=1)
        ok = seps > 1e-9
        return 2.0 * float(np.max(gaps[ok] / seps[ok]))

    def sample(self, rng: np.random.Generator) -> ReluSampleLoss:
        xs, ys = self._draw_xy(rng, 1)
        return ReluSampleLoss(xs[0], ys[0], self.inv_scale)

    def monte_carlo_loss(self, theta, n_samples: int, rng: np.random.Generator):
        """Fresh-sample estimate of the expected loss at theta, with its standard error."""
        xs, ys = self._draw_xy(rng, n_samples)
        preds = _pairwise_prediction(np.tile(np.asarray(theta, dtype=np.float64), (n_samples, 1)), xs)
        vals = self.inv_scale * (ys - preds) ** 2
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples))


def _pairwise_prediction(thetas: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Prediction of row i's model at row i's input (no cross terms)."""
    w = 2.0 * thetas.reshape(-1, 2, 2)
    pre = np.einsum("nrc,nc->nr", w, xs)
    h = np.maximum(pre, 0.0)
    return h[:, 0] - h[:, 1]


class PointMassDistribution:
    """Degenerate distribution: every draw returns the same fixed loss."""

    closed_form = True

    def __init__(self, loss, d: int, minimizer=None, min_value=None):
        self.loss = loss
        self.d = d
        self.minimizer = None if minimizer is None else np.asarray(minimizer, dtype=np.float64)
        self.min_value = min_value

    def sample(self, rng: np.random.Generator):
        return self.loss

    def expected_loss(self, theta) -> float:
        return float(self.loss(theta))

    def expected_loss_batch(self, thetas: np.ndarray) -> np.ndarray:
        return self.loss.evaluate_batch(thetas)


class AnchorDistanceLoss:
    """f(theta) = ||theta - anchor|| - ||anchor||; 1-Lipschitz, zero at the origin."""

    def __init__(self, anchor):
        self.anchor = np.asarray(anchor, dtype=np.float64)
        self.offset = float(np.linalg.norm(self.anchor))

    def __call__(self, theta) -> float:
        return float(np.linalg.norm(np.asarray(theta) - self.anchor)) - self.offset

    def evaluate_batch(self, thetas: np.ndarray) -> np.ndarray:
        return np.linalg.norm(thetas - self.anchor, axis=1) - self.offset


def point_mass_anchor(anchor) -> PointMassDistribution:
    anchor = np.asarray(anchor, dtype=np.float64)
    loss = AnchorDistanceLoss(anchor)
    return PointMassDistribution(
        loss, d=anchor.size, minimizer=anchor, min_value=-float(np.linalg.norm(anchor))
    )


# ---------------------------------------------------------------------------
# empirical loss


class EmpiricalLoss:
    """Mean of a fixed set of sampled losses, with batched fast paths.

    Homogeneous sign-grid samples collapse to a single grid of averaged
    signs; ReLU samples stack into one kernel call.
    """

    def __init__(self, samples):
        samples = list(samples)
        if not samples:
            raise ConfigError("empirical loss needs at least one sample")
        self.samples = samples
        self._mode = "generic"
        first = samples[0]
        if all(s is first for s in samples):
            self._mode = "single"
        elif isinstance(first, SignGridLoss) and all(
            isinstance(s, SignGridLoss) and s.spec == first.spec for s in samples
        ):
            self._mode = "sign_grid"
            self._spec = first.spec
            self._weights = np.mean([s.signs for s in samples], axis=0)
        elif isinstance(first, ReluSampleLoss) and all(
            isinstance(s, ReluSampleLoss) and s.inv_scale == first.inv_scale for s in samples
        ):
            self._mode = "relu"
            self._xs = np.stack([s.x for s in samples])
            self._ys = np.array([s.y for s in samples])
            self._inv_scale = first.inv_scale

    def __call__(self, theta) -> float:
        return float(self.evaluate_batch(np.asarray(theta, dtype=np.float64)[None, :])[0])

    def evaluate_batch(self, thetas: np.ndarray) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=np.float64)
        if self._mode == "single":
            return self.samples[0].evaluate_batch(thetas)
        if self._mode == "sign_grid":
            s = self._spec
            return kernels.sign_grid_mean_loss(
                thetas, self._weights, s.first_center, s.spacing, s.g, s.radius
            )
        if self._mode == "relu":
            return kernels.relu_mean_loss(thetas, self._xs, self._ys, self._inv_scale)
        return np.mean([s.evaluate_batch(thetas) for s in self.samples], axis=0)


def empirical_loss(samples, theta) -> float:
    """Mean of the given sampled losses at theta."""
    return EmpiricalLoss(samples)(theta)
