"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The lattice searches evaluate empirical losses at tens of thousands of
points per machine, which dominates experiment runtime.  Both backends
compute identical values; set MRENC_BACKEND=numpy to force the fallback
(default is numba when importable).  benchmarks/bench_kernels.py compares
the two.
"""

from __future__ import annotations

import os

import numpy as np

_REQUESTED = os.environ.get("MRENC_BACKEND", "numba").strip().lower()

if _REQUESTED not in ("numba", "numpy"):
    raise ValueError(f"MRENC_BACKEND must be 'numba' or 'numpy', got {_REQUESTED!r}")

_HAVE_NUMBA = False
if _REQUESTED == "numba":
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        _HAVE_NUMBA = False


def backend() -> str:
    """The backend actually in use."""
    return "numba" if _HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# two-layer ReLU regression loss, averaged over samples
#
# Model: prediction(theta, x) = sum_r w2[r] * relu(W x)_r with W = 2 * theta
# reshaped row-major to (2, 2) and w2 = (1, -1).  Per-sample loss is the
# squared residual scaled by inv_scale.


def relu_mean_loss_numpy(thetas, xs, ys, inv_scale):
    """Mean scaled squared residual at each theta.  thetas (N,4), xs (S,2), ys (S,)."""
    w = 2.0 * thetas.reshape(-1, 2, 2)
    pre = np.einsum("nrc,sc->nsr", w, xs)
    hidden = np.maximum(pre, 0.0)
    preds = hidden[:, :, 0] - hidden[:, :, 1]
    resid = ys[None, :] - preds
    return inv_scale * np.mean(resid * resid, axis=1)


# ---------------------------------------------------------------------------
# sign-weighted hat-function grid loss, averaged over samples
#
# A regular grid of g^d hat functions of the given radius covers [-1,1]^d;
# supports are disjoint, so each point sees only its nearest grid center.
# weights holds the (possibly averaged) signs in grid row-major order.


def sign_grid_mean_loss_numpy(thetas, weights, first_center, spacing, g, radius):
    """Weighted hat value at each theta.  thetas (N,d), weights (g^d,)."""
    n, d = thetas.shape
    idx = np.rint((thetas - first_center) / spacing).astype(np.int64)
    np.clip(idx, 0, g - 1, out=idx)
    centers = first_center + spacing * idx
    dist = np.sqrt(np.sum((thetas - centers) ** 2, axis=1))
    flat = np.zeros(n, dtype=np.int64)
    for a in range(d):
        flat = flat * g + idx[:, a]
    return weights[flat] * np.maximum(radius - dist, 0.0)


if _HAVE_NUMBA:

    @njit(cache=True)
    def _relu_mean_loss_nb(thetas, xs, ys, inv_scale):
        n = thetas.shape[0]
        s = xs.shape[0]
        out = np.empty(n)
        for i in range(n):
            w00 = 2.0 * thetas[i, 0]
            w01 = 2.0 * thetas[i, 1]
            w10 = 2.0 * thetas[i, 2]
            w11 = 2.0 * thetas[i, 3]
            acc = 0.0
            for j in range(s):
                h0 = w00 * xs[j, 0] + w01 * xs[j, 1]
                h1 = w10 * xs[j, 0] + w11 * xs[j, 1]
                if h0 < 0.0:
                    h0 = 0.0
                if h1 < 0.0:
                    h1 = 0.0
                r = ys[j] - (h0 - h1)
                acc += r * r
            out[i] = inv_scale * acc / s
        return out

    @njit(cache=True)
    def _sign_grid_mean_loss_nb(thetas, weights, first_center, spacing, g, radius):
        n, d = thetas.shape
        out = np.empty(n)
        for i in range(n):
            flat = 0
            dist2 = 0.0
            for a in range(d):
                k = int(round((thetas[i, a] - first_center) / spacing))
                if k < 0:
                    k = 0
                elif k > g - 1:
                    k = g - 1
                c = first_center + spacing * k
                dist2 += (thetas[i, a] - c) ** 2
                flat = flat * g + k
            h = radius - np.sqrt(dist2)
            out[i] = weights[flat] * h if h > 0.0 else 0.0
        return out

    def relu_mean_loss(thetas, xs, ys, inv_scale):
        return _relu_mean_loss_nb(
            np.ascontiguousarray(thetas), np.ascontiguousarray(xs), np.ascontiguousarray(ys), inv_scale
        )

    def sign_grid_mean_loss(thetas, weights, first_center, spacing, g, radius):
        return _sign_grid_mean_loss_nb(
            np.ascontiguousarray(thetas), np.ascontiguousarray(weights), first_center, spacing, g, radius
        )

else:
    relu_mean_loss = relu_mean_loss_numpy
    sign_grid_mean_loss = sign_grid_mean_loss_numpy
