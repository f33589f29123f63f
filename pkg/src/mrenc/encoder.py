"""Machine-side signal construction: quantize, lay out, and pack sub-signals.

A machine's packet holds floor(B / (d*log2(mn))) fixed-width sub-signals,
each (level, point index, Delta, theta offsets, eta) and each at most
floor(d*log2(mn)) bits.  Fields are written most-significant-bit first, in
that order, sub-signals concatenated and zero-padded to a byte boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DecodeError
from .functions import EmpiricalLoss
from .grids import GridCoord, ProblemDims, ResolutionParams, cell_bounds, parent, level_distribution

DEFAULT_LATTICE_CAP = 0.25


@dataclass(frozen=True)
class QuantizerSpec:
    """Symmetric uniform quantizer over [-range, range] with 2^bits codes."""

    range_: float
    bits: int

    def __post_init__(self):
        if self.bits < 1:
            raise ConfigError(f"quantizer needs at least 1 bit, got {self.bits}")
        if self.range_ <= 0:
            raise ConfigError(f"quantizer range must be positive, got {self.range_}")

    @property
    def n_codes(self) -> int:
        return 1 << self.bits

    @property
    def step(self) -> float:
        return 2.0 * self.range_ / (self.n_codes - 1)

    def quantize(self, v: float) -> int:
        """Nearest code index, ties rounded away from zero; input clamped first."""
        return int(self.quantize_array(np.array([v]))[0])

    def quantize_array(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        clamped = np.clip(values, -self.range_, self.range_)
        u = (clamped + self.range_) / self.step
        k = np.floor(u)
        frac = u - k
        k += (frac > 0.5) | ((frac == 0.5) & (clamped >= 0))
        return np.clip(k, 0, self.n_codes - 1).astype(np.int64)

    def dequantize(self, code: int) -> float:
        if not 0 <= code < self.n_codes:
            raise DecodeError(f"code {code} out of range for {self.bits}-bit quantizer")
        return float(self.dequantize_array(np.array([code]))[0])

    def dequantize_array(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        # exact at both endpoints
        return self.range_ * (2.0 * codes - (self.n_codes - 1)) / (self.n_codes - 1)


def quantize_scalar(v: float, spec: QuantizerSpec) -> int:
    return spec.quantize(v)


def dequantize_scalar(code: int, spec: QuantizerSpec) -> float:
    return spec.dequantize(code)


@dataclass(frozen=True)
class BitLayout:
    """Fixed per-sub-signal field widths, fully determined by (dims, params).

    Budgeted mode derives widths from the precision targets (Delta and eta
    at epsilon/4t over (-sqrt(d)/2, sqrt(d)/2); theta offsets at
    epsilon/(4*sqrt(d)) over the 2*delta cell) and enforces the per-sub-signal
    bit budget.  Diagnostic mode widens the scalar fields and skips the
    budget check.
    """

    d: int
    t: int
    count: int
    level_bits: int
    index_bits: int          # per axis; fixed at the finest level's width
    delta_bits: int
    theta_bits: int
    delta_quant: QuantizerSpec
    theta_quant: QuantizerSpec
    budget_bits: int | None  # per-sub-signal cap; None in diagnostic mode

    @property
    def sub_signal_bits(self) -> int:
        return (
            self.level_bits
            + self.d * self.index_bits
            + self.delta_bits
            + self.d * self.theta_bits
            + self.delta_bits
        )

    @property
    def packet_bits(self) -> int:
        return self.count * self.sub_signal_bits


def _sub_signal_count(dims: ProblemDims) -> int:
    return int(dims.B // (dims.d * math.log2(dims.mn)))


def budgeted_layout(dims: ProblemDims, params: ResolutionParams) -> BitLayout:
    if params.t < 1:
        raise ConfigError("no grid levels to encode (t = 0)")
    d, t, eps, delta = dims.d, params.t, params.epsilon, params.delta
    sqrt_d = math.sqrt(d)
    level_bits = max(1, math.ceil(math.log2(t)))
    delta_bits = max(1, math.ceil(math.log2(4.0 * t * sqrt_d / eps)))
    theta_bits = max(1, math.ceil(math.log2(8.0 * delta * sqrt_d / eps)))
    budget = int(d * math.log2(dims.mn))
    layout = BitLayout(
        d=d,
        t=t,
        count=_sub_signal_count(dims),
        level_bits=level_bits,
        index_bits=t,
        delta_bits=delta_bits,
        theta_bits=theta_bits,
        delta_quant=QuantizerSpec(sqrt_d / 2.0, delta_bits),
        theta_quant=QuantizerSpec(delta, theta_bits),
        budget_bits=budget,
    )
    if layout.sub_signal_bits > budget:
        raise ConfigError(
            f"sub-signal needs {layout.sub_signal_bits} bits "
            f"(level {level_bits} + index {d * t} + 2x Delta {delta_bits} "
            f"+ theta {d}x{theta_bits}) but the per-sub-signal budget "
            f"floor(d*log2(mn)) = {budget}"
        )
    return layout


def diagnostic_layout(dims: ProblemDims, params: ResolutionParams, scalar_bits: int = 24) -> BitLayout:
    """High-precision layout for quantization-error diagnostics; ignores the budget."""
    if params.t < 1:
        raise ConfigError("no grid levels to encode (t = 0)")
    d, t = dims.d, params.t
    return BitLayout(
        d=d,
        t=t,
        count=_sub_signal_count(dims),
        level_bits=max(1, math.ceil(math.log2(t))),
        index_bits=t,
        delta_bits=scalar_bits,
        theta_bits=scalar_bits,
        delta_quant=QuantizerSpec(math.sqrt(d) / 2.0, scalar_bits),
        theta_quant=QuantizerSpec(params.delta, scalar_bits),
        budget_bits=None,
    )


@dataclass(frozen=True)
class SubSignal:
    """One (p, Delta, theta, eta) record with scalar fields stored as code indices.

    theta_codes and eta_code are all-zero dummies unless p is at the finest
    level.
    """

    point: GridCoord
    delta_code: int
    theta_codes: tuple[int, ...]
    eta_code: int


@dataclass(frozen=True)
class SignalPacket:
    machine_id: int
    subs: tuple[SubSignal, ...]
    data: bytes
    bit_length: int


# ---------------------------------------------------------------------------
# bit-exact packing (vectorized over sub-signals)


@dataclass
class _FieldArrays:
    levels: np.ndarray       # (N,)
    indices: np.ndarray      # (N, d)
    delta_codes: np.ndarray  # (N,)
    theta_codes: np.ndarray  # (N, d)
    eta_codes: np.ndarray    # (N,)


def _value_bits(values: np.ndarray, width: int) -> np.ndarray:
    """MSB-first bit columns of non-negative values (width <= 62)."""
    raw = np.ascontiguousarray(values, dtype=">u8").view(np.uint8).reshape(-1, 8)
    return np.unpackbits(raw, axis=1)[:, 64 - width :]


def _bits_value(bits: np.ndarray) -> np.ndarray:
    n, width = bits.shape
    padded = np.zeros((n, 64), dtype=np.uint8)
    padded[:, 64 - width :] = bits
    packed = np.ascontiguousarray(np.packbits(padded, axis=1))
    return packed.view(">u8").ravel().astype(np.int64)


def _unique_rows(levels: np.ndarray, indices: np.ndarray, t: int):
    """(first_occurrence_positions, inverse) for distinct (level, index) rows."""
    d = indices.shape[1]
    if 6 + d * t <= 62:
        keys = levels.astype(np.int64)
        for a in range(d):
            keys = (keys << t) | indices[:, a]
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    else:
        rows = np.column_stack([levels, indices])
        _, first, inverse = np.unique(rows, axis=0, return_index=True, return_inverse=True)
    return first, inverse


def _pack_arrays(arrays: _FieldArrays, layout: BitLayout) -> tuple[bytes, int]:
    cols = [_value_bits(arrays.levels - 1, layout.level_bits)]
    for a in range(layout.d):
        cols.append(_value_bits(arrays.indices[:, a], layout.index_bits))
    cols.append(_value_bits(arrays.delta_codes, layout.delta_bits))
    for a in range(layout.d):
        cols.append(_value_bits(arrays.theta_codes[:, a], layout.theta_bits))
    cols.append(_value_bits(arrays.eta_codes, layout.delta_bits))
    mat = np.concatenate(cols, axis=1)
    total = mat.size
    # packbits zero-pads the final byte, which is exactly the wire convention
    return np.packbits(mat.ravel()).tobytes(), total


def _decode_arrays(data: bytes, layout: BitLayout) -> _FieldArrays:
    total = layout.packet_bits
    if len(data) * 8 < total:
        raise DecodeError(f"truncated stream: need {total} bits, got {len(data) * 8}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:total]
    mat = bits.reshape(layout.count, layout.sub_signal_bits)
    pos = 0

    def take(width: int) -> np.ndarray:
        nonlocal pos
        out = _bits_value(mat[:, pos : pos + width])
        pos += width
        return out

    levels = take(layout.level_bits) + 1
    indices = np.stack([take(layout.index_bits) for _ in range(layout.d)], axis=1)
    delta_codes = take(layout.delta_bits)
    theta_codes = np.stack([take(layout.theta_bits) for _ in range(layout.d)], axis=1)
    eta_codes = take(layout.delta_bits)

    if np.any(levels > layout.t):
        raise DecodeError(f"decoded level exceeds finest level {layout.t}")
    if np.any(indices >= (1 << levels)[:, None]):
        raise DecodeError("decoded index out of range for its level")
    deltas = layout.delta_quant.dequantize_array(delta_codes)
    bound = math.sqrt(layout.d) * 2.0 ** -levels.astype(np.float64) + layout.delta_quant.step
    if np.any(np.abs(deltas) > bound):
        raise DecodeError("decoded Delta violates its level's Lipschitz bound")
    return _FieldArrays(levels, indices, delta_codes, theta_codes, eta_codes)


def _sub_from_arrays(arrays: _FieldArrays, i: int) -> SubSignal:
    return SubSignal(
        GridCoord(int(arrays.levels[i]), tuple(int(v) for v in arrays.indices[i])),
        int(arrays.delta_codes[i]),
        tuple(int(v) for v in arrays.theta_codes[i]),
        int(arrays.eta_codes[i]),
    )


def pack_subsignals(subs, layout: BitLayout) -> tuple[bytes, int]:
    """Concatenate fixed-width sub-signals MSB-first, zero-padded to bytes."""
    subs = list(subs)
    arrays = _FieldArrays(
        levels=np.array([s.point.level for s in subs], dtype=np.int64),
        indices=np.array([s.point.index for s in subs], dtype=np.int64).reshape(len(subs), layout.d),
        delta_codes=np.array([s.delta_code for s in subs], dtype=np.int64),
        theta_codes=np.array([s.theta_codes for s in subs], dtype=np.int64).reshape(len(subs), layout.d),
        eta_codes=np.array([s.eta_code for s in subs], dtype=np.int64),
    )
    return _pack_arrays(arrays, layout)


def unpack_packet(data: bytes, layout: BitLayout) -> tuple[SubSignal, ...]:
    """Decode exactly layout.count sub-signals, validating level/index/Delta ranges."""
    arrays = _decode_arrays(data, layout)
    return tuple(_sub_from_arrays(arrays, i) for i in range(layout.count))


# ---------------------------------------------------------------------------
# lattice search


def lattice_argmin(fn_batch, lo, hi, center, half_width: float, step: float):
    """Argmin of fn_batch over a uniform lattice spanning center +- half_width,
    clipped to [lo, hi].

    Per axis the spacing is half_width / ceil(half_width / step) <= step, so
    the lattice contains the center and (where not clipped away) both faces.
    Points are scanned in ascending lexicographic order and the first minimum
    wins, so exact ties resolve to the lexicographically smallest point.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    k = max(1, math.ceil(half_width / step - 1e-9))
    offsets = (half_width / k) * np.arange(-k, k + 1)
    axes = []
    for a in range(center.size):
        pts = center[a] + offsets
        axes.append(pts[(pts >= lo[a] - 1e-9) & (pts <= hi[a] + 1e-9)])
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    values = np.asarray(fn_batch(points))
    best = int(np.argmin(values))
    return points[best], float(values[best])


def search_step(params: ResolutionParams, d: int, lattice_cap: float = DEFAULT_LATTICE_CAP) -> float:
    """Per-axis lattice step: the epsilon/(4*sqrt(d)) target, capped for small problems."""
    return min(params.epsilon / (4.0 * math.sqrt(d)), lattice_cap)


def minimize_in_cell(
    emp: EmpiricalLoss,
    p: GridCoord,
    params: ResolutionParams,
    lattice_cap: float = DEFAULT_LATTICE_CAP,
) -> np.ndarray:
    """Lattice argmin of the empirical loss over the 2*delta cell centered at p."""
    lo, hi = cell_bounds(p, params)
    theta, _ = lattice_argmin(
        emp.evaluate_batch, lo, hi, p.center(), params.delta, search_step(params, p.d, lattice_cap)
    )
    return theta


def full_cube_minimizer(
    emp: EmpiricalLoss,
    params: ResolutionParams,
    d: int,
    lattice_cap: float = DEFAULT_LATTICE_CAP,
) -> np.ndarray:
    """Lattice argmin of the empirical loss over all of [-1,1]^d (baseline signal)."""
    theta, _ = lattice_argmin(
        emp.evaluate_batch,
        -np.ones(d),
        np.ones(d),
        np.zeros(d),
        1.0,
        search_step(params, d, lattice_cap),
    )
    return theta


# ---------------------------------------------------------------------------
# packet construction


def build_packet(
    samples,
    dims: ProblemDims,
    params: ResolutionParams,
    rng: np.random.Generator,
    machine_id: int = 0,
    layout: BitLayout | None = None,
    lattice_cap: float = DEFAULT_LATTICE_CAP,
) -> SignalPacket:
    """Construct one machine's packet from its n sampled losses.

    Each sub-signal independently samples a level (weight 2^((d-2)l)) and a
    uniform point p within it; Delta is the empirical-loss drop from p's
    parent to p, and finest-level sub-signals carry the in-cell minimizer
    theta and its improvement eta.  Repeated draws of the same point reuse
    the computed record.  With t = 0 the packet is empty and the caller
    falls back to a root-cell search.
    """
    if len(samples) != dims.n:
        raise ConfigError(f"expected {dims.n} samples, got {len(samples)}")
    if params.t == 0:
        return SignalPacket(machine_id, (), b"", 0)
    if layout is None:
        layout = budgeted_layout(dims, params)
    emp = EmpiricalLoss(samples[: dims.n // 2])

    probs = level_distribution(params.t, dims.d)
    levels = rng.choice(np.arange(1, params.t + 1), size=layout.count, p=probs).astype(np.int64)
    indices = np.floor(rng.random((layout.count, dims.d)) * (1 << levels)[:, None]).astype(np.int64)

    first, inverse = _unique_rows(levels, indices, params.t)
    u_levels = levels[first]
    u_indices = indices[first]
    n_uniq = u_levels.size

    # one batched evaluation covers every distinct point and its parent
    scale = 2.0 ** -u_levels.astype(np.float64)
    u_centers = -1.0 + scale[:, None] * (2 * u_indices + 1)
    p_centers = -1.0 + (2.0 * scale)[:, None] * (2 * (u_indices // 2) + 1)
    vals = emp.evaluate_batch(np.vstack([u_centers, p_centers]))
    f_points = vals[:n_uniq]
    u_delta_codes = layout.delta_quant.quantize_array(f_points - vals[n_uniq:])

    u_theta_codes = np.zeros((n_uniq, dims.d), dtype=np.int64)
    u_eta_codes = np.zeros(n_uniq, dtype=np.int64)
    finest = np.flatnonzero(u_levels == params.t)
    if finest.size:
        thetas, theta_vals = _batched_cell_argmin(emp, u_centers[finest], params, lattice_cap)
        u_theta_codes[finest] = layout.theta_quant.quantize_array(thetas - u_centers[finest])
        u_eta_codes[finest] = layout.delta_quant.quantize_array(theta_vals - f_points[finest])

    uniq_subs = [
        SubSignal(
            GridCoord(int(u_levels[i]), tuple(int(v) for v in u_indices[i])),
            int(u_delta_codes[i]),
            tuple(int(v) for v in u_theta_codes[i]),
            int(u_eta_codes[i]),
        )
        for i in range(n_uniq)
    ]
    subs = tuple(uniq_subs[i] for i in inverse)
    arrays = _FieldArrays(
        levels=levels,
        indices=indices,
        delta_codes=u_delta_codes[inverse],
        theta_codes=u_theta_codes[inverse],
        eta_codes=u_eta_codes[inverse],
    )
    data, bit_length = _pack_arrays(arrays, layout)
    return SignalPacket(machine_id, subs, data, bit_length)


def _batched_cell_argmin(emp, centers, params: ResolutionParams, lattice_cap: float):
    """minimize_in_cell over many cells with one batched evaluation.

    Matches lattice_argmin exactly: the same symmetric per-axis offsets,
    domain-clipped, scanned in lexicographic order with first-minimum ties.
    """
    n_cells, d = centers.shape
    step = search_step(params, d, lattice_cap)
    k = max(1, math.ceil(params.delta / step - 1e-9))
    offsets = (params.delta / k) * np.arange(-k, k + 1)
    mesh = np.meshgrid(*([offsets] * d), indexing="ij")
    offset_grid = np.stack([m.ravel() for m in mesh], axis=1)  # lexicographic

    chunks = []
    bounds = [0]
    for i in range(n_cells):
        pts = centers[i][None, :] + offset_grid
        keep = np.all((pts >= -1.0 - 1e-9) & (pts <= 1.0 + 1e-9), axis=1)
        chunks.append(pts[keep])
        bounds.append(bounds[-1] + chunks[-1].shape[0])
    values = emp.evaluate_batch(np.vstack(chunks))

    thetas = np.empty_like(centers)
    best_vals = np.empty(n_cells)
    for i in range(n_cells):
        seg = values[bounds[i] : bounds[i + 1]]
        j = int(np.argmin(seg))
        thetas[i] = chunks[i][j]
        best_vals[i] = seg[j]
    return thetas, best_vals
