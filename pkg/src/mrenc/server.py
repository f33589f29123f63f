"""Server-side aggregation: decode packets, deduplicate, rebuild the loss table,
and pick the estimate; plus the two naive baseline aggregators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import BitLayout, SignalPacket, SubSignal, _decode_arrays, _sub_from_arrays, _unique_rows
from .errors import EstimationFailedError
from .grids import GridCoord, ResolutionParams, parent, root


@dataclass(frozen=True)
class Survivor:
    machine_id: int
    sub: SubSignal


@dataclass(frozen=True)
class Candidate:
    theta: tuple[float, ...]
    fhat: float
    machine_id: int


@dataclass
class FhatTable:
    """Reconstructed loss values F-hat over grid points and finest-level candidates.

    values[root] is 0; counts holds N_p only for points actually received.
    """

    d: int
    values: dict[GridCoord, float] = field(default_factory=dict)
    counts: dict[GridCoord, int] = field(default_factory=dict)
    candidates: dict[GridCoord, Candidate] = field(default_factory=dict)


def redundancy_elimination(packets: list[SignalPacket], layout: BitLayout) -> list[Survivor]:
    """Decode each packet and keep, per machine, the first sub-signal per point.

    Duplicates across machines survive; N_p is the number of machines that
    contribute point p.
    """
    survivors = []
    for packet in packets:
        arrays = _decode_arrays(packet.data, layout)
        first, _ = _unique_rows(arrays.levels, arrays.indices, layout.t)
        for i in sorted(int(j) for j in first):
            survivors.append(Survivor(packet.machine_id, _sub_from_arrays(arrays, i)))
    return survivors


def reconstruct(survivors: list[Survivor], params: ResolutionParams, layout: BitLayout) -> FhatTable:
    """Rebuild F-hat level by level: F-hat(p) = F-hat(parent) + mean Delta.

    Unreceived interior points inherit their parent's value, but only when a
    received descendant needs them.  For each finest-level point the survivor
    from the smallest machine id supplies theta and eta.
    """
    d = layout.d
    table = FhatTable(d=d)
    table.values[root(d)] = 0.0

    by_point: dict[GridCoord, list[Survivor]] = {}
    for s in survivors:
        by_point.setdefault(s.sub.point, []).append(s)

    def ensure_value(p: GridCoord) -> float:
        if p not in table.values:
            table.values[p] = ensure_value(parent(p))
        return table.values[p]

    for p in sorted(by_point, key=GridCoord.sort_key):
        # machine order fixes the summation order, so shuffling packets
        # cannot perturb the mean by rounding
        group = sorted(by_point[p], key=lambda s: s.machine_id)
        mean_delta = float(
            np.mean([layout.delta_quant.dequantize(s.sub.delta_code) for s in group])
        )
        table.values[p] = ensure_value(parent(p)) + mean_delta
        table.counts[p] = len(group)
        if p.level == params.t:
            chosen = min(group, key=lambda s: s.machine_id)
            offsets = np.array(
                [layout.theta_quant.dequantize(c) for c in chosen.sub.theta_codes]
            )
            theta = np.clip(p.center() + offsets, -1.0, 1.0)
            eta = layout.delta_quant.dequantize(chosen.sub.eta_code)
            table.candidates[p] = Candidate(
                theta=tuple(float(x) for x in theta),
                fhat=table.values[p] + eta,
                machine_id=chosen.machine_id,
            )
    return table


def estimate(table: FhatTable) -> np.ndarray:
    """The candidate theta with smallest F-hat; ties go to the lexicographically
    smallest theta."""
    if not table.candidates:
        raise EstimationFailedError("no finest-level candidates were received")
    best = min(table.candidates.values(), key=lambda c: (c.fhat, c.theta))
    return np.array(best.theta)


def baseline_average(minimizers: np.ndarray) -> np.ndarray:
    """Coordinate-wise mean of the per-machine empirical minimizers."""
    minimizers = np.asarray(minimizers, dtype=np.float64)
    if minimizers.ndim != 2 or minimizers.shape[0] == 0:
        raise EstimationFailedError("baseline_average needs at least one minimizer")
    return minimizers.mean(axis=0)


def baseline_single(minimizers: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One per-machine minimizer picked uniformly at random."""
    minimizers = np.asarray(minimizers, dtype=np.float64)
    if minimizers.ndim != 2 or minimizers.shape[0] == 0:
        raise EstimationFailedError("baseline_single needs at least one minimizer")
    return minimizers[int(rng.integers(minimizers.shape[0]))].copy()
