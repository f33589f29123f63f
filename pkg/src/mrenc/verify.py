"""Fast in-process property suites behind the ``verify`` CLI subcommand.

Each suite prints one pass/fail line; the run exits non-zero on any failure.
The pytest suite covers the same ground (and more) at full depth.
"""

from __future__ import annotations

import math

import numpy as np

from . import coinflip, grids
from .encoder import QuantizerSpec, budgeted_layout, build_packet, unpack_packet
from .errors import ConfigError
from .functions import point_mass_anchor


def _check_level_distributions() -> bool:
    for t in range(1, 21):
        for d in range(1, 9):
            probs = grids.level_distribution(t, d)
            if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs < 0):
                return False
    return True


def _check_quantizer_roundtrip() -> bool:
    rng = np.random.default_rng(7)
    for bits in (1, 4, 8, 12):
        spec = QuantizerSpec(1.5, bits)
        vs = rng.uniform(-1.5, 1.5, size=500)
        for v in vs:
            if abs(spec.dequantize(spec.quantize(v)) - v) > spec.step / 2 + 1e-12:
                return False
        if spec.dequantize(spec.quantize(1.5)) != 1.5:
            return False
    return True


def _check_packet_budgets() -> bool:
    rng = np.random.default_rng(11)
    built = 0
    for _ in range(200):
        d = int(rng.integers(1, 5))
        m = int(rng.integers(2, 100000))
        n = 2 * int(rng.integers(1, 200))
        if m * n < 3:
            continue
        floor_bits = d * math.log2(m * n)
        B = int(math.ceil(floor_bits * rng.uniform(1.0, 6.0)))
        try:
            dims = grids.ProblemDims(m, n, B, d)
            params = grids.compute_delta(dims)
            if params.t == 0:
                continue
            layout = budgeted_layout(dims, params)
        except ConfigError:
            continue
        family = point_mass_anchor(rng.uniform(-0.9, 0.9, size=d))
        samples = [family.sample(rng) for _ in range(n)]
        packet = build_packet(samples, dims, params, rng, layout=layout)
        if packet.bit_length > B or layout.sub_signal_bits > int(d * math.log2(m * n)):
            return False
        if unpack_packet(packet.data, layout) != packet.subs:
            return False
        built += 1
    return built >= 20


def _check_fano_and_lemma5() -> bool:
    rng = np.random.default_rng(3)
    last = math.inf
    for i_bits in np.linspace(0.0, 12.0, 25):
        v = coinflip.fano_bound(float(i_bits), 1024)
        if v > last + 1e-15 or not 0.0 <= v <= 1.0:
            return False
        last = v
    for _ in range(2000):
        n = int(rng.integers(1, 4))
        alpha = rng.uniform(-1, 1, size=1 << n)
        alpha -= alpha.mean()
        peak = np.abs(alpha).max()
        if peak > 1.0:
            alpha /= peak
        lhs, rhs = coinflip.lemma5_check(alpha, rng.dirichlet(np.ones(1 << n)))
        if lhs > rhs + 1e-9:
            return False
    return True


def _check_subadditivity() -> bool:
    rng = np.random.default_rng(5)
    for _ in range(25):
        k = int(rng.integers(2, 5))
        world = coinflip.CoinWorld(
            k=k, n=1, m=2, bias=float(rng.uniform(0.05, 0.45)), biased_index=int(rng.integers(k))
        )
        tables = [rng.random((world.n_states, 2)) for _ in range(2)]
        codings = [coinflip.Coding(t / t.sum(axis=1, keepdims=True)) for t in tables]
        rep = coinflip.subadditivity_check(world, codings)
        if not rep.holds:
            return False
        for c in codings:
            mi = coinflip.exact_mutual_information(world, c)
            cap = min(coinflip.signal_entropy(world, c), math.log2(world.k))
            if mi < -1e-12 or mi > cap + 1e-12:
                return False
    return True


SUITES = [
    ("level distributions normalize", _check_level_distributions),
    ("quantizer round trip within half step", _check_quantizer_roundtrip),
    ("packets respect bit budgets and round-trip", _check_packet_budgets),
    ("fano monotone and zero-sum mass inequality", _check_fano_and_lemma5),
    ("joint information subadditive and capped", _check_subadditivity),
]


def run_all() -> int:
    failures = 0
    for name, fn in SUITES:
        ok = fn()
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 2
