"""Server-side aggregation: dedup, reconstruction, estimation, baselines."""

import math

import numpy as np
import pytest

from mrenc.encoder import (
    BitLayout,
    QuantizerSpec,
    SignalPacket,
    SubSignal,
    build_packet,
    diagnostic_layout,
    pack_subsignals,
)
from mrenc.errors import EstimationFailedError
from mrenc.functions import point_mass_anchor
from mrenc.grids import GridCoord, ProblemDims, ResolutionParams, compute_delta, root
from mrenc.server import (
    FhatTable,
    baseline_average,
    baseline_single,
    estimate,
    reconstruct,
    redundancy_elimination,
)


def _layout(d=2, t=2, count=3, bits=16) -> BitLayout:
    return BitLayout(
        d=d,
        t=t,
        count=count,
        level_bits=max(1, math.ceil(math.log2(t))),
        index_bits=t,
        delta_bits=bits,
        theta_bits=bits,
        delta_quant=QuantizerSpec(math.sqrt(d) / 2, bits),
        theta_quant=QuantizerSpec(0.5, bits),
        budget_bits=None,
    )


def _packet(machine_id, subs, layout) -> SignalPacket:
    data, bits = pack_subsignals(subs, layout)
    return SignalPacket(machine_id, tuple(subs), data, bits)


def _sub(layout, level, index, delta, theta=None, eta=0.0) -> SubSignal:
    if theta is None:
        theta_codes = (0,) * layout.d
        eta_code = 0
    else:
        theta_codes = tuple(int(c) for c in layout.theta_quant.quantize_array(np.asarray(theta)))
        eta_code = layout.delta_quant.quantize(eta)
    return SubSignal(GridCoord(level, tuple(index)), layout.delta_quant.quantize(delta), theta_codes, eta_code)


class TestRedundancyElimination:
    def test_keep_first_within_machine(self):
        layout = _layout(count=3)
        a = _sub(layout, 1, (0, 0), 0.1)
        a2 = _sub(layout, 1, (0, 0), 0.3)  # same point, later in packet
        b = _sub(layout, 2, (1, 2), -0.05, theta=(0.0, 0.0), eta=0.01)
        survivors = redundancy_elimination([_packet(0, [a, a2, b], layout)], layout)
        assert [(s.machine_id, s.sub) for s in survivors] == [(0, a), (0, b)]

    def test_cross_machine_duplicates_survive(self):
        layout = _layout(count=1)
        a = _sub(layout, 1, (0, 1), 0.2)
        survivors = redundancy_elimination(
            [_packet(0, [a], layout), _packet(1, [a], layout)], layout
        )
        assert len(survivors) == 2
        table = reconstruct(survivors, ResolutionParams(0.25, 2, 1.0), layout)
        assert table.counts[GridCoord(1, (0, 1))] == 2

    def test_absent_point_absent_from_counts(self):
        layout = _layout(count=1)
        a = _sub(layout, 1, (0, 1), 0.2)
        table = reconstruct(
            redundancy_elimination([_packet(0, [a], layout)], layout),
            ResolutionParams(0.25, 2, 1.0),
            layout,
        )
        assert GridCoord(1, (0, 0)) not in table.counts


class TestReconstruct:
    def test_chain_arithmetic(self):
        layout = _layout(count=2, bits=20)
        params = ResolutionParams(0.25, 2, 1.0)
        child = _sub(layout, 2, (1, 1), -0.05, theta=(0.0, 0.0), eta=0.02)
        lvl1 = _sub(layout, 1, (0, 0), 0.2)
        table = reconstruct(
            redundancy_elimination([_packet(0, [lvl1, child], layout)], layout), params, layout
        )
        dq = layout.delta_quant
        expected_lvl1 = dq.dequantize(lvl1.delta_code)
        expected_child = expected_lvl1 + dq.dequantize(child.delta_code)
        assert table.values[GridCoord(1, (0, 0))] == expected_lvl1
        assert table.values[GridCoord(2, (1, 1))] == expected_child
        assert expected_child == pytest.approx(0.15, abs=2 * dq.step)

    def test_missing_parent_inherits_grandparent(self):
        layout = _layout(count=1, bits=20)
        params = ResolutionParams(0.25, 2, 1.0)
        orphan = _sub(layout, 2, (3, 2), -0.1, theta=(0.0, 0.0), eta=0.0)
        table = reconstruct(
            redundancy_elimination([_packet(0, [orphan], layout)], layout), params, layout
        )
        parent_pt = GridCoord(1, (1, 1))
        assert table.values[parent_pt] == 0.0  # propagated from the root
        assert parent_pt not in table.counts
        got = table.values[GridCoord(2, (3, 2))]
        assert got == pytest.approx(-0.1, abs=layout.delta_quant.step)

    def test_empty_survivors_root_only(self):
        layout = _layout()
        params = ResolutionParams(0.25, 2, 1.0)
        table = reconstruct([], params, layout)
        assert table.values == {root(2): 0.0}
        with pytest.raises(EstimationFailedError):
            estimate(table)

    def test_smallest_machine_id_supplies_candidate(self):
        layout = _layout(count=1, bits=20)
        params = ResolutionParams(0.25, 2, 1.0)
        s_late = _sub(layout, 2, (0, 0), 0.0, theta=(0.1, 0.1), eta=0.3)
        s_early = _sub(layout, 2, (0, 0), 0.0, theta=(-0.2, 0.2), eta=-0.4)
        survivors = redundancy_elimination(
            [_packet(5, [s_late], layout), _packet(2, [s_early], layout)], layout
        )
        table = reconstruct(survivors, params, layout)
        cand = table.candidates[GridCoord(2, (0, 0))]
        assert cand.machine_id == 2
        center = GridCoord(2, (0, 0)).center()
        np.testing.assert_allclose(
            cand.theta, center + np.array([-0.2, 0.2]), atol=layout.theta_quant.step
        )

    def test_permutation_invariance(self):
        dims = ProblemDims(m=40, n=4, B=40, d=2)
        params = compute_delta(dims)
        layout = diagnostic_layout(dims, params, 16)
        fam = point_mass_anchor([0.3, -0.2])
        packets = [
            build_packet([fam.loss] * dims.n, dims, params, np.random.default_rng(i), machine_id=i, layout=layout)
            for i in range(dims.m)
        ]
        base = reconstruct(redundancy_elimination(packets, layout), params, layout)
        rng = np.random.default_rng(99)
        order = rng.permutation(dims.m)
        shuffled = reconstruct(
            redundancy_elimination([packets[i] for i in order], layout), params, layout
        )
        assert base.values == shuffled.values
        assert base.counts == shuffled.counts
        assert base.candidates == shuffled.candidates


class TestEstimate:
    def _table_with(self, cands):
        table = FhatTable(d=2)
        table.values[root(2)] = 0.0
        from mrenc.server import Candidate

        for i, (theta, fhat) in enumerate(cands):
            table.candidates[GridCoord(2, (i, 0))] = Candidate(theta, fhat, i)
        return table

    def test_single_candidate(self):
        table = self._table_with([((0.1, 0.2), 0.5)])
        np.testing.assert_allclose(estimate(table), [0.1, 0.2])

    def test_argmin(self):
        table = self._table_with([((0.1, 0.1), 0.1), ((0.2, 0.2), -0.2), ((0.3, 0.3), 0.0)])
        np.testing.assert_allclose(estimate(table), [0.2, 0.2])

    def test_tie_breaks_lexicographic(self):
        table = self._table_with([((0.5, -0.5), -0.3), ((-0.5, 0.5), -0.3)])
        np.testing.assert_allclose(estimate(table), [-0.5, 0.5])

    def test_constant_shift_invariance(self):
        cands = [((0.1, 0.1), 0.4), ((0.2, -0.2), -0.1), ((0.0, 0.3), 0.2)]
        base = estimate(self._table_with(cands))
        shifted = estimate(self._table_with([(t, f + 3.7) for t, f in cands]))
        np.testing.assert_array_equal(base, shifted)


class TestApproxMinimizerProperty:
    def test_two_gamma_bound(self):
        # argmin of a uniform gamma-approximation is a 2-gamma minimizer
        rng = np.random.default_rng(12)
        for _ in range(2000):
            size = int(rng.integers(2, 40))
            g = rng.uniform(-5, 5, size=size)
            gamma = float(rng.uniform(1e-3, 1.0))
            g_hat = g + gamma * rng.uniform(-1, 1, size=size) * (1 - 1e-9)
            w = int(np.argmin(g_hat))
            assert g[w] <= g.min() + 2 * gamma


class TestBaselines:
    def test_average_identical(self):
        thetas = np.tile([0.2, -0.1], (5, 1))
        np.testing.assert_allclose(baseline_average(thetas), [0.2, -0.1])

    def test_average_symmetric(self):
        v = np.array([0.3, -0.7])
        np.testing.assert_allclose(baseline_average(np.stack([v, -v])), [0.0, 0.0])

    def test_average_example(self):
        np.testing.assert_allclose(
            baseline_average(np.array([[0.2, 0.4], [0.4, 0.2]])), [0.3, 0.3]
        )

    def test_single_one_machine(self):
        m = np.array([[0.5, 0.5]])
        np.testing.assert_allclose(baseline_single(m, np.random.default_rng(0)), [0.5, 0.5])

    def test_single_uniform(self):
        rng = np.random.default_rng(1)
        m = np.arange(8, dtype=float).reshape(4, 2)
        picks = np.array(
            [baseline_single(m, rng)[0] for _ in range(10_000)]
        )
        for row in m:
            freq = np.mean(picks == row[0])
            se = math.sqrt(0.25 * 0.75 / 10_000)
            assert abs(freq - 0.25) < 4 * se

    def test_single_reproducible(self):
        m = np.arange(12, dtype=float).reshape(6, 2)
        a = [baseline_single(m, np.random.default_rng(7)) for _ in range(20)]
        b = [baseline_single(m, np.random.default_rng(7)) for _ in range(20)]
        np.testing.assert_array_equal(np.array(a), np.array(b))

    def test_empty_rejected(self):
        with pytest.raises(EstimationFailedError):
            baseline_average(np.zeros((0, 2)))
        with pytest.raises(EstimationFailedError):
            baseline_single(np.zeros((0, 2)), np.random.default_rng(0))


class TestNoiseFreeSmall:
    def test_telescoped_quantization_bound(self):
        dims = ProblemDims(m=512, n=4, B=44, d=2)
        params = compute_delta(dims)
        assert params.t >= 1
        fam = point_mass_anchor([0.25, -0.35])
        f = fam.loss
        layout = diagnostic_layout(dims, params, 20)
        packets = [
            build_packet([f] * dims.n, dims, params, np.random.default_rng(1000 + i), machine_id=i, layout=layout)
            for i in range(dims.m)
        ]
        table = reconstruct(redundancy_elimination(packets, layout), params, layout)
        origin = np.zeros(2)
        for p, value in table.values.items():
            if p in table.counts:  # received points carry averaged deltas
                target = f(p.center()) - f(origin)
                assert abs(value - target) <= 2 * params.t * layout.delta_quant.step
