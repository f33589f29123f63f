"""Experiment harness: configs, bounds, oracle, runner determinism, CLI."""

import math

import mpmath as mp
import numpy as np
import pytest

from mrenc import cli
from mrenc.errors import ConfigError
from mrenc.functions import point_mass_anchor
from mrenc.harness import (
    CSV_HEADER,
    ExperimentConfig,
    assumption_check,
    dumps_config,
    lower_bound_value,
    make_family,
    parse_config,
    records_to_csv,
    run_experiment,
    true_loss_oracle,
    upper_bound_value,
)
from mrenc.grids import ProblemDims

mp.mp.dps = 40


class TestBounds:
    def test_lower_bound_example(self):
        # the centralized term dominates: 1/(4*sqrt(1e8)) = 2.5e-5
        got = lower_bound_value(10**6, 100, 64, 2, 25.0)
        assert got == 1.0 / (4.0 * math.sqrt(1e8))
        assert got == pytest.approx(2.5e-5, rel=1e-12)
        term1 = 1.0 / (25.0 * 10.0 * 8000.0 * math.log(64 * 10**6))
        assert term1 == pytest.approx(2.7817e-8, rel=1e-4)

    def test_lower_bound_vanishes_in_n(self):
        vals = [lower_bound_value(100, n, 64, 2, 1.0) for n in (10, 100, 1000, 10**4, 10**6)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_lower_bound_large_d(self):
        m, n, B, C = 1000, 100, 64, 2.0
        got = lower_bound_value(m, n, B, 10**6, C)
        limit = max(1.0 / (C * math.sqrt(n) * math.log(m * B)), 1.0 / (4 * math.sqrt(m * n)))
        assert got == pytest.approx(limit, rel=1e-3)

    def test_upper_bound_example(self):
        got = upper_bound_value(10**6, 10, 64, 2)
        oracle = float(
            4 * mp.sqrt(2) * mp.log(10**7) ** 2
            * max(mp.log(10**7) / (mp.sqrt(10) * 8000), 1 / mp.sqrt(10**7))
        )
        assert got == pytest.approx(oracle, rel=1e-12)
        assert got == pytest.approx(0.9363240708858029, rel=1e-12)

    def test_upper_bound_max_picks_larger_branch(self):
        m, n, B, d = 10**6, 10**4, 1 << 20, 2
        ln_mn = math.log(m * n)
        branch2 = 4 * math.sqrt(d) * ln_mn**2 / math.sqrt(m * n)
        branch1 = 4 * math.sqrt(d) * ln_mn**3 / (math.sqrt(n) * (m * B) ** 0.5)
        assert branch2 > branch1
        assert upper_bound_value(m, n, B, d) == pytest.approx(branch2, rel=1e-12)

    def test_assumptions_paper_example(self):
        assert assumption_check(10**6, 10, 2) == (True, True)

    def test_assumptions_second_fails(self):
        ok1, ok2 = assumption_check(100, 2, 4)
        assert not ok2

    def test_assumption_threshold_is_ge(self):
        # m = 7 barely clears ln(14)^2 = 6.96; m = 6 misses ln(12)^2 = 6.17
        assert assumption_check(7, 2, 1)[0] is True
        assert assumption_check(6, 2, 1)[0] is False

    def test_validation(self):
        with pytest.raises(ConfigError):
            lower_bound_value(10, 10, 10, 2, 0.5)


FIG5_STYLE = ExperimentConfig(
    family="relu_regression",
    m_values=(4, 64),
    n=10,
    B=65536,
    d=4,
    seeds=(0,),
    mc_samples=20_000,
)


class TestConfig:
    def test_roundtrip_identity(self):
        for cfg in (
            FIG5_STYLE,
            ExperimentConfig(
                family="point_mass",
                m_values=(8, 16),
                n=4,
                B=64,
                d=2,
                anchor=(0.25, -0.35),
                quantization="diagnostic",
                seeds=(0, 1, 2),
            ),
            ExperimentConfig(
                family="sign_grid", m_values=(8,), n=2, B=8, d=2, C=1.0, sign_p=(0, 0),
                mc_samples=1000,
            ),
        ):
            assert parse_config(dumps_config(cfg)) == cfg

    def test_parse_with_comments_and_aliases(self):
        cfg = parse_config(
            """
            # trend experiment
            family = relu_regression
            m = 4, 8
            n = 10
            B = 65536
            d = 4
            theta1_true = random
            """
        )
        assert cfg.m_values == (4, 8)
        assert cfg.theta1_true is None

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("family = point_mass\nm = 4\nn = 4\nB = 64\nd = 2\nbogus = 1")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("family = point_mass\nfamily = nine_point\nm = 4\nn = 4\nB = 64\nd = 2")

    def test_unknown_family_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(family="mystery", m_values=(4,), n=4, B=64, d=2)

    def test_unknown_estimator_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(
                family="point_mass", m_values=(4,), n=4, B=64, d=2, estimators=("sgd",)
            )


class TestOracle:
    def test_closed_form_exact(self):
        fam = point_mass_anchor([0.3, -0.45])
        value, se = true_loss_oracle(fam, np.zeros(2), 10_000, np.random.default_rng(0))
        assert se == 0.0
        assert value == fam.expected_loss(np.zeros(2))

    def test_mc_sample_floor(self):
        cfg = ExperimentConfig(
            family="relu_regression", m_values=(4,), n=10, B=65536, d=4, mc_samples=2000
        )
        fam = make_family(cfg, 0, ProblemDims(4, 10, 65536, 4))
        with pytest.raises(ConfigError):
            true_loss_oracle(fam, fam.minimizer, 10, np.random.default_rng(0))
        value, se = true_loss_oracle(fam, fam.minimizer, 50_000, np.random.default_rng(0))
        assert se > 0.0
        assert abs(value - fam.min_value) < 4 * se


def _mask_wall_ms(csv_text: str) -> str:
    lines = csv_text.strip().split("\n")
    out = [lines[0]]
    for line in lines[1:]:
        parts = line.split(",")
        parts[8] = "X"
        out.append(",".join(parts))
    return "\n".join(out)


class TestRunner:
    def test_csv_header_and_determinism(self, tmp_path):
        cfg = ExperimentConfig(
            family="point_mass",
            m_values=(8,),
            n=4,
            B=44,
            d=2,
            anchor=(0.25, -0.35),
            seeds=(0, 1),
            mc_samples=1000,
        )
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        run_experiment(cfg, out_path=out1)
        run_experiment(cfg, out_path=out2)
        text1, text2 = out1.read_text(), out2.read_text()
        assert text1.split("\n")[0] == CSV_HEADER
        assert _mask_wall_ms(text1) == _mask_wall_ms(text2)

    def test_m1_degenerate_estimators_coincide(self):
        cfg = ExperimentConfig(
            family="point_mass",
            m_values=(1,),
            n=4,
            B=16,
            d=2,
            anchor=(0.3, -0.2),
            seeds=(0,),
            mc_samples=1000,
        )
        records = run_experiment(cfg)
        assert len(records) == 3
        thetas = {r.estimator: tuple(r.theta_hat) for r in records}
        gaps = {r.loss_gap for r in records}
        assert len(set(thetas.values())) == 1
        assert len(gaps) == 1
        status = {r.estimator: r.status for r in records}
        assert status["mre_nc"] == "estimation-failed"  # t = 0 at this scale
        assert status["baseline_average"] == "ok"

    def test_point_mass_diagnostic_gap_below_epsilon(self):
        cfg = ExperimentConfig(
            family="point_mass",
            m_values=(512,),
            n=4,
            B=44,
            d=2,
            anchor=(0.25, -0.35),
            quantization="diagnostic",
            estimators=("mre_nc",),
            seeds=(0,),
            mc_samples=1000,
        )
        from mrenc.grids import compute_delta

        params = compute_delta(ProblemDims(512, 4, 44, 2))
        assert params.t >= 1
        (record,) = run_experiment(cfg)
        assert record.status == "ok"
        assert 0.0 <= record.loss_gap <= params.epsilon

    def test_budgeted_packet_bits_within_B(self):
        cfg = ExperimentConfig(
            family="point_mass",
            m_values=(128,),
            n=4,
            B=44,
            d=2,
            anchor=(0.1, 0.4),
            estimators=("mre_nc",),
            seeds=(0,),
            mc_samples=1000,
        )
        (record,) = run_experiment(cfg)
        assert record.status == "ok"
        assert 0 < record.packet_bits_max <= 44

    def test_closed_form_gap_nonnegative(self):
        cfg = ExperimentConfig(
            family="nine_point",
            m_values=(4, 16),
            n=4,
            B=24,
            d=2,
            nine_p=(1, 1),
            seeds=(0, 1),
            mc_samples=1000,
        )
        for r in run_experiment(cfg):
            assert r.loss_gap >= 0.0
            assert r.loss_gap_se == 0.0

    def test_records_sorted(self):
        recs = run_experiment(
            ExperimentConfig(
                family="point_mass",
                m_values=(8, 4),
                n=4,
                B=40,
                d=2,
                anchor=(0.2, 0.2),
                seeds=(1, 0),
                mc_samples=1000,
            )
        )
        keys = [(r.estimator, r.m, r.seed) for r in recs]
        assert keys == sorted(keys)


class TestCli:
    def test_bounds_command(self, capsys):
        rc = cli.main(["bounds", "--m", "1000000", "--n", "10", "--B", "64", "--d", "2", "--C", "25"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "lower_bound" in out and "upper_bound" in out
        assert "0.936324" in out

    def test_coinflip_fano(self, capsys):
        rc = cli.main(["coinflip", "fano", "--i-total", "0", "--k", "1024"])
        assert rc == 0
        assert "0.9" in capsys.readouterr().out

    def test_coinflip_conditions(self, capsys):
        rc = cli.main(["coinflip", "conditions", "--m", "1000000", "--n", "1", "--B", "64", "--C", "25"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "conditions_all" in out and "pass" in out

    def test_simulate_and_exit_codes(self, tmp_path, capsys):
        cfg_path = tmp_path / "exp.cfg"
        out_path = tmp_path / "out.csv"
        cfg_path.write_text(
            "family = point_mass\nm = 4\nn = 4\nB = 40\nd = 2\n"
            "anchor = 0.2, -0.3\nseeds = 0\nmc_samples = 1000\n"
        )
        rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out_path)])
        assert rc == 0
        assert out_path.read_text().startswith(CSV_HEADER)

        bad = tmp_path / "bad.cfg"
        bad.write_text("family = nope\nm = 4\nn = 4\nB = 40\nd = 2\n")
        assert cli.main(["simulate", "--config", str(bad), "--out", str(out_path)]) == 1

    def test_exact_mi_command(self, capsys):
        rc = cli.main([
            "coinflip", "exact-mi", "--coins", "2", "--flips", "1", "--bias", "0.25",
            "--coding", "first-coin",
        ])
        assert rc == 0
        assert "0.048794" in capsys.readouterr().out
