"""Experiment orchestration: configs, the estimator pipelines, bound
calculators, the true-loss oracle, and CSV persistence.

Config files are flat key = value text; the CSV schema is exactly
``estimator,m,n,B,d,seed,loss_gap,loss_gap_se,wall_ms,status``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import functions, server
from .encoder import (
    DEFAULT_LATTICE_CAP,
    budgeted_layout,
    build_packet,
    diagnostic_layout,
    full_cube_minimizer,
)
from .errors import ConfigError, EstimationFailedError
from .functions import EmpiricalLoss
from .grids import ProblemDims, ResolutionParams, compute_delta
from .server import baseline_average, baseline_single, estimate, reconstruct, redundancy_elimination

CSV_HEADER = "estimator,m,n,B,d,seed,loss_gap,loss_gap_se,wall_ms,status"

FAMILIES = ("relu_regression", "point_mass", "sign_grid", "nine_point")
ESTIMATORS = ("mre_nc", "baseline_average", "baseline_single")

# fixed stream tags so each randomness consumer has an independent substream
_TAG_FAMILY, _TAG_SAMPLES, _TAG_ENCODER, _TAG_PICK, _TAG_ORACLE = 11, 12, 13, 14, 15


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    m_values: tuple[int, ...]
    n: int
    B: int
    d: int
    estimators: tuple[str, ...] = ESTIMATORS
    seeds: tuple[int, ...] = (0,)
    quantization: str = "budgeted"
    diagnostic_bits: int = 24
    mc_samples: int = 200_000
    lattice_cap: float = DEFAULT_LATTICE_CAP
    C: float = 2.0                                  # sign_grid bias constant
    noise_var: float = 0.5                          # relu_regression
    theta1_true: tuple[float, ...] | None = None    # None: drawn per seed
    anchor: tuple[float, ...] | None = None         # point_mass; None: drawn per seed
    sign_p: tuple[int, ...] | None = None           # sign_grid biased point
    nine_p: tuple[int, ...] | None = None           # nine_point biased point

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ConfigError(f"unknown estimator {e!r}; expected one of {ESTIMATORS}")
        if not self.estimators or not self.m_values or not self.seeds:
            raise ConfigError("estimators, m, and seeds must be non-empty")
        if self.quantization not in ("budgeted", "diagnostic"):
            raise ConfigError("quantization must be 'budgeted' or 'diagnostic'")
        if self.family == "relu_regression" and self.d != 4:
            raise ConfigError("relu_regression is a d = 4 family")
        if self.family == "nine_point" and self.d != 2:
            raise ConfigError("nine_point is a d = 2 family")
        if self.theta1_true is not None and len(self.theta1_true) != 4:
            raise ConfigError("theta1_true needs 4 entries (row-major 2x2)")
        if self.mc_samples < 1000:
            raise ConfigError("mc_samples must be at least 1000")


# --------------------------------------------------------------------------
# flat key = value config serialization

_TUPLE_INT = {"m_values", "seeds"}
_TUPLE_FLOAT = {"theta1_true", "anchor"}
_TUPLE_IDX = {"sign_p", "nine_p"}
_KEY_ALIASES = {"m": "m_values"}


def dumps_config(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(config):
        v = getattr(config, f.name)
        key = "m" if f.name == "m_values" else f.name
        if v is None:
            lines.append(f"{key} = random")
        elif isinstance(v, tuple):
            lines.append(f"{key} = " + ", ".join(str(x) for x in v))
        else:
            lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno} is not 'key = value': {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _KEY_ALIASES.get(key, key)
        if key in raw:
            raise ConfigError(f"duplicate config key {key!r}")
        raw[key] = value

    known = {f.name: f for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _parse_value(key, value)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_value(key: str, value: str):
    if key in _TUPLE_INT:
        return tuple(int(x) for x in value.split(","))
    if key in _TUPLE_FLOAT | _TUPLE_IDX:
        if value.strip().lower() == "random":
            return None
        cast = float if key in _TUPLE_FLOAT else int
        return tuple(cast(x) for x in value.split(","))
    if key in ("n", "B", "d", "diagnostic_bits", "mc_samples"):
        return int(value)
    if key in ("lattice_cap", "C", "noise_var"):
        return float(value)
    if key == "estimators":
        return tuple(x.strip() for x in value.split(","))
    return value.strip()


# --------------------------------------------------------------------------
# records


@dataclass
class ExperimentRecord:
    estimator: str
    m: int
    n: int
    B: int
    d: int
    seed: int
    loss_gap: float
    loss_gap_se: float
    wall_ms: float
    status: str
    # not part of the CSV schema; kept for in-process checks
    theta_hat: np.ndarray | None = field(default=None, repr=False, compare=False)
    packet_bits_max: int = field(default=0, compare=False)


def record_sort_key(r: ExperimentRecord):
    return (r.estimator, r.m, r.seed)


def records_to_csv(records) -> str:
    lines = [CSV_HEADER]
    for r in sorted(records, key=record_sort_key):
        lines.append(
            f"{r.estimator},{r.m},{r.n},{r.B},{r.d},{r.seed},"
            f"{r.loss_gap!r},{r.loss_gap_se!r},{r.wall_ms:.3f},{r.status}"
        )
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# families and oracles


def make_family(config: ExperimentConfig, seed: int, dims: ProblemDims):
    rng = np.random.default_rng(np.random.SeedSequence([_TAG_FAMILY, seed]))
    if config.family == "relu_regression":
        if config.theta1_true is not None:
            theta1 = np.array(config.theta1_true).reshape(2, 2)
        else:
            theta1 = rng.uniform(-2.0, 2.0, size=(2, 2))
        return functions.ReluRegressionFamily(theta1, config.noise_var, rng)
    if config.family == "point_mass":
        anchor = (
            np.array(config.anchor)
            if config.anchor is not None
            else rng.uniform(-0.8, 0.8, size=dims.d)
        )
        return functions.point_mass_anchor(anchor)
    if config.family == "sign_grid":
        spec = functions.lower_bound_grid(dims)
        p = config.sign_p
        if p is None:
            p = tuple(int(i) for i in rng.integers(0, spec.g, size=dims.d))
        return functions.distribution_Pp(p, config.C, dims)
    if config.family == "nine_point":
        p = config.nine_p
        if p is None:
            p = tuple(int(i) for i in rng.integers(0, 3, size=2))
        return functions.nine_point_family(p, dims.mn)
    raise ConfigError(f"unknown family {config.family!r}")


def true_loss_oracle(family, theta, mc_samples: int, rng: np.random.Generator):
    """(F(theta) estimate, standard error); closed forms are exact with SE 0."""
    if getattr(family, "closed_form", False):
        return family.expected_loss(theta), 0.0
    if mc_samples < 1000:
        raise ConfigError("Monte Carlo oracle needs at least 1000 samples")
    return family.monte_carlo_loss(theta, mc_samples, rng)


# --------------------------------------------------------------------------
# bound calculators


def lower_bound_value(m: int, n: int, B: int, d: int, C: float) -> float:
    """max(1/(C*sqrt(n)*(mB)^(1/d)*ln(mB)), 1/(4*sqrt(mn)))."""
    if min(m, n, B, d) < 1 or C < 1:
        raise ConfigError("inputs must be positive with C >= 1")
    mB = m * B
    return max(
        1.0 / (C * math.sqrt(n) * mB ** (1.0 / d) * math.log(mB)),
        1.0 / (4.0 * math.sqrt(m * n)),
    )


def upper_bound_value(m: int, n: int, B: int, d: int) -> float:
    """4*sqrt(d)*ln(mn)^2 * max(ln(mn)/(sqrt(n)*(mB)^(1/d)), 1/sqrt(mn))."""
    if min(m, n, B, d) < 1:
        raise ConfigError("inputs must be positive")
    ln_mn = math.log(m * n)
    return (
        4.0
        * math.sqrt(d)
        * ln_mn ** 2
        * max(ln_mn / (math.sqrt(n) * (m * B) ** (1.0 / d)), 1.0 / math.sqrt(m * n))
    )


def assumption_check(m: int, n: int, d: int) -> tuple[bool, bool]:
    """(m >= ln(mn)^2, ln(mn) >= 8*sqrt(d)); boundary equality passes."""
    ln_mn = math.log(m * n)
    return m >= ln_mn ** 2, ln_mn >= 8.0 * math.sqrt(d)


# --------------------------------------------------------------------------
# the experiment runner


def _mre_nc_layout(config: ExperimentConfig, dims: ProblemDims, params: ResolutionParams):
    if config.quantization == "diagnostic":
        return diagnostic_layout(dims, params, config.diagnostic_bits)
    return budgeted_layout(dims, params)


class _Cell:
    """Per-(seed, m) context shared by the estimators."""

    def __init__(self, config: ExperimentConfig, seed: int, m: int):
        self.config = config
        self.seed = seed
        self.dims = ProblemDims(m, config.n, config.B, config.d)
        self.params = compute_delta(self.dims)
        self.family = make_family(config, seed, self.dims)
        sample_streams = np.random.SeedSequence([_TAG_SAMPLES, seed, m]).spawn(m)
        self.samples = [
            [self.family.sample(np.random.default_rng(s)) for _ in range(config.n)]
            for s in sample_streams
        ]
        self._minimizers = None
        self.pick_rng = np.random.default_rng(np.random.SeedSequence([_TAG_PICK, seed, m]))

    def minimizers(self) -> np.ndarray:
        if self._minimizers is None:
            half = self.config.n // 2
            self._minimizers = np.stack(
                [
                    full_cube_minimizer(
                        EmpiricalLoss(s[:half]), self.params, self.dims.d, self.config.lattice_cap
                    )
                    for s in self.samples
                ]
            )
        return self._minimizers

    def run_estimator(self, name: str):
        """Returns (theta_hat, status, max packet bits)."""
        if name == "baseline_average":
            return baseline_average(self.minimizers()), "ok", 0
        if name == "baseline_single":
            return baseline_single(self.minimizers(), self.pick_rng), "ok", 0
        if name == "mre_nc":
            return self._run_mre_nc()
        raise ConfigError(f"unknown estimator {name!r}")

    def _run_mre_nc(self):
        max_bits = 0
        if self.params.t >= 1:
            layout = _mre_nc_layout(self.config, self.dims, self.params)
            enc_streams = np.random.SeedSequence([_TAG_ENCODER, self.seed, self.dims.m]).spawn(
                self.dims.m
            )
            packets = [
                build_packet(
                    self.samples[i],
                    self.dims,
                    self.params,
                    np.random.default_rng(enc_streams[i]),
                    machine_id=i,
                    layout=layout,
                    lattice_cap=self.config.lattice_cap,
                )
                for i in range(self.dims.m)
            ]
            max_bits = max(p.bit_length for p in packets)
            try:
                survivors = redundancy_elimination(packets, layout)
                table = reconstruct(survivors, self.params, layout)
                return estimate(table), "ok", max_bits
            except EstimationFailedError:
                pass
        # degenerate run: no finest-level candidate; fall back to a root-cell
        # search, i.e. one machine's full-cube minimizer
        theta = baseline_single(self.minimizers(), self.pick_rng)
        return theta, "estimation-failed", max_bits


def run_experiment(config: ExperimentConfig, out_path=None) -> list[ExperimentRecord]:
    """Run every (seed, m, estimator) job; optionally write the CSV."""
    records = []
    for seed in config.seeds:
        for m in config.m_values:
            cell = _Cell(config, seed, m)
            for idx, est in enumerate(config.estimators):
                start = time.perf_counter()
                theta, status, max_bits = cell.run_estimator(est)
                wall_ms = (time.perf_counter() - start) * 1000.0
                oracle_rng = np.random.default_rng(
                    np.random.SeedSequence([_TAG_ORACLE, seed, m, idx])
                )
                value, se = true_loss_oracle(cell.family, theta, config.mc_samples, oracle_rng)
                records.append(
                    ExperimentRecord(
                        estimator=est,
                        m=m,
                        n=config.n,
                        B=config.B,
                        d=config.d,
                        seed=seed,
                        loss_gap=float(value - cell.family.min_value),
                        loss_gap_se=float(se),
                        wall_ms=wall_ms,
                        status=status,
                        theta_hat=theta,
                        packet_bits_max=max_bits,
                    )
                )
    records.sort(key=record_sort_key)
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write(records_to_csv(records))
    return records
