"""Coin-flipping testbed: identify one biased coin among k from B-bit reports.

Desk-scale verification tools for the identification-hardness machinery:
exact mutual information by enumeration on tiny worlds, the Fano error
bound, deterministic-coding dominance, the zero-sum weighted-mass
inequality, sub-additivity of joint information, the 9-coin maximum
likelihood test, and the bound-regime condition calculators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_ENUM_GATE = 65536  # largest 2^(n*k) we will enumerate exactly


@dataclass(frozen=True)
class CoinWorld:
    """k coins, one biased; each flipper flips every coin n times."""

    k: int
    n: int
    m: int
    bias: float
    biased_index: int

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError(f"need at least 2 coins, got {self.k}")
        if self.n < 1 or self.m < 1:
            raise ConfigError("flip and flipper counts must be positive")
        if not 0.0 < self.bias < 0.5:
            raise ConfigError(f"bias must lie in (0, 1/2), got {self.bias}")
        if not 0 <= self.biased_index < self.k:
            raise ConfigError(f"biased index {self.biased_index} out of range")

    @classmethod
    def from_budget(cls, k: int, n: int, m: int, C: float, biased_index: int = 0) -> "CoinWorld":
        """Bias 1/(2*C*sqrt(n)*ln(k)), the regime tied to the estimation bound."""
        return cls(k=k, n=n, m=m, bias=1.0 / (2.0 * C * math.sqrt(n) * math.log(k)), biased_index=biased_index)

    @property
    def n_states(self) -> int:
        return 1 << (self.n * self.k)


def simulate_flips(world: CoinWorld, rng: np.random.Generator) -> np.ndarray:
    """One flipper's n x k outcome matrix; column biased_index has P(1) = 1/2 + bias."""
    w = (rng.random((world.n, world.k)) < 0.5).astype(np.int8)
    w[:, world.biased_index] = (rng.random(world.n) < 0.5 + world.bias).astype(np.int8)
    return w


# ---------------------------------------------------------------------------
# exact enumeration


def _column_ones(world: CoinWorld) -> np.ndarray:
    """ones[w, j] = number of 1s in column j of outcome-state w."""
    n, k = world.n, world.k
    states = np.arange(world.n_states, dtype=np.int64)
    popcount = np.array([bin(x).count("1") for x in range(1 << n)], dtype=np.int64)
    ones = np.empty((world.n_states, k), dtype=np.int64)
    mask = (1 << n) - 1
    for j in range(k):
        ones[:, j] = popcount[(states >> (j * n)) & mask]
    return ones


def outcome_probabilities(world: CoinWorld) -> np.ndarray:
    """P[t, w] = probability of outcome-state w given the biased coin is t."""
    if world.n_states > _ENUM_GATE:
        raise ConfigError(
            f"exact enumeration gated at 2^(n*k) <= {_ENUM_GATE}, got 2^{world.n * world.k}"
        )
    ones = _column_ones(world)
    n, k = world.n, world.k
    base = 0.5 ** (n * (k - 1))
    p1, p0 = 0.5 + world.bias, 0.5 - world.bias
    out = np.empty((k, world.n_states))
    for t in range(k):
        o = ones[:, t]
        out[t] = base * p1 ** o * p0 ** (n - o)
    return out


@dataclass(frozen=True)
class Coding:
    """A (possibly randomized) map from outcome states to B-bit signals.

    table[w, s] is the probability of emitting signal s on outcome state w;
    rows sum to one.
    """

    table: np.ndarray

    def __post_init__(self):
        t = self.table
        if t.ndim != 2 or np.any(t < -1e-15):
            raise ConfigError("coding table must be a non-negative 2-d array")
        if not np.allclose(t.sum(axis=1), 1.0, atol=1e-12):
            raise ConfigError("coding rows must each sum to 1")

    @property
    def n_signals(self) -> int:
        return self.table.shape[1]

    @classmethod
    def deterministic(cls, mapping, n_signals: int) -> "Coding":
        mapping = np.asarray(mapping, dtype=np.int64)
        table = np.zeros((mapping.size, n_signals))
        table[np.arange(mapping.size), mapping] = 1.0
        return cls(table)

    @classmethod
    def constant(cls, n_states: int, n_signals: int) -> "Coding":
        return cls.deterministic(np.zeros(n_states, dtype=np.int64), n_signals)

    @classmethod
    def first_coin_bit(cls, world: CoinWorld) -> "Coding":
        """S = the first flip of coin 0 (a 1-bit signal)."""
        states = np.arange(world.n_states, dtype=np.int64)
        return cls.deterministic(states & 1, 2)


def _mi_from_conditional(p_s_given_t: np.ndarray) -> float:
    """I(T;S) in bits for uniform T, from the (k, S) conditional table."""
    p_s = p_s_given_t.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p_s_given_t > 0, p_s_given_t / p_s, 1.0)
        terms = np.where(p_s_given_t > 0, p_s_given_t * np.log2(ratio), 0.0)
    return float(terms.sum() / p_s_given_t.shape[0])


def _entropy_bits(probs: np.ndarray) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    nz = probs[probs > 0]
    return float(-(nz * np.log2(nz)).sum())


def signal_conditionals(world: CoinWorld, coding: Coding) -> np.ndarray:
    """P[t, s] = probability of signal s given biased coin t, by full enumeration."""
    pw = outcome_probabilities(world)
    if coding.table.shape[0] != world.n_states:
        raise ConfigError(
            f"coding covers {coding.table.shape[0]} states, world has {world.n_states}"
        )
    return pw @ coding.table


def exact_mutual_information(world: CoinWorld, coding: Coding) -> float:
    """Exact I(T; S) in bits between the biased index and the emitted signal."""
    return _mi_from_conditional(signal_conditionals(world, coding))


def signal_entropy(world: CoinWorld, coding: Coding) -> float:
    """H(S) in bits under a uniformly random biased index."""
    return _entropy_bits(signal_conditionals(world, coding).mean(axis=0))


# ---------------------------------------------------------------------------
# dominance of deterministic codings (1-bit signals)


@dataclass(frozen=True)
class DominanceReport:
    max_deterministic: float
    max_randomized: float
    dominated: bool


def deterministic_dominance_check(
    world: CoinWorld, trials: int, rng: np.random.Generator, tol: float = 1e-12
) -> DominanceReport:
    """Exhaustively enumerate all deterministic 1-bit codings and verify none of
    `trials` random randomized codings exceeds the best of them."""
    n_states = world.n_states
    if n_states > 16:
        raise ConfigError(f"deterministic enumeration gated at 16 states, got {n_states}")
    pw = outcome_probabilities(world)  # (k, n_states)

    def binary_mi(p1_given_t: np.ndarray) -> float:
        cond = np.stack([1.0 - p1_given_t, p1_given_t], axis=1)
        return _mi_from_conditional(cond)

    max_det = 0.0
    for mask in range(1 << n_states):
        sel = np.array([(mask >> w) & 1 for w in range(n_states)], dtype=np.float64)
        max_det = max(max_det, binary_mi(pw @ sel))

    max_rand = 0.0
    for _ in range(trials):
        q1 = rng.random(n_states)
        max_rand = max(max_rand, binary_mi(pw @ q1))

    return DominanceReport(max_det, max_rand, max_rand <= max_det + tol)


# ---------------------------------------------------------------------------
# Fano bound, zero-sum mass inequality, sub-additivity


def fano_bound(i_total_bits: float, k: int) -> float:
    """Lower bound on identification error: max(0, 1 - I/log2(k) - 1/log2(k))."""
    if k < 2:
        raise ConfigError(f"need at least 2 hypotheses, got {k}")
    log2k = math.log2(k)
    return max(0.0, 1.0 - i_total_bits / log2k - 1.0 / log2k)


def lemma5_check(alpha, probs) -> tuple[float, float]:
    """lhs = (sum alpha_u P(u))^2 and rhs = 1.5*(n - H(U)) for zero-sum alpha in [-1,1].

    The inequality lhs <= rhs is the caller's assertion; this returns both sides.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    n = round(math.log2(alpha.size))
    if 1 << n != alpha.size or alpha.shape != probs.shape:
        raise ConfigError("alpha and probs must both have length 2^n")
    if np.any(np.abs(alpha) > 1.0 + 1e-12):
        raise ConfigError("alpha entries must lie in [-1, 1]")
    if abs(alpha.sum()) > 1e-9:
        raise ConfigError("alpha must sum to zero")
    if np.any(probs < -1e-15) or abs(probs.sum() - 1.0) > 1e-9:
        raise ConfigError("probs must be a distribution")
    lhs = float(np.dot(alpha, probs)) ** 2
    rhs = 1.5 * (n - _entropy_bits(probs))
    return lhs, rhs


@dataclass(frozen=True)
class SubadditivityReport:
    joint: float
    marginals: tuple[float, ...]
    holds: bool


def subadditivity_check(
    world: CoinWorld, codings: list[Coding], tol: float = 1e-12
) -> SubadditivityReport:
    """Exact check that I(T; S^1..S^m) <= sum_i I(T; S^i) for independent flippers.

    Flippers share the world (and its hidden biased index) but flip their own
    coins, so signals are independent given T.
    """
    if not 1 <= len(codings) <= 2:
        raise ConfigError("joint enumeration supports 1 or 2 flippers")
    conds = [signal_conditionals(world, c) for c in codings]
    marginals = tuple(_mi_from_conditional(c) for c in conds)
    joint_cond = conds[0]
    for c in conds[1:]:
        joint_cond = np.einsum("ts,tr->tsr", joint_cond, c).reshape(world.k, -1)
    joint = _mi_from_conditional(joint_cond)
    return SubadditivityReport(joint, marginals, joint <= sum(marginals) + tol)


# ---------------------------------------------------------------------------
# 9-coin maximum likelihood test


@dataclass(frozen=True)
class NineCoinResult:
    mn: int
    trials: int
    error_rate: float
    error_se: float
    biased_tail: float        # Pr(N_biased > mn/2 + 0.4*sqrt(mn))
    biased_tail_se: float
    fair_tail: float          # Pr(N_fair <= mn/2 + 0.4*sqrt(mn))
    fair_tail_se: float


def ml_nine_coin_test(mn: int, trials: int, rng: np.random.Generator) -> NineCoinResult:
    """Monte Carlo error rate of the most-powerful test (argmax of head counts)
    for 9 coins flipped mn times each, one biased by 1/(4*sqrt(mn))."""
    if mn < 4:
        raise ConfigError(f"need mn >= 4, got {mn}")
    if trials < 1:
        raise ConfigError("need at least one trial")
    p_biased = 0.5 + 1.0 / (4.0 * math.sqrt(mn))
    counts = rng.binomial(mn, 0.5, size=(trials, 9)).astype(np.float64)
    t_true = rng.integers(0, 9, size=trials)
    rows = np.arange(trials)
    counts[rows, t_true] = rng.binomial(mn, p_biased, size=trials)

    # random jitter below 1/2 breaks argmax ties uniformly without reordering
    # distinct integer counts
    t_hat = np.argmax(counts + 0.5 * rng.random((trials, 9)), axis=1)
    err = float(np.mean(t_hat != t_true))

    threshold = mn / 2.0 + 0.4 * math.sqrt(mn)
    biased_counts = counts[rows, t_true]
    fair_mask = np.ones((trials, 9), dtype=bool)
    fair_mask[rows, t_true] = False
    fair_counts = counts[fair_mask]

    b_tail = float(np.mean(biased_counts > threshold))
    f_tail = float(np.mean(fair_counts <= threshold))

    def se(p: float, n: int) -> float:
        return math.sqrt(max(p * (1.0 - p), 1e-12) / n)

    return NineCoinResult(
        mn=mn,
        trials=trials,
        error_rate=err,
        error_se=se(err, trials),
        biased_tail=b_tail,
        biased_tail_se=se(b_tail, trials),
        fair_tail=f_tail,
        fair_tail_se=se(f_tail, fair_counts.size),
    )


# ---------------------------------------------------------------------------
# bound-regime conditions


@dataclass(frozen=True)
class ConditionReport:
    m: int
    n: int
    B: int
    C: float
    c1_value: float   # C*sqrt(ln(mB)), needs >= 15
    c1_pass: bool
    c2_value: int     # mB, needs >= 10240
    c2_pass: bool
    c3_value: float   # 23/(C*sqrt(mB)) + 1/(mB), needs <= 1/7
    c3_pass: bool
    c4_value: float   # bracketed sum / (B*log2(mB)), needs <= 1/10
    c4_pass: bool
    c5_value: int     # mn, needs >= 350000
    c5_pass: bool

    @property
    def all_pass(self) -> bool:
        return self.c1_pass and self.c2_pass and self.c3_pass and self.c4_pass and self.c5_pass


def theorem1_conditions(m: int, n: int, B: int, C: float) -> ConditionReport:
    """Evaluate the five regime conditions under which the identification
    error exceeds 1/2."""
    if C < 1:
        raise ConfigError(f"C must be >= 1, got {C}")
    if m < 1 or n < 1 or B < 1:
        raise ConfigError("m, n, B must be positive")
    k = m * B
    c1 = C * math.sqrt(math.log(k))
    c3 = 23.0 / (C * math.sqrt(k)) + 1.0 / k
    bracket = (
        (313.0 / C) ** 2
        + 94.0 ** 2 / (C * math.sqrt(k))
        + 192.0 / k
        + 15.0 / k ** 1.5
        + (49.0 + 6.0 * B) / k ** 2
    )
    c4 = bracket / (B * math.log2(k))
    return ConditionReport(
        m=m, n=n, B=B, C=C,
        c1_value=c1, c1_pass=c1 >= 15.0,
        c2_value=k, c2_pass=k >= 10240,
        c3_value=c3, c3_pass=c3 <= 1.0 / 7.0,
        c4_value=c4, c4_pass=c4 <= 0.1,
        c5_value=m * n, c5_pass=m * n >= 350000,
    )


def find_min_machines(n: int, B: int, C: float, m_cap: int = 1 << 62) -> int | None:
    """Smallest machine count passing every condition (each is monotone in m);
    None if no m up to m_cap passes."""
    if not theorem1_conditions(m_cap, n, B, C).all_pass:
        return None
    lo, hi = 1, m_cap
    if theorem1_conditions(lo, n, B, C).all_pass:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if theorem1_conditions(mid, n, B, C).all_pass:
            hi = mid
        else:
            lo = mid
    return hi
