"""Command-line interface.

Subcommands: ``simulate`` (run an experiment config to CSV), ``coinflip``
(drive the coin-flipping tools, emitting CSV rows), ``bounds`` (evaluate the
error-bound calculators), ``verify`` (run the fast property suites).
Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import coinflip, harness
from .errors import ConfigError


def _emit(operation: str, params: str, value, se=""):
    print(f"{operation},{params},{value},{se}")


def _cmd_simulate(args) -> int:
    with open(args.config) as fh:
        config = harness.parse_config(fh.read())
    records = harness.run_experiment(config, out_path=args.out)
    failed = sum(1 for r in records if r.status != "ok")
    print(f"wrote {len(records)} records to {args.out} ({failed} degenerate)", file=sys.stderr)
    return 0


def _cmd_bounds(args) -> int:
    lower = harness.lower_bound_value(args.m, args.n, args.B, args.d, args.C)
    upper = harness.upper_bound_value(args.m, args.n, args.B, args.d)
    a1, a2 = harness.assumption_check(args.m, args.n, args.d)
    base = f"m={args.m};n={args.n};B={args.B};d={args.d};C={args.C}"
    _emit("lower_bound", base, repr(lower))
    _emit("upper_bound", base, repr(upper))
    _emit("assumption_m_ge_ln2_mn", base, a1)
    _emit("assumption_ln_mn_ge_8sqrtd", base, a2)
    return 0


def _cmd_coinflip(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.subop == "nine-coin":
        r = coinflip.ml_nine_coin_test(args.mn, args.trials, rng)
        base = f"mn={args.mn};trials={args.trials};seed={args.seed}"
        _emit("ml_error_rate", base, r.error_rate, r.error_se)
        _emit("biased_tail", base, r.biased_tail, r.biased_tail_se)
        _emit("fair_tail", base, r.fair_tail, r.fair_tail_se)
    elif args.subop == "fano":
        _emit("fano_bound", f"I={args.i_total};k={args.k}", coinflip.fano_bound(args.i_total, args.k))
    elif args.subop == "conditions":
        rep = coinflip.theorem1_conditions(args.m, args.n, args.B, args.C)
        base = f"m={args.m};n={args.n};B={args.B};C={args.C}"
        for name in ("c1", "c2", "c3", "c4", "c5"):
            _emit(
                f"condition_{name}",
                base,
                getattr(rep, f"{name}_value"),
                "pass" if getattr(rep, f"{name}_pass") else "fail",
            )
        _emit("conditions_all", base, "pass" if rep.all_pass else "fail")
        if args.find_min_m:
            _emit("min_machines", f"n={args.n};B={args.B};C={args.C}",
                  coinflip.find_min_machines(args.n, args.B, args.C))
    elif args.subop == "exact-mi":
        world = coinflip.CoinWorld(k=args.coins, n=args.flips, m=1, bias=args.bias, biased_index=0)
        if args.coding == "first-coin":
            coding = coinflip.Coding.first_coin_bit(world)
        else:
            coding = coinflip.Coding.constant(world.n_states, 1 << args.signal_bits)
        base = f"k={args.coins};n={args.flips};bias={args.bias};coding={args.coding}"
        _emit("exact_mi_bits", base, repr(coinflip.exact_mutual_information(world, coding)))
    elif args.subop == "dominance":
        world = coinflip.CoinWorld(k=args.coins, n=args.flips, m=1, bias=args.bias, biased_index=0)
        rep = coinflip.deterministic_dominance_check(world, args.trials, rng)
        base = f"k={args.coins};n={args.flips};bias={args.bias};trials={args.trials};seed={args.seed}"
        _emit("dominance_max_deterministic", base, repr(rep.max_deterministic))
        _emit("dominance_max_randomized", base, repr(rep.max_randomized))
        _emit("dominance_holds", base, rep.dominated)
        if not rep.dominated:
            return 2
    elif args.subop == "subadditivity":
        holds = True
        for i in range(args.trials):
            k = int(rng.integers(2, 5))
            n = int(rng.integers(1, 3))
            if n * k > 8:
                n = 1
            world = coinflip.CoinWorld(
                k=k, n=n, m=2, bias=float(rng.uniform(0.05, 0.45)), biased_index=int(rng.integers(k))
            )
            codings = [
                coinflip.Coding(_random_coding_table(world.n_states, 2, rng)) for _ in range(2)
            ]
            rep = coinflip.subadditivity_check(world, codings)
            holds &= rep.holds
        _emit("subadditivity_holds", f"trials={args.trials};seed={args.seed}", holds)
        if not holds:
            return 2
    elif args.subop == "lemma5":
        worst = -math.inf
        for _ in range(args.trials):
            n = int(rng.integers(1, 4))
            alpha = rng.uniform(-1.0, 1.0, size=1 << n)
            alpha -= alpha.mean()
            peak = np.abs(alpha).max()
            if peak > 1.0:
                alpha /= peak
            probs = rng.dirichlet(np.ones(1 << n))
            lhs, rhs = coinflip.lemma5_check(alpha, probs)
            worst = max(worst, lhs - rhs)
        _emit("lemma5_worst_margin", f"trials={args.trials};seed={args.seed}", repr(worst))
        if worst > 1e-9:
            return 2
    return 0


def _random_coding_table(n_states: int, n_signals: int, rng: np.random.Generator) -> np.ndarray:
    table = rng.random((n_states, n_signals))
    return table / table.sum(axis=1, keepdims=True)


def _cmd_verify(args) -> int:
    from . import verify

    return verify.run_all()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrenc")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment config, writing a CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("bounds", help="evaluate error-bound calculators")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--B", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("coinflip", help="coin-flipping testbed operations")
    p.add_argument("subop", choices=[
        "nine-coin", "fano", "conditions", "exact-mi", "dominance", "subadditivity", "lemma5",
    ])
    p.add_argument("--mn", type=int, default=350000)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--i-total", dest="i_total", type=float, default=0.0)
    p.add_argument("--k", type=int, default=1024)
    p.add_argument("--m", type=int, default=10 ** 6)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--B", type=int, default=64)
    p.add_argument("--C", type=float, default=25.0)
    p.add_argument("--find-min-m", action="store_true")
    p.add_argument("--coins", type=int, default=2)
    p.add_argument("--flips", type=int, default=1)
    p.add_argument("--bias", type=float, default=0.25)
    p.add_argument("--coding", choices=["first-coin", "constant"], default="first-coin")
    p.add_argument("--signal-bits", type=int, default=1)
    p.set_defaults(fn=_cmd_coinflip)

    p = sub.add_parser("verify", help="run the fast property suites")
    p.set_defaults(fn=_cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
