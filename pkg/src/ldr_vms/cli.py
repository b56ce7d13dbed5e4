"""Command-line experiment runner.

Exit codes: 0 success, 1 internal error, 2 usage or precondition error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from .bundled import bundled_scenario_path, haining_demand_model, haining_network
from .demand import GapError
from .engine import PAPER_PROFILES, DataError
from .experiments import DayRow, compare, evaluate
from .pso import PsoConfig, PsoError
from .scenario import (ScenarioBundle, ScenarioError, dumps, load_policy, load_scenario, save_policy,
                       save_scenario, synthetic_bundle)
from .trainer import (FOUR_STRATEGIES, SIGNAL_CHOICES, VMS_CHOICES, ObjectiveError, Strategy, TrainingError,
                      TrainingSet, train)
from .vms import ComplianceProfile, ConfigurationError

log = logging.getLogger("ldr_vms")

# errors caused by the caller's inputs rather than by the program
_USER_ERRORS = (ScenarioError, TrainingError, ConfigurationError, DataError, GapError, ObjectiveError, PsoError)


class UsageError(Exception):
    pass


def parse_profile(text: str) -> ComplianceProfile:
    try:
        values = [float(v) for v in text.split(",")]
        return ComplianceProfile.parse(values)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad compliance profile {text!r}: {exc}") from None


def parse_sweep(text: str) -> list[ComplianceProfile]:
    parts = [p.strip() for p in text.split(";") if p.strip()]
    return [parse_profile(p) for p in parts]


def parse_strategy(text: str) -> Strategy:
    vms, _, signal = text.strip().partition("+")
    signal = {"coordinated": "ldr"}.get(signal, signal)
    try:
        return Strategy(vms, signal)
    except ValueError:
        raise UsageError(f"bad strategy {text!r}; write vms+signal, e.g. ldr+default or genuine+coordinated") from None


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _load(args) -> ScenarioBundle:
    path = args.scenario or bundled_scenario_path()
    return load_scenario(path)


def _config(bundle: ScenarioBundle, args):
    cfg = bundle.config
    if getattr(args, "compliance", None) is not None:
        cfg = cfg.replace(compliance=args.compliance)
    return cfg


def _write_text(path: str | Path, text: str) -> None:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True)
    p.write_text(text, encoding="utf-8", newline="")


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


DAY_HEADER = ("day", "strategy", "compliance", "mean_travel_time_s", "completed", "stranded")


def _day_rows(rows: Sequence[DayRow]):
    return [(r.day, r.strategy, r.compliance, r.mean_travel_time, r.completed, r.stranded) for r in rows]


# -- commands --------------------------------------------------------------

def cmd_synth(args) -> int:
    model = haining_demand_model(sigma=args.sigma)
    bundle = synthetic_bundle(haining_network(), model, args.days, args.seed, name=args.name)
    save_scenario(bundle, args.out)
    log.info("wrote %s: %d train / %d test days", args.out, len(bundle.train_days), len(bundle.test_days))
    return 0


def cmd_train(args) -> int:
    bundle = _load(args)
    strategy = Strategy(args.vms, args.signal)
    cfg = _config(bundle, args)
    pso = PsoConfig(particle_count=args.particles, max_iterations=args.iterations, rng_seed=args.seed)
    outcome = train(bundle.network, strategy, TrainingSet(bundle.train_days, args.replications), pso, cfg,
                    delta=args.delta)
    save_policy(outcome.policy, args.out, bundle.network)
    report_path = args.report or str(Path(args.out).with_suffix("")) + ".report.json"
    _write_text(report_path, dumps(outcome.report) + "\n")
    if args.trace:
        _write_text(args.trace, _csv(("iteration", "best_objective_s"),
                                     [(k + 1, v) for k, v in enumerate(outcome.result.trace)]))
    # timing stays off the files so reruns are byte-identical
    log.info("trained %s in %.1f s: %.3f -> %.3f s", strategy.name, outcome.wall_clock,
             outcome.baseline_value, outcome.result.best_value)
    return 0


def cmd_evaluate(args) -> int:
    bundle = _load(args)
    strategy = Strategy(args.vms, args.signal)
    policy = None
    if strategy.trainable:
        if not args.policy:
            raise UsageError(f"strategy {strategy.name} needs --policy")
        policy = load_policy(args.policy)
    days = bundle.test_days if args.split == "test" else bundle.train_days
    if not days:
        raise UsageError(f"scenario has no {args.split} days")
    rows = evaluate(bundle.network, days, strategy, policy, _config(bundle, args), seed=args.seed,
                    replications=args.replications, bands=bundle.bands)
    text = _csv(DAY_HEADER, _day_rows(rows))
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_compare(args) -> int:
    bundle = _load(args)
    profiles = parse_sweep(args.sweep) if args.sweep is not None else [ComplianceProfile.parse(p)
                                                                        for p in PAPER_PROFILES]
    if not profiles:
        raise UsageError("empty compliance sweep")
    strategies = [parse_strategy(s) for s in args.strategies.split(",")] if args.strategies \
        else list(FOUR_STRATEGIES)
    policies = [load_policy(p) for p in args.policy or []]
    for s in strategies:
        if s.trainable and not any(p.strategy == s for p in policies):
            raise UsageError(f"no policy given for {s.name}")
    days = bundle.test_days
    if not days:
        raise UsageError("scenario has no test days")
    result = compare(bundle.network, days, strategies, profiles, policies, bundle.config, seed=args.seed,
                     replications=args.replications, bands=bundle.bands)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    matrix_rows = [[name] + [result.matrix[(name, tag)] for tag in result.profiles] for name in result.strategies]
    _write_text(out / "matrix.csv", _csv(["strategy"] + [f"compliance={t}" for t in result.profiles], matrix_rows))
    _write_text(out / "per_day.csv", _csv(DAY_HEADER, _day_rows(result.per_day)))
    _write_text(out / "message_volume.csv", _csv(
        ("strategy", "compliance", "day", "step", "message", "v_route1_minus_v_route2", "counter_intuitive"),
        [(r.strategy, r.compliance, r.day, r.step, r.message.label, r.volume_difference, int(r.counter_intuitive))
         for r in result.log]))
    return 0


def cmd_validate(args) -> int:
    bundle = load_scenario(args.scenario)
    print(json.dumps({"name": bundle.name, "links": bundle.network.link_count,
                      "intersections": len(bundle.network.intersections),
                      "train_days": len(bundle.train_days), "test_days": len(bundle.test_days)}))
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldr-vms", description="Train and evaluate LDR sign and signal policies.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_arg(sp):
        sp.add_argument("--scenario", help="scenario bundle (default: bundled synthetic Haining scenario)")

    def strategy_args(sp):
        sp.add_argument("--vms", choices=VMS_CHOICES, default="ldr")
        sp.add_argument("--signal", choices=SIGNAL_CHOICES, default="default")
        sp.add_argument("--compliance", type=parse_profile, default=None,
                        help='five route-1 shares, e.g. "0.1,0.3,0.5,0.7,0.9"')

    sp = sub.add_parser("synth", help="write a scenario with synthetic demand days")
    sp.add_argument("--days", type=positive_int, default=20)
    sp.add_argument("--sigma", type=float, default=0.3)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--name", default="haining-synthetic")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="fit a policy on the training days")
    scenario_arg(sp)
    strategy_args(sp)
    sp.add_argument("--particles", type=positive_int, default=20)
    sp.add_argument("--iterations", type=positive_int, default=30)
    sp.add_argument("--delta", type=positive_int, default=1)
    sp.add_argument("--replications", type=positive_int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="policy record path")
    sp.add_argument("--report", help="training report path (default: next to the policy)")
    sp.add_argument("--trace", help="optional CSV of best objective per iteration")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="per-day objective on held-out days")
    scenario_arg(sp)
    strategy_args(sp)
    sp.add_argument("--policy")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replications", type=positive_int, default=1)
    sp.add_argument("--split", choices=("test", "train"), default="test")
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("compare", help="strategy x compliance matrix and message/volume log")
    scenario_arg(sp)
    sp.add_argument("--policy", action="append", help="policy record; repeat for each trained strategy")
    sp.add_argument("--sweep", help='profiles separated by ";" (default: the three published profiles)')
    sp.add_argument("--strategies", help="comma list of vms+signal (default: all four)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replications", type=positive_int, default=1)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("validate", help="load a scenario and print a summary")
    sp.add_argument("scenario")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    started = time.perf_counter()
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"ldr-vms {args.command}: {exc}", file=sys.stderr)
        return 2
    except argparse.ArgumentTypeError as exc:
        print(f"ldr-vms {args.command}: {exc}", file=sys.stderr)
        return 2
    except _USER_ERRORS as exc:
        print(f"ldr-vms {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        log.exception("internal error")
        print(f"ldr-vms {args.command}: internal error: {exc}", file=sys.stderr)
        return 1
    log.info("%s finished in %.1f s", args.command, time.perf_counter() - started)
    return code


if __name__ == "__main__":
    sys.exit(main())
