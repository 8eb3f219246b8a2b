"""Command line front end.

Exit codes: 0 on success (and passing checks), 1 when a requested check
or verification comes back negative (not an equilibrium, infeasible
action set, failed ESN check), 2 for usage errors such as a missing or
malformed config file.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
import yaml

from .config import load_config
from .game import (
    InfeasibleActionError,
    count_actions,
    enumerate_actions,
    load_profile,
    load_table,
    verify_mixed_ne,
)
from .harness import SweepSpec, run_episode, run_sweep, write_episode_csv, write_sweep_csv
from .learners import esn_table_check, random_game_table
from .vrqos import demand_rate, to_binary_mbit


def _fmt(x: float) -> str:
    return format(x, ".12g")


def _fail_usage(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        return _fail_usage(str(exc))
    try:
        metrics = run_episode(
            cfg,
            policy=args.policy,
            t_slots=args.slots,
            seed=args.seed,
            mode=args.mode,
        )
    except ValueError as exc:
        return _fail_usage(str(exc))
    if args.out:
        write_episode_csv(metrics, args.out)
    print(f"policy: {metrics.policy}")
    print(f"seed: {metrics.seed}")
    print(f"mode: {metrics.mode}")
    print(f"active_sbs: {len(metrics.sbs_ids)}")
    print(f"serviced_fraction: {_fmt(metrics.serviced_fraction)}")
    print(f"convergence_slot: {metrics.convergence_slot}")
    print(f"final_total_utility: {_fmt(metrics.final_total_utility)}")
    print(f"mean_delay_s: {_fmt(metrics.mean_delay_s)}")
    print(f"wall_time_s: {_fmt(metrics.wall_time_s)}")
    if args.out:
        print(f"csv: {args.out}")
    return 0


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        return _fail_usage(str(exc))
    try:
        values = [int(item) for item in args.values.split(",")]
        spec = SweepSpec(
            axis=args.axis,
            values=values,
            runs_per_point=args.runs,
            base=cfg,
        )
        rows, aggregates = run_sweep(
            spec,
            args.policies.split(","),
            t_slots=args.slots,
            master_seed=args.seed,
            mode=args.mode,
        )
    except ValueError as exc:
        return _fail_usage(str(exc))
    write_sweep_csv(rows, args.out)
    for agg in aggregates:
        print(
            f"axis_value={agg['axis_value']} policy={agg['policy']} "
            f"mean_total_utility={_fmt(agg['mean_total_utility'])} "
            f"std_total_utility={_fmt(agg['std_total_utility'])} "
            f"median_convergence_slot={_fmt(agg['median_convergence_slot'])} "
            f"mean_serviced_fraction={_fmt(agg['mean_serviced_fraction'])}"
        )
    print(f"csv: {args.out}")
    return 0


def cmd_verify_ne(args) -> int:
    try:
        table = load_table(args.table)
        profile = load_profile(args.profile)
    except (OSError, ValueError, KeyError) as exc:
        return _fail_usage(str(exc))
    try:
        is_ne, regret = verify_mixed_ne(table, profile, tol=args.tol)
    except ValueError as exc:
        return _fail_usage(str(exc))
    print(f"max_regret: {_fmt(regret)}")
    print(f"tolerance: {_fmt(args.tol)}")
    print(f"verdict: {'equilibrium' if is_ne else 'not an equilibrium'}")
    return 0 if is_ne else 1


def cmd_count_actions(args) -> int:
    try:
        count = count_actions(args.users, args.dl, args.ul)
    except InfeasibleActionError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    if args.enumerate:
        enumerated = len(enumerate_actions(args.users, args.dl, args.ul))
        verdict = "MATCH" if enumerated == count else "MISMATCH"
        print(f"{count} {enumerated} {verdict}")
        return 0 if enumerated == count else 1
    print(count)
    return 0


def cmd_demand_rate(args) -> int:
    try:
        rate = demand_rate(
            args.width, args.height, args.depth, args.fps, args.eyes, args.compression
        )
    except ValueError as exc:
        return _fail_usage(str(exc))
    rate_text = _fmt(rate) if rate != int(rate) else str(int(rate))
    print(f"rate_bps: {rate_text}")
    print(f"rate_mbit: {_fmt(to_binary_mbit(rate))}")
    return 0


def cmd_check_esn(args) -> int:
    rng = np.random.default_rng(args.seed)
    table = random_game_table(
        action_counts=(args.actions, args.actions), rng=rng
    )
    report = esn_table_check(
        table,
        seed=args.seed,
        n_slots=args.slots,
        epsilon=args.epsilon,
        n_reservoir=args.reservoir,
    )
    print(f"actions_per_sbs: {args.actions}")
    print(f"slots: {args.slots}")
    print(f"mean_abs_error: {_fmt(report['mean_abs_error'])}")
    print(f"convergence_slot: {report['convergence_slot']}")
    print(f"tolerance: {_fmt(args.tol)}")
    ok = report["mean_abs_error"] <= args.tol
    print(f"verdict: {'pass' if ok else 'fail'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrnetsim",
        description="Wireless VR small-cell allocation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="play one seeded episode")
    p_run.add_argument("config", help="YAML scenario config")
    p_run.add_argument("--policy", default="esn",
                       choices=["esn", "qlearning", "propfair", "exhaustive"])
    p_run.add_argument("--slots", type=int, default=300)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--mode", default="live", choices=["frozen", "live"],
                       help="live redraws fading each slot; frozen fixes one "
                            "realization and tabulates every joint action "
                            "(small scenarios only)")
    p_run.add_argument("--out", default=None, help="write per-slot CSV here")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep a scenario axis")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True,
                         choices=["n_sbs", "n_users", "n_blocks"])
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated integers")
    p_sweep.add_argument("--policies", default="esn", help="comma-separated policies")
    p_sweep.add_argument("--runs", type=int, default=3,
                         help="episodes per (value, policy) grid point")
    p_sweep.add_argument("--slots", type=int, default=300)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--mode", default="live", choices=["frozen", "live"])
    p_sweep.add_argument("--out", default="sweep.csv")
    p_sweep.set_defaults(func=cmd_sweep)

    p_ne = sub.add_parser("verify-ne", help="check a mixed profile on a saved table")
    p_ne.add_argument("table", help="game table JSON")
    p_ne.add_argument("profile", help="mixed profile JSON")
    p_ne.add_argument("--tol", type=float, default=1e-6)
    p_ne.set_defaults(func=cmd_verify_ne)

    p_count = sub.add_parser("count-actions", help="size of one cell's action set")
    p_count.add_argument("--users", type=int, required=True)
    p_count.add_argument("--dl", type=int, required=True)
    p_count.add_argument("--ul", type=int, required=True)
    p_count.add_argument("--enumerate", action="store_true",
                         help="cross-check against explicit enumeration")
    p_count.set_defaults(func=cmd_count_actions)

    p_rate = sub.add_parser("demand-rate", help="raw VR video rate for a format")
    p_rate.add_argument("--width", type=int, default=1920)
    p_rate.add_argument("--height", type=int, default=1080)
    p_rate.add_argument("--depth", type=int, default=16, help="bits per pixel")
    p_rate.add_argument("--fps", type=float, default=60.0)
    p_rate.add_argument("--eyes", type=int, default=2)
    p_rate.add_argument("--compression", type=float, default=150.0)
    p_rate.set_defaults(func=cmd_demand_rate)

    p_esn = sub.add_parser("check-esn", help="ESN prediction check on a random table")
    p_esn.add_argument("--seed", type=int, default=0)
    p_esn.add_argument("--slots", type=int, default=500)
    p_esn.add_argument("--actions", type=int, default=2,
                       help="actions per SBS; self-play prediction error "
                            "grows with the joint space, so large tables "
                            "need a looser --tol")
    p_esn.add_argument("--reservoir", type=int, default=50)
    p_esn.add_argument("--epsilon", type=float, default=0.1)
    p_esn.add_argument("--tol", type=float, default=0.05)
    p_esn.set_defaults(func=cmd_check_esn)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
