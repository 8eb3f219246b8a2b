"""Run harness: seeded episodes, convergence metrics, parameter sweeps.

An episode fixes a scenario realization from a single integer seed, picks
which users each cell actually serves (nearest covering SBS, capped at
the per-direction block count by standalone utility), then plays the
requested policy for a number of slots.  Frozen mode builds the payoff
table once and lets learners sample from it; live mode redraws fading and
advances headset motion every slot.

Every stream of randomness is derived from the episode seed through
named SeedSequence children, so identical inputs give identical outputs
byte for byte, including the CSV files.
"""

from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import dataclass

import numpy as np

from .channel import place_scenario, redraw_fading
from .config import ScenarioConfig
from .evaluate import QosEvaluator, build_game_table, standalone_utility
from .game import GameTable, MixedStrategy
from .learners import (
    EsnPolicy,
    EvaluatorEnv,
    QLearningPolicy,
    TableEnv,
    exhaustive_optimal,
    proportional_fair_allocate,
    strategy_convergence_slot,
)
from .vrqos import QosBreakdown, SyntheticTrajectory, TrackingEncoding

POLICIES = ("esn", "qlearning", "propfair", "exhaustive")


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed from a master seed and labelling parts."""
    text = "|".join([str(master)] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def cap_association(state, poses, rng: np.random.Generator) -> np.ndarray:
    """Enforce per-cell capacity on the nearest-covering association.

    A cell can serve at most min(downlink, uplink) block-count users; when
    more are covered, the cell keeps the ones with the highest standalone
    utility (ties to the lower user id) and the rest go unserved.
    """
    cfg = state.cfg
    capacity = min(cfg.n_dl_blocks, cfg.n_ul_blocks)
    association = state.association.copy()
    for sbs in sorted(set(int(s) for s in association if s >= 0)):
        candidates = [int(i) for i in np.flatnonzero(association == sbs)]
        if len(candidates) <= capacity:
            continue
        scored = [
            (-standalone_utility(state, i, sbs, poses[i], rng), i) for i in candidates
        ]
        scored.sort()
        for _, i in scored[capacity:]:
            association[i] = -1
    return association


def convergence_iterations(trace, window: int = 20, rel_tol: float = 0.05) -> int:
    """First slot (1-based) after which every windowed mean stays within
    rel_tol of the final windowed mean.

    A constant trace converges at slot 1; a trace that jumps to its final
    level at slot k converges at k (provided the jump exceeds the
    tolerance).
    """
    trace = np.asarray(trace, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if rel_tol <= 0.0:
        raise ValueError("rel_tol must be positive")
    if trace.ndim != 1 or trace.size < window:
        raise ValueError("trace must hold at least one full window")
    kernel = np.ones(window) / window
    means = np.convolve(trace, kernel, mode="valid")
    final = means[-1]
    threshold = rel_tol * max(abs(final), 1e-12)
    bad = np.flatnonzero(np.abs(means - final) > threshold)
    if bad.size == 0:
        return 1
    return int(bad[-1]) + 2  # first window start past the last violation, 1-based


def delay_cdf(metrics, grid) -> np.ndarray:
    """Empirical CDF of an episode's serviced-user delays on the grid.

    Accepts a Metrics instance (uses its delay samples) or a raw array of
    delay samples.
    """
    samples = getattr(metrics, "delay_samples", metrics)
    samples = np.sort(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("need at least one delay sample")
    grid = np.asarray(grid, dtype=float)
    return np.searchsorted(samples, grid, side="right") / samples.size


@dataclass
class Metrics:
    """Everything an episode reports."""

    policy: str
    seed: int
    mode: str
    sbs_ids: tuple
    n_slots: int
    utility_trace: np.ndarray          # (n_slots, n_active)
    greedy_trace: list                 # per slot: greedy joint index tuple
    convergence_slot: int
    final_joint_idx: tuple
    final_total_utility: float
    final_strategies: list             # MixedStrategy per active cell
    qos_final: list                    # QosBreakdown per served user
    delay_samples: np.ndarray
    serviced_fraction: float
    wall_time_s: float
    table: GameTable | None = None

    @property
    def total_trace(self) -> np.ndarray:
        return self.utility_trace.sum(axis=1)

    @property
    def mean_delay_s(self) -> float:
        if self.delay_samples.size == 0:
            return float("nan")
        return float(self.delay_samples.mean())


def _empty_metrics(policy, seed, mode, n_slots, wall_start) -> Metrics:
    return Metrics(
        policy=policy,
        seed=seed,
        mode=mode,
        sbs_ids=(),
        n_slots=n_slots,
        utility_trace=np.zeros((n_slots, 0)),
        greedy_trace=[()] * n_slots,
        convergence_slot=1,
        final_joint_idx=(),
        final_total_utility=0.0,
        final_strategies=[],
        qos_final=[],
        delay_samples=np.zeros(0),
        serviced_fraction=0.0,
        wall_time_s=time.perf_counter() - wall_start,
    )


def run_episode(
    cfg: ScenarioConfig,
    policy: str = "esn",
    t_slots: int = 300,
    seed: int = 0,
    mode: str = "frozen",
    enc: TrackingEncoding | None = None,
    policy_kwargs: dict | None = None,
) -> Metrics:
    """Play one seeded episode and report its metrics.

    mode="frozen": one realization, payoff table built up front, learner
    feedback comes from table lookups.  mode="live": fading and poses are
    redrawn every slot and feedback is a fresh evaluation.  The exhaustive
    policy requires frozen mode.  t_slots=0 returns empty traces.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; pick one of {POLICIES}")
    if mode not in ("frozen", "live"):
        raise ValueError("mode must be 'frozen' or 'live'")
    if policy == "exhaustive" and mode != "frozen":
        raise ValueError("exhaustive search needs a frozen table")
    if t_slots < 0:
        raise ValueError("t_slots must be >= 0")
    policy_kwargs = dict(policy_kwargs or {})
    wall_start = time.perf_counter()

    ss = np.random.SeedSequence(seed)
    (ss_place, ss_assoc, ss_table, ss_policy, ss_play, ss_traj, ss_final) = ss.spawn(7)

    state = place_scenario(cfg, np.random.default_rng(ss_place))
    walkers = [
        SyntheticTrajectory(np.random.default_rng(child))
        for child in ss_traj.spawn(cfg.n_users)
    ]
    poses = [w.step() for w in walkers]
    state.association = cap_association(state, poses, np.random.default_rng(ss_assoc))
    if not state.active_sbs():
        return _empty_metrics(policy, seed, mode, t_slots, wall_start)

    evaluator = QosEvaluator(state, poses, enc)
    counts = evaluator.action_counts()
    serviced = sum(len(evaluator.served[j]) for j in evaluator.active)
    serviced_fraction = serviced / cfg.n_users if cfg.n_users else 1.0

    if t_slots == 0:
        return Metrics(
            policy=policy,
            seed=seed,
            mode=mode,
            sbs_ids=tuple(evaluator.active),
            n_slots=0,
            utility_trace=np.zeros((0, len(evaluator.active))),
            greedy_trace=[],
            convergence_slot=0,
            final_joint_idx=(),
            final_total_utility=0.0,
            final_strategies=[],
            qos_final=[],
            delay_samples=np.zeros(0),
            serviced_fraction=serviced_fraction,
            wall_time_s=time.perf_counter() - wall_start,
        )

    table = None
    if mode == "frozen":
        table_seed = derive_seed(seed, "table")
        table = build_game_table(evaluator, table_seed)
        env = TableEnv(table)
    else:
        env = EvaluatorEnv(evaluator)

    rng_policy = np.random.default_rng(ss_policy)
    rng_play = np.random.default_rng(ss_play)
    learner = None
    if policy == "esn":
        learner = EsnPolicy(counts, rng_policy, **policy_kwargs)
    elif policy == "qlearning":
        learner = QLearningPolicy(counts, rng_policy, **policy_kwargs)

    def static_joint(ev) -> tuple:
        if policy == "propfair":
            return tuple(
                ev.actions(j).index(proportional_fair_allocate(ev, j))
                for j in ev.active
            )
        joint, _ = exhaustive_optimal(table)
        return joint

    utility_trace = np.zeros((t_slots, len(evaluator.active)))
    greedy_trace: list[tuple] = []
    final_strategies: list[MixedStrategy] = []

    for t in range(t_slots):
        if mode == "live" and t > 0:
            state_t = redraw_fading(state, rng_play)
            poses = [w.step() for w in walkers]
            evaluator = QosEvaluator(state_t, poses, enc)
            env = EvaluatorEnv(evaluator)
        if learner is not None:
            rec = learner.play_slot(env, rng_play)
            utility_trace[t] = rec.utilities
            greedy_trace.append(rec.greedy_idx)
        else:
            joint = static_joint(evaluator)
            utility_trace[t] = env.evaluate(joint, rng_play)
            greedy_trace.append(joint)

    final_joint = greedy_trace[-1]
    if learner is not None:
        final_strategies = learner.final_strategies()
        convergence_slot = strategy_convergence_slot(greedy_trace)
    else:
        convergence_slot = 1

    final_actions = tuple(
        evaluator.actions(j)[final_joint[idx]]
        for idx, j in enumerate(evaluator.active)
    )
    _, qos_final = evaluator.eval_joint(
        final_actions, np.random.default_rng(ss_final), collect=True
    )
    delay_samples = np.array([q.total_delay_s for q in qos_final])
    if mode == "frozen":
        final_total = float(table.joint_utilities(final_joint).sum())
    else:
        final_total = float(sum(q.utility for q in qos_final))

    return Metrics(
        policy=policy,
        seed=seed,
        mode=mode,
        sbs_ids=tuple(evaluator.active),
        n_slots=t_slots,
        utility_trace=utility_trace,
        greedy_trace=greedy_trace,
        convergence_slot=convergence_slot,
        final_joint_idx=tuple(final_joint),
        final_total_utility=final_total,
        final_strategies=final_strategies,
        qos_final=qos_final,
        delay_samples=delay_samples,
        serviced_fraction=serviced_fraction,
        wall_time_s=time.perf_counter() - wall_start,
        table=table,
    )


# --- sweeps -------------------------------------------------------------------


SWEEP_AXES = ("n_sbs", "n_users", "n_blocks")


@dataclass
class SweepSpec:
    """One swept scenario axis with repeated runs per grid point.

    axis is n_sbs, n_users or n_blocks; n_blocks sets the downlink and
    uplink block counts together.  base holds every non-swept parameter.
    """

    axis: str
    values: list
    runs_per_point: int
    base: ScenarioConfig

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.runs_per_point < 1:
            raise ValueError("runs_per_point must be >= 1")


def _apply_axis(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "n_blocks":
        return cfg.replace(n_dl_blocks=int(value), n_ul_blocks=int(value))
    return cfg.replace(**{axis: int(value)})


def run_sweep(
    spec: SweepSpec,
    policies,
    t_slots: int = 300,
    master_seed: int = 0,
    mode: str = "frozen",
):
    """Run the (axis value x policy x run) grid; return (rows, aggregates).

    Each cell gets its own seed derived from the master seed and the
    cell's labels, so adding runs or reordering the grid never changes
    existing cells.
    """
    policies = list(policies)
    for p in policies:
        if p not in POLICIES:
            raise ValueError(f"unknown policy {p!r}; pick from {POLICIES}")
    rows = []
    for value in spec.values:
        cfg = _apply_axis(spec.base, spec.axis, value)
        for policy in policies:
            for run in range(spec.runs_per_point):
                seed = derive_seed(master_seed, spec.axis, value, policy, run)
                metrics = run_episode(
                    cfg, policy=policy, t_slots=t_slots, seed=seed, mode=mode
                )
                rows.append(
                    {
                        "axis_value": value,
                        "policy": policy,
                        "run": run,
                        "seed": seed,
                        "total_utility": metrics.final_total_utility,
                        "mean_delay_s": metrics.mean_delay_s,
                        "convergence_slot": metrics.convergence_slot,
                        "serviced_fraction": metrics.serviced_fraction,
                    }
                )
    aggregates = []
    for value in spec.values:
        for policy in policies:
            cell = [
                r for r in rows if r["axis_value"] == value and r["policy"] == policy
            ]
            utils = np.array([r["total_utility"] for r in cell])
            delays = np.array([r["mean_delay_s"] for r in cell])
            aggregates.append(
                {
                    "axis_value": value,
                    "policy": policy,
                    "mean_total_utility": float(utils.mean()),
                    "std_total_utility": float(utils.std()),
                    "mean_delay_s": float(np.nanmean(delays)) if np.any(
                        ~np.isnan(delays)
                    ) else float("nan"),
                    "median_convergence_slot": float(
                        np.median([r["convergence_slot"] for r in cell])
                    ),
                    "mean_serviced_fraction": float(
                        np.mean([r["serviced_fraction"] for r in cell])
                    ),
                }
            )
    return rows, aggregates


# --- CSV ------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


SWEEP_HEADER = (
    "axis_value",
    "policy",
    "run",
    "seed",
    "total_utility",
    "mean_delay_s",
    "convergence_slot",
    "serviced_fraction",
)


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[key]) for key in SWEEP_HEADER])


def write_episode_csv(metrics: Metrics, path) -> None:
    """Per-slot per-cell utility trace plus the greedy joint index."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("slot", "sbs", "utility", "greedy_action"))
        for t in range(metrics.n_slots):
            for idx, sbs in enumerate(metrics.sbs_ids):
                writer.writerow(
                    (
                        t + 1,
                        sbs,
                        _fmt(float(metrics.utility_trace[t, idx])),
                        metrics.greedy_trace[t][idx],
                    )
                )
