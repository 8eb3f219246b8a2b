"""Allocation policies: ESN self-play, tabular Q-learning, proportional
fair and exhaustive search.

The two learners run the same slot loop: form a distribution over own
actions, broadcast the greedy index, sample, observe the realized cell
utility, update.  They differ only in the value model (ESN readout vs a
Q table).  Proportional fair ignores the game entirely and splits blocks
by demand; exhaustive search maximizes the summed utility over the whole
joint grid of a frozen table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import VR_FRAME_RATE_HZ
from .esn import (
    check_unambiguity,
    init_esn,
    predict,
    robbins_monro_schedule,
    train_step,
    update_reservoir,
)
from .evaluate import QosEvaluator
from .game import Action, GameTable, MixedStrategy, epsilon_greedy, uniform_strategy


class ExhaustiveSearchError(RuntimeError):
    """Joint action grid exceeds the configured cap."""


def strategy_convergence_slot(greedy_trace) -> int:
    """Slot (1-based) from which the greedy joint index never changes
    again, i.e. the start of the trace's final constant run.  A trace
    still flipping at the end reports its last slot; empty traces 0."""
    n = len(greedy_trace)
    if n == 0:
        return 0
    start = n - 1
    while start > 0 and greedy_trace[start - 1] == greedy_trace[start]:
        start -= 1
    return start + 1


# --- utility environments ---------------------------------------------------


class TableEnv:
    """Frozen-table utilities: lookups, no fresh randomness."""

    def __init__(self, table: GameTable):
        self.table = table

    def action_counts(self) -> tuple:
        return self.table.action_counts()

    def joint_actions(self, joint_idx) -> tuple:
        return tuple(self.table.actions[p][i] for p, i in enumerate(joint_idx))

    def evaluate(self, joint_idx, rng) -> np.ndarray:
        return self.table.joint_utilities(joint_idx)


class EvaluatorEnv:
    """Live utilities: every evaluation draws fresh pose corruption."""

    def __init__(self, evaluator: QosEvaluator):
        self.evaluator = evaluator
        self._actions = [evaluator.actions(j) for j in evaluator.active]

    def action_counts(self) -> tuple:
        return tuple(len(a) for a in self._actions)

    def joint_actions(self, joint_idx) -> tuple:
        return tuple(self._actions[p][i] for p, i in enumerate(joint_idx))

    def evaluate(self, joint_idx, rng) -> np.ndarray:
        joint = self.joint_actions(joint_idx)
        return self.evaluator.eval_joint(joint, rng)


@dataclass
class SlotRecord:
    joint_idx: tuple
    utilities: np.ndarray
    greedy_idx: tuple


def _as_env(net):
    """Accept a prebuilt environment, a frozen table, or an evaluator.

    A bare placement cannot price utilities on its own (poses live
    outside it); bind them first with QosEvaluator(state, poses).
    """
    if isinstance(net, (TableEnv, EvaluatorEnv)):
        return net
    if isinstance(net, GameTable):
        return TableEnv(net)
    if isinstance(net, QosEvaluator):
        return EvaluatorEnv(net)
    raise TypeError(
        "net must be a TableEnv, EvaluatorEnv, GameTable or QosEvaluator"
    )


def esn_play_slot(state: "EsnPolicy", net, rng) -> tuple[tuple, np.ndarray]:
    """One slot of ESN self-play: predict, mix, broadcast, act, train.

    Returns the joint action played (one Action per SBS) and the per-SBS
    realized utilities.  ``net`` may be a frozen GameTable, a QosEvaluator
    bound to one realization, or a prebuilt environment.
    """
    env = _as_env(net)
    rec = state.play_slot(env, rng)
    return env.joint_actions(rec.joint_idx), rec.utilities


def q_learning_slot(state: "QLearningPolicy", net, rng) -> tuple[tuple, np.ndarray]:
    """One slot of bandit Q-learning; same contract as esn_play_slot."""
    env = _as_env(net)
    rec = state.play_slot(env, rng)
    return env.joint_actions(rec.joint_idx), rec.utilities


# --- ESN self-play -----------------------------------------------------------


class EsnPolicy:
    """One ESN learner per SBS, trained in self-play.

    Per slot: each SBS predicts its action values at the previous
    broadcast input, forms an epsilon-greedy strategy (uniform on the
    first slot), broadcasts its greedy index, samples an action, observes
    its realized utility, advances the reservoir on the new broadcast
    vector and LMS-trains the played action's readout row.

    Broadcast inputs are (greedy_index + 1) / n_actions per SBS, so the
    input vector is never all-zero and stays in (0, 1].

    Step sizes: with lambda0 set, a constant step is used when the input
    separation test passes on the possible broadcast vectors, otherwise
    the diminishing schedule lambda0/t.  With lambda0=None (default) each
    action uses step 1 / (k * ||regressor||^2) where k counts its visits
    under the current broadcast vector, so the readout tracks the sample
    mean of that action's utilities in the current regime.  Counts are
    kept per broadcast vector: a shifted greedy profile moves the
    reservoir to a new code and changes the opponents' play, so samples
    from different regimes must not be averaged together, but when play
    cycles back to an earlier profile its statistics resume instead of
    restarting.  The per-visit steps satisfy the diminishing-step
    summability conditions within each regime.
    """

    name = "esn"

    def __init__(
        self,
        action_counts,
        rng: np.random.Generator,
        n_reservoir: int = 50,
        epsilon: float = 0.1,
        in_scale: float | None = None,
        res_scale: float = 0.9,
        lambda0: float | None = None,
    ):
        self.action_counts = tuple(action_counts)
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self.epsilon = epsilon
        n = len(self.action_counts)
        if in_scale is None:
            # saturating inputs: rows this large drive most reservoir
            # units to +-1, giving distinct sign patterns for most pairs
            # of broadcast vectors (nearby or proportional profiles can
            # share a pattern; the raw x part of the regressor is what
            # still separates those)
            in_scale = 4.0 * max(self.action_counts) * n
        self.esns = []
        for idx, count in enumerate(self.action_counts):
            self.esns.append(
                init_esn(n_reservoir, n, count, rng, in_scale, res_scale)
            )
        self.lambda0 = lambda0
        self._constant_ok = []
        if lambda0 is not None:
            candidates = self._broadcast_candidates()
            self._constant_ok = [
                check_unambiguity(esn.w_in, candidates) for esn in self.esns
            ]
        self._code_counts: dict = {}
        self.train_counts = self._counts_for(None)
        self.strategies = [uniform_strategy(c) for c in self.action_counts]
        self.last_x: np.ndarray | None = None
        self.t = 0

    def _counts_for(self, greedy) -> list:
        """Per-action visit counts under one broadcast profile."""
        counts = self._code_counts.get(greedy)
        if counts is None:
            counts = [np.zeros(c, dtype=int) for c in self.action_counts]
            self._code_counts[greedy] = counts
        return counts

    def _broadcast_candidates(self, cap: int = 256) -> list[np.ndarray]:
        """Sample of broadcast vectors the policy can emit (full grid when
        small), for the input separation test."""
        total = 1
        for c in self.action_counts:
            total *= c
        base = np.array([(1.0) / c for c in self.action_counts])
        if total <= cap:
            import itertools

            grid = itertools.product(*[range(c) for c in self.action_counts])
            return [
                np.array(
                    [(g + 1) / c for g, c in zip(joint, self.action_counts)]
                )
                for joint in grid
            ]
        return [base, np.ones(len(self.action_counts))]

    def play_slot(self, env, rng: np.random.Generator) -> SlotRecord:
        self.t += 1
        if self.t == 1:
            self.strategies = [uniform_strategy(c) for c in self.action_counts]
        else:
            self.strategies = [
                epsilon_greedy(predict(esn, self.last_x), self.epsilon)
                for esn in self.esns
            ]
        greedy = tuple(s.argmax() for s in self.strategies)
        x = np.array(
            [(g + 1) / c for g, c in zip(greedy, self.action_counts)]
        )
        joint_idx = tuple(s.sample(rng) for s in self.strategies)
        utilities = env.evaluate(joint_idx, rng)
        self.train_counts = self._counts_for(greedy)
        for idx, esn in enumerate(self.esns):
            update_reservoir(esn, x)
            action = joint_idx[idx]
            self.train_counts[idx][action] += 1
            z_sq = float(esn.mu @ esn.mu + x @ x)
            if self.lambda0 is None:
                step = 1.0 / (self.train_counts[idx][action] * z_sq)
            elif self._constant_ok[idx]:
                step = self.lambda0
            else:
                step = robbins_monro_schedule(self.t, self.lambda0)
            train_step(esn, action, float(utilities[idx]), step)
        self.last_x = x
        return SlotRecord(joint_idx=joint_idx, utilities=utilities, greedy_idx=greedy)

    def predicted_values(self, player: int) -> np.ndarray:
        """Current action-value readout at the last broadcast input."""
        if self.last_x is None:
            raise ValueError("no slot has been played yet")
        return predict(self.esns[player], self.last_x)

    def final_strategies(self) -> list[MixedStrategy]:
        return list(self.strategies)


# --- tabular Q-learning -------------------------------------------------------


class QLearningPolicy:
    """Stateless bandit Q-learning per SBS with epsilon-greedy exploration."""

    name = "qlearning"

    def __init__(self, action_counts, rng=None, alpha: float = 0.1, epsilon: float = 0.1):
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self.action_counts = tuple(action_counts)
        self.alpha = alpha
        self.epsilon = epsilon
        self.q = [np.zeros(c) for c in self.action_counts]
        self.strategies = [uniform_strategy(c) for c in self.action_counts]
        self.t = 0

    def play_slot(self, env, rng: np.random.Generator) -> SlotRecord:
        self.t += 1
        if self.t == 1:
            self.strategies = [uniform_strategy(c) for c in self.action_counts]
        else:
            self.strategies = [
                epsilon_greedy(q, self.epsilon) for q in self.q
            ]
        greedy = tuple(s.argmax() for s in self.strategies)
        joint_idx = tuple(s.sample(rng) for s in self.strategies)
        utilities = env.evaluate(joint_idx, rng)
        for idx, q in enumerate(self.q):
            a = joint_idx[idx]
            q[a] += self.alpha * (float(utilities[idx]) - q[a])
        return SlotRecord(joint_idx=joint_idx, utilities=utilities, greedy_idx=greedy)

    def final_strategies(self) -> list[MixedStrategy]:
        return list(self.strategies)


# --- proportional fair ---------------------------------------------------------


def _largest_remainder(demands, total: int) -> list[int]:
    """Split ``total`` blocks by demand: one each, the rest proportionally
    with largest-remainder rounding (ties to the lowest index)."""
    v = len(demands)
    if total < v:
        raise ValueError("not enough blocks for one each")
    counts = [1] * v
    extra = total - v
    if extra == 0:
        return counts
    demands = np.asarray(demands, dtype=float)
    weight = demands.sum()
    if weight <= 0.0:
        quotas = np.full(v, extra / v)
    else:
        quotas = extra * demands / weight
    base = np.floor(quotas).astype(int)
    leftover = extra - int(base.sum())
    remainders = quotas - base
    order = np.lexsort((np.arange(v), -remainders))
    for idx in order[:leftover]:
        base[idx] += 1
    return [c + b for c, b in zip(counts, base)]


def proportional_fair_allocate(evaluator: QosEvaluator, sbs: int) -> Action:
    """Demand-proportional split of both directions for one cell.

    Per-user demand is the blocks needed to carry its payload rate (image
    downlink, tracking uplink) at the user's mean per-block rate, ignoring
    in-cell competition and uplink interference.  Downlink counts and
    uplink counts use largest-remainder rounding; concrete uplink blocks
    go greedily, highest demand first, each user taking its best remaining
    blocks by interference-free SINR.
    """
    cfg = evaluator.cfg
    served = evaluator.served[sbs]
    v = len(served)

    dl_target = cfg.image_bits * VR_FRAME_RATE_HZ
    dl_demand = []
    for i in served:
        mean_rate = float(evaluator.rate_dl[i].mean())
        dl_demand.append(dl_target / mean_rate if mean_rate > 0.0 else float(cfg.n_dl_blocks))
    dl_counts = _largest_remainder(dl_demand, cfg.n_dl_blocks)

    ul_target = cfg.tracking_bits * VR_FRAME_RATE_HZ
    rate_ul0 = {}
    ul_demand = []
    for i in served:
        sinr0 = evaluator._rx_ul[i, sbs, :] / cfg.noise_w
        rate0 = cfg.block_bandwidth_hz * np.log2(1.0 + sinr0)
        rate_ul0[i] = rate0
        mean_rate = float(rate0.mean())
        ul_demand.append(ul_target / mean_rate if mean_rate > 0.0 else float(cfg.n_ul_blocks))
    ul_counts = _largest_remainder(ul_demand, cfg.n_ul_blocks)

    pool = set(range(cfg.n_ul_blocks))
    ul_sets: list[tuple] = [()] * v
    order = sorted(range(v), key=lambda r: (-ul_demand[r], r))
    for r in order:
        rates = rate_ul0[served[r]]
        ranked = sorted(pool, key=lambda k: (-rates[k], k))
        take = ranked[: ul_counts[r]]
        pool -= set(take)
        ul_sets[r] = tuple(sorted(take))

    return Action(dl=tuple(dl_counts), ul=tuple(ul_sets))


# --- exhaustive search ----------------------------------------------------------


def exhaustive_optimal(table: GameTable, cap: int = 1_000_000):
    """Joint index maximizing the summed utility on a frozen table.

    Ties resolve to the lowest joint index in C order.  Refuses tables
    larger than ``cap`` joint actions.
    """
    if table.n_joint() > cap:
        raise ExhaustiveSearchError(
            f"{table.n_joint()} joint actions exceed the cap of {cap}"
        )
    totals = table.utilities.sum(axis=0)
    flat = int(np.argmax(totals))
    joint = np.unravel_index(flat, totals.shape)
    return tuple(int(a) for a in joint), float(totals[joint])


# --- self-contained ESN check -----------------------------------------------


def random_game_table(action_counts, rng: np.random.Generator) -> GameTable:
    """Synthetic frozen game with i.i.d. uniform [0, 1] utilities.

    The actions are placeholders (the table never touches a network); only
    the payoff array matters.
    """
    counts = tuple(action_counts)
    utilities = rng.random((len(counts),) + counts)
    actions = tuple(
        tuple(Action(dl=(a + 1,), ul=((a,),)) for a in range(c)) for c in counts
    )
    return GameTable(
        sbs_ids=tuple(range(len(counts))), actions=actions, utilities=utilities
    )


def esn_table_check(
    table: GameTable,
    seed: int = 0,
    n_slots: int = 500,
    epsilon: float = 0.1,
    n_reservoir: int = 50,
    lambda0: float | None = None,
) -> dict:
    """Train ESN learners on a frozen table and score their predictions.

    After ``n_slots`` of self-play, compares each learner's readout
    against the table's expected utilities under the final joint mixed
    profile.  Returns the mean absolute error over all (player, action)
    pairs plus the greedy-stability slot.
    """
    from .game import expected_utility

    env = TableEnv(table)
    policy = EsnPolicy(
        table.action_counts(),
        np.random.default_rng([seed, 1]),
        n_reservoir=n_reservoir,
        epsilon=epsilon,
        lambda0=lambda0,
    )
    rng_play = np.random.default_rng([seed, 2])
    greedy_trace = []
    for _ in range(n_slots):
        rec = policy.play_slot(env, rng_play)
        greedy_trace.append(rec.greedy_idx)

    profile = policy.final_strategies()
    errors = []
    per_player = []
    for p in range(table.n_players()):
        predicted = policy.predicted_values(p)
        expected = np.array(
            [
                expected_utility(table, profile, p, a)
                for a in range(table.action_counts()[p])
            ]
        )
        err = np.abs(predicted - expected)
        errors.extend(err.tolist())
        per_player.append(
            {"predicted": predicted, "expected": expected, "abs_error": err}
        )
    return {
        "mean_abs_error": float(np.mean(errors)),
        "max_abs_error": float(np.max(errors)),
        "per_player": per_player,
        "profile": profile,
        "convergence_slot": strategy_convergence_slot(greedy_trace),
        "greedy_trace": greedy_trace,
    }
