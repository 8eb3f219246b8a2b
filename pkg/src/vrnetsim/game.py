"""Allocation actions, mixed strategies and the inter-cell game.

An SBS action fixes both directions at once: the downlink blocks are cut
into contiguous runs (only the run lengths matter, because downlink
interference from other cells does not depend on how they split their
blocks), while the uplink needs the exact block set per user since each
uplink block carries one specific interfering transmitter per cell.

Served users are always listed in ascending user id; position m in an
action's tuples refers to the m-th served user under that ordering.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InfeasibleActionError(ValueError):
    """Raised when the served users cannot all get a block in both directions."""


@dataclass(frozen=True)
class Action:
    """One SBS's joint allocation.

    dl: blocks per served user (positive counts summing to the downlink
        block count); user m's run starts after the first m-1 runs.
    ul: tuple per served user of uplink block ids, sorted, disjoint,
        covering all uplink blocks.
    """

    dl: tuple
    ul: tuple

    def dl_slices(self):
        """(start, stop) downlink block range per served user."""
        out = []
        start = 0
        for count in self.dl:
            out.append((start, start + count))
            start += count
        return out


def validate_action(action: Action, n_served: int, n_dl: int, n_ul: int) -> None:
    """Raise ValueError unless the action is well-formed for this cell."""
    if len(action.dl) != n_served or len(action.ul) != n_served:
        raise ValueError("action must cover every served user")
    if any(c < 1 for c in action.dl):
        raise ValueError("every served user needs at least one downlink block")
    if sum(action.dl) != n_dl:
        raise ValueError("downlink counts must use all blocks")
    flat = [b for blocks in action.ul for b in blocks]
    if any(len(blocks) < 1 for blocks in action.ul):
        raise ValueError("every served user needs at least one uplink block")
    if sorted(flat) != list(range(n_ul)):
        raise ValueError("uplink sets must partition the uplink blocks")


def compositions(total: int, parts: int):
    """Yield tuples of ``parts`` positive ints summing to ``total``,
    ordered by cut positions."""
    if parts < 1 or total < parts:
        return
    for cuts in itertools.combinations(range(1, total), parts - 1):
        bounds = (0,) + cuts + (total,)
        yield tuple(bounds[i + 1] - bounds[i] for i in range(parts))


def block_partitions(n_blocks: int, n_users: int):
    """Yield every split of blocks 0..n_blocks-1 into n_users labelled
    nonempty sets (a sorted tuple of block ids per user)."""
    for owner in itertools.product(range(n_users), repeat=n_blocks):
        if len(set(owner)) != n_users:
            continue
        sets = [[] for _ in range(n_users)]
        for block, who in enumerate(owner):
            sets[who].append(block)
        yield tuple(tuple(s) for s in sets)


def enumerate_actions(n_served: int, n_dl: int, n_ul: int) -> list[Action]:
    """All feasible actions for a cell serving ``n_served`` users.

    Requires 1 <= n_served <= min(n_dl, n_ul); otherwise someone would go
    without a block in one direction.
    """
    if n_served < 1 or n_served > min(n_dl, n_ul):
        raise InfeasibleActionError(
            f"cannot serve {n_served} users with {n_dl} downlink / {n_ul} uplink blocks"
        )
    return [
        Action(dl=dl, ul=ul)
        for dl in compositions(n_dl, n_served)
        for ul in block_partitions(n_ul, n_served)
    ]


def count_actions(n_served: int, n_dl: int, n_ul: int) -> int:
    """Closed-form size of the action set.

    Downlink contributes C(n_dl-1, n_served-1) contiguous splits; the
    uplink term sums, over per-user block counts (m_1..m_v), the product
    of binomials choosing each user's blocks from what is left.
    """
    if n_served < 1 or n_served > min(n_dl, n_ul):
        raise InfeasibleActionError(
            f"cannot serve {n_served} users with {n_dl} downlink / {n_ul} uplink blocks"
        )
    dl_term = math.comb(n_dl - 1, n_served - 1)
    ul_term = 0
    for counts in compositions(n_ul, n_served):
        prod = 1
        left = n_ul
        for m in counts:
            prod *= math.comb(left, m)
            left -= m
        ul_term += prod
    return dl_term * ul_term


# --- mixed strategies -------------------------------------------------------


@dataclass
class MixedStrategy:
    """Probability distribution over one SBS's action indices."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("probs must be a nonempty vector")
        if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        self.probs = np.clip(p, 0.0, 1.0)

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.probs.size, p=self.probs))

    def argmax(self) -> int:
        """Most likely action index; ties go to the lowest index."""
        return int(np.argmax(self.probs))


def uniform_strategy(n_actions: int) -> MixedStrategy:
    return MixedStrategy(np.full(n_actions, 1.0 / n_actions))


def epsilon_greedy(values: np.ndarray, epsilon: float) -> MixedStrategy:
    """Greedy-with-exploration distribution over action indices.

    The argmax (lowest index on ties) gets 1 - epsilon + epsilon/n, every
    other action epsilon/n.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("values must be a nonempty vector")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    n = values.size
    probs = np.full(n, epsilon / n)
    probs[int(np.argmax(values))] += 1.0 - epsilon
    return MixedStrategy(probs)


def worst_case_probability(epsilon: float, action_counts) -> float:
    """Lower bound on the chance every SBS plays its greedy action:
    prod_j (1 - epsilon/|A_j|)^(|A_j| - 1)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    out = 1.0
    for n in action_counts:
        if n < 1:
            raise ValueError("action counts must be >= 1")
        out *= (1.0 - epsilon / n) ** (n - 1)
    return out


# --- frozen payoff table ----------------------------------------------------


@dataclass
class GameTable:
    """Per-player utilities for every joint action on one frozen realization.

    utilities has shape (n_players, |A_1|, ..., |A_n|); axis p+1 indexes
    player p's action.  sbs_ids maps player index back to the SBS id in
    the network state.
    """

    sbs_ids: tuple
    actions: tuple  # per player: tuple[Action, ...]
    utilities: np.ndarray

    def __post_init__(self):
        counts = self.action_counts()
        expect = (len(self.sbs_ids),) + counts
        if self.utilities.shape != expect:
            raise ValueError(
                f"utilities shape {self.utilities.shape} != expected {expect}"
            )
        if not np.all(np.isfinite(self.utilities)) or np.any(self.utilities < 0.0):
            raise ValueError("utilities must be finite and nonnegative")
        self._index = [
            {action: i for i, action in enumerate(acts)} for acts in self.actions
        ]

    def n_players(self) -> int:
        return len(self.sbs_ids)

    def action_counts(self) -> tuple:
        return tuple(len(acts) for acts in self.actions)

    def n_joint(self) -> int:
        return int(np.prod(self.action_counts()))

    def utility(self, player: int, joint) -> float:
        return float(self.utilities[(player,) + tuple(joint)])

    def joint_utilities(self, joint) -> np.ndarray:
        return self.utilities[(slice(None),) + tuple(joint)].copy()

    def action_index(self, player: int, action: Action) -> int:
        return self._index[player][action]


def expected_utility(
    table: GameTable, profile, player: int, action_idx: int
) -> float:
    """Player's expected utility for one of its actions against the
    opponents' mixed strategies."""
    arr = np.take(table.utilities[player], action_idx, axis=player)
    for k in sorted(range(table.n_players()), reverse=True):
        if k == player:
            continue
        axis = k if k < player else k - 1
        arr = np.tensordot(arr, profile[k].probs, axes=([axis], [0]))
    return float(arr)


def average_utility(table: GameTable, profile, player: int) -> float:
    """Player's utility averaged over the full joint mixed profile."""
    arr = table.utilities[player]
    for k in reversed(range(table.n_players())):
        arr = np.tensordot(arr, profile[k].probs, axes=([arr.ndim - 1], [0]))
    return float(arr)


def verify_mixed_ne(table: GameTable, profile, tol: float = 1e-6):
    """Check the profile for mixed Nash equilibrium by pure deviations.

    Returns (is_ne, max_regret) where max_regret is the largest gain any
    single player gets from its best pure deviation.
    """
    if len(profile) != table.n_players():
        raise ValueError("profile must cover every player")
    for strat, count in zip(profile, table.action_counts()):
        if strat.probs.size != count:
            raise ValueError("strategy length must match the action count")
    max_regret = 0.0
    for p in range(table.n_players()):
        avg = average_utility(table, profile, p)
        best = max(
            expected_utility(table, profile, p, a)
            for a in range(table.action_counts()[p])
        )
        max_regret = max(max_regret, best - avg)
    return max_regret <= tol, max_regret


# --- (de)serialization -------------------------------------------------------


def _action_to_json(action: Action) -> dict:
    return {"dl": list(action.dl), "ul": [list(b) for b in action.ul]}


def _action_from_json(obj: dict) -> Action:
    return Action(
        dl=tuple(int(c) for c in obj["dl"]),
        ul=tuple(tuple(int(b) for b in blocks) for blocks in obj["ul"]),
    )


def save_table(table: GameTable, path) -> None:
    payload = {
        "sbs_ids": list(table.sbs_ids),
        "actions": [[_action_to_json(a) for a in acts] for acts in table.actions],
        "utilities": table.utilities.tolist(),
    }
    Path(path).write_text(json.dumps(payload))


def load_table(path) -> GameTable:
    payload = json.loads(Path(path).read_text())
    actions = tuple(
        tuple(_action_from_json(a) for a in acts) for acts in payload["actions"]
    )
    return GameTable(
        sbs_ids=tuple(int(s) for s in payload["sbs_ids"]),
        actions=actions,
        utilities=np.asarray(payload["utilities"], dtype=float),
    )


def save_profile(profile, path) -> None:
    Path(path).write_text(
        json.dumps({"probs": [list(map(float, s.probs)) for s in profile]})
    )


def load_profile(path) -> list[MixedStrategy]:
    payload = json.loads(Path(path).read_text())
    return [MixedStrategy(np.asarray(p, dtype=float)) for p in payload["probs"]]
