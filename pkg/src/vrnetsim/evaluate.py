"""Joint-action evaluation: from allocations to per-SBS utilities.

QosEvaluator freezes one network realization (placement, fading, one pose
per user) and prices joint actions on it.  Downlink SINR is precomputed
once because cross-cell downlink interference does not depend on how the
other cells split their blocks; uplink SINR is assembled per joint action
from the one transmitter each cell schedules per block.

Randomness: each evaluation call consumes the supplied generator only for
pose corruption, one draw per served user, users visited in ascending id
within a cell.  eval_joint gives every cell an independent child generator
(rng.spawn) so a cell's utilities can be recomputed in isolation.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .channel import MIN_DISTANCE_M
from .config import ScenarioConfig
from .game import Action, GameTable, enumerate_actions
from .vrqos import (
    QosBreakdown,
    TrackingEncoding,
    TrackingVector,
    correction_bits,
    corrupt_tracking,
    delay_utility,
    processing_delay,
    total_delay,
    total_utility,
    tracking_accuracy,
    transmission_delay,
    worst_case_error,
)


def _power_gains(cfg: ScenarioConfig, distances, fading, tx_power_w):
    """tx_power * fading * clamped-distance^-beta, shaped like fading."""
    d = np.maximum(distances, MIN_DISTANCE_M)
    return tx_power_w * fading * (d ** -cfg.pathloss_exp)[:, :, None]


class QosEvaluator:
    """Utility oracle for one frozen realization.

    poses: one TrackingVector per user (the slot's ground truth).
    Cells are the SBSs serving at least one user; ``active`` lists them in
    ascending id and joint actions are tuples aligned with that list.
    """

    def __init__(self, state, poses, enc: TrackingEncoding | None = None):
        cfg = state.cfg
        if len(poses) != cfg.n_users:
            raise ValueError("need one pose per user")
        self.state = state
        self.cfg = cfg
        self.poses = list(poses)
        self.enc = enc if enc is not None else TrackingEncoding()
        self.active = state.active_sbs()
        self.served = {j: state.served_users(j) for j in self.active}
        self._cell_of = {j: idx for idx, j in enumerate(self.active)}

        # received power per (user, sbs, block), both directions
        self._rx_dl = _power_gains(cfg, state.distances, state.fading_dl, cfg.p_sbs_w)
        self._rx_ul = _power_gains(cfg, state.distances, state.fading_ul, cfg.p_user_w)

        # downlink SINR and per-block rate for every served user
        self.sinr_dl = {}
        self.rate_dl = {}
        self.min_dl_rate = {}
        for j in self.active:
            others = [l for l in self.active if l != j]
            v = len(self.served[j])
            for rank, i in enumerate(self.served[j]):
                interf = self._rx_dl[i, others, :].sum(axis=0) if others else 0.0
                sinr = self._rx_dl[i, j, :] / (cfg.noise_w + interf)
                rate = cfg.block_bandwidth_hz * np.log2(1.0 + sinr)
                self.sinr_dl[i] = sinr
                self.rate_dl[i] = rate
                # slowest downlink run this rank can be handed over all
                # contiguous splits: a lone user always gets the whole
                # band, edge ranks are pinned to the edge blocks, middle
                # ranks can land on any single block that leaves room for
                # the others
                if v == 1:
                    worst = rate.sum()
                elif rank == 0:
                    worst = rate[0]
                elif rank == v - 1:
                    worst = rate[-1]
                else:
                    worst = rate[rank : cfg.n_dl_blocks - (v - rank - 1)].min()
                self.min_dl_rate[i] = float(worst)

        self.worst_err = {
            i: worst_case_error(self.poses[i], self.enc)
            for j in self.active
            for i in self.served[j]
        }
        self._actions = {}

    # --- action sets -------------------------------------------------------

    def actions(self, sbs: int) -> list[Action]:
        if sbs not in self._actions:
            self._actions[sbs] = enumerate_actions(
                len(self.served[sbs]), self.cfg.n_dl_blocks, self.cfg.n_ul_blocks
            )
        return self._actions[sbs]

    def action_counts(self) -> tuple:
        return tuple(len(self.actions(j)) for j in self.active)

    # --- uplink interference -------------------------------------------------

    def _ul_interference(self, joint) -> np.ndarray:
        """Interference power at each active cell per uplink block.

        joint: one Action per active cell, aligned with self.active.
        Every cell schedules exactly one transmitter per uplink block, so
        cell j hears the sum over other cells of that transmitter's power
        received at j.
        """
        n = len(self.active)
        s_u = self.cfg.n_ul_blocks
        owners = np.zeros((n, s_u), dtype=int)
        for idx, action in enumerate(joint):
            served = self.served[self.active[idx]]
            for pos, blocks in enumerate(action.ul):
                for k in blocks:
                    owners[idx, k] = served[pos]
        # received[l, j, k]: cell l's block-k transmitter heard at cell j
        cols = np.asarray(self.active)
        received = self._rx_ul[owners[:, None, :], cols[None, :, None],
                               np.arange(s_u)[None, None, :]]
        total = received.sum(axis=0)
        own = received[np.arange(n), np.arange(n), :]
        return total - own

    # --- utility pipeline ----------------------------------------------------

    def _user_qos(
        self, user, rank, n_served, sbs, action, ul_interf, rng
    ) -> QosBreakdown:
        cfg = self.cfg
        start, stop = action.dl_slices()[rank]
        dl_rate = float(self.rate_dl[user][start:stop].sum())

        blocks = action.ul[rank]
        sinr_ul = np.array(
            [
                self._rx_ul[user, sbs, k] / (cfg.noise_w + ul_interf[k])
                for k in blocks
            ]
        )
        ul_rate = float(
            (cfg.block_bandwidth_hz * np.log2(1.0 + sinr_ul)).sum()
        )

        pose = self.poses[user]
        received = corrupt_tracking(pose, sinr_ul, blocks, self.enc, rng)
        worst = self.worst_err[user]
        accuracy = tracking_accuracy(received, pose, worst)
        upsilon = correction_bits(received, pose, worst, cfg.image_bits)
        proc = processing_delay(upsilon, cfg.compute_bits, n_served)

        dl_delay = cfg.image_bits / dl_rate
        ul_delay = cfg.tracking_bits / ul_rate
        tx = transmission_delay(cfg.image_bits, cfg.tracking_bits, dl_rate, ul_rate)
        d_total = total_delay(tx, proc)
        worst_tx = transmission_delay(
            cfg.image_bits, cfg.tracking_bits, self.min_dl_rate[user], ul_rate
        )
        d_max = total_delay(worst_tx, proc)
        score = delay_utility(d_total, d_max, cfg.gamma_d_s)
        util = total_utility(score, accuracy)
        return QosBreakdown(
            user=user,
            sbs=sbs,
            dl_rate_bps=dl_rate,
            ul_rate_bps=ul_rate,
            accuracy=accuracy,
            dl_delay_s=dl_delay,
            ul_delay_s=ul_delay,
            tx_delay_s=tx,
            proc_delay_s=proc,
            total_delay_s=d_total,
            max_delay_s=d_max,
            delay_score=score,
            utility=util,
        )

    def cell_qos(self, sbs: int, joint, rng) -> list[QosBreakdown]:
        """Per-user QoS of one cell under the joint action.

        Consumes rng once per served user, ascending user id.
        """
        idx = self._cell_of[sbs]
        action = joint[idx]
        served = self.served[sbs]
        ul_interf = self._ul_interference(joint)[idx]
        return [
            self._user_qos(user, rank, len(served), sbs, action, ul_interf, rng)
            for rank, user in enumerate(served)
        ]

    def cell_utility(self, sbs: int, joint, rng) -> float:
        return float(sum(q.utility for q in self.cell_qos(sbs, joint, rng)))

    def eval_joint(self, joint, rng, collect: bool = False):
        """Utilities of all active cells under one joint action.

        Each cell gets its own child generator so per-cell results do not
        depend on evaluation order.  With collect=True also returns the
        per-user breakdowns.
        """
        if len(joint) != len(self.active):
            raise ValueError("joint must hold one action per active cell")
        rngs = rng.spawn(len(self.active))
        utilities = np.zeros(len(self.active))
        details: list[QosBreakdown] = []
        for idx, sbs in enumerate(self.active):
            qos = self.cell_qos(sbs, joint, rngs[idx])
            utilities[idx] = sum(q.utility for q in qos)
            if collect:
                details.extend(qos)
        if collect:
            return utilities, details
        return utilities


def sbs_utility(state, sbs: int, joint, poses, rng, enc=None) -> float:
    """One cell's utility (sum of its users' utilities) under a joint action.

    joint: one Action per active cell, ascending SBS id.  Randomness is
    drawn from ``rng`` directly, one corruption draw per served user in
    ascending user id.  A cell serving nobody earns the empty sum.
    """
    ev = QosEvaluator(state, poses, enc)
    if sbs not in ev.served:
        return 0.0
    return ev.cell_utility(sbs, tuple(joint), rng)


def build_game_table(
    evaluator: QosEvaluator, table_seed: int, max_cells: int = 1_000_000
) -> GameTable:
    """Evaluate every joint action once and freeze the results.

    Cell index c (C-order over the joint index grid) is evaluated with
    generator default_rng([table_seed, c]), so any single entry can be
    recomputed without replaying the rest of the table.

    Joint spaces beyond ``max_cells`` cells are refused: full tables grow
    as the product of per-cell action counts and quickly stop fitting in
    memory or time budget.  Use per-slot (live) evaluation instead.
    """
    counts = evaluator.action_counts()
    n = len(evaluator.active)
    n_cells = math.prod(counts)
    if n_cells > max_cells:
        raise ValueError(
            f"joint action space has {n_cells} cells "
            f"(> max_cells={max_cells}); evaluate per slot instead of "
            "freezing a full table"
        )
    utilities = np.zeros((n,) + counts)
    acts = [evaluator.actions(j) for j in evaluator.active]
    for cell_idx, joint_idx in enumerate(itertools.product(*map(range, counts))):
        joint = tuple(acts[p][joint_idx[p]] for p in range(n))
        cell_rng = np.random.default_rng([table_seed, cell_idx])
        utilities[(slice(None),) + joint_idx] = evaluator.eval_joint(joint, cell_rng)
    return GameTable(
        sbs_ids=tuple(evaluator.active),
        actions=tuple(tuple(a) for a in acts),
        utilities=utilities,
    )


def standalone_utility(
    state, user: int, sbs: int, pose: TrackingVector, rng, enc=None
) -> float:
    """Utility the user would get served alone by ``sbs``: every block in
    both directions, no interference anywhere.  Used to rank candidates
    when a cell is over capacity.

    A lone user has a single feasible downlink split, so the worst-case
    delay equals the realized one and the delay factor collapses to a
    below-target indicator; the ranking signal then rides on accuracy.
    """
    cfg = state.cfg
    enc = enc if enc is not None else TrackingEncoding()
    d = max(float(state.distances[user, sbs]), MIN_DISTANCE_M)
    path = d ** -cfg.pathloss_exp

    sinr_dl = cfg.p_sbs_w * state.fading_dl[user, sbs, :] * path / cfg.noise_w
    rate_dl = cfg.block_bandwidth_hz * np.log2(1.0 + sinr_dl)
    dl_rate = float(rate_dl.sum())
    min_dl_rate = dl_rate

    sinr_ul = cfg.p_user_w * state.fading_ul[user, sbs, :] * path / cfg.noise_w
    ul_rate = float((cfg.block_bandwidth_hz * np.log2(1.0 + sinr_ul)).sum())

    blocks = tuple(range(cfg.n_ul_blocks))
    received = corrupt_tracking(pose, sinr_ul, blocks, enc, rng)
    worst = worst_case_error(pose, enc)
    accuracy = tracking_accuracy(received, pose, worst)
    proc = processing_delay(
        correction_bits(received, pose, worst, cfg.image_bits), cfg.compute_bits, 1
    )
    d_total = total_delay(
        transmission_delay(cfg.image_bits, cfg.tracking_bits, dl_rate, ul_rate), proc
    )
    d_max = total_delay(
        transmission_delay(cfg.image_bits, cfg.tracking_bits, min_dl_rate, ul_rate),
        proc,
    )
    score = delay_utility(d_total, d_max, cfg.gamma_d_s)
    return total_utility(score, accuracy)
