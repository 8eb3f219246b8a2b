"""Propagation, placement and per-block SINR for the small-cell network.

Model: distance-based path loss d^-beta with i.i.d. unit-mean Rayleigh
fading power gains, redrawn independently per (user, SBS, block,
direction).  Every SBS reuses the same licensed band, so downlink blocks
interfere across cells and an uplink block hears every co-channel
transmitter in neighbouring cells.  All arithmetic is done in linear
watts; dBm appears only in the config.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig

MIN_DISTANCE_M = 1.0  # near-field clamp so gains stay finite


def channel_gain(distance_m, beta: float, g):
    """Power gain of a link: g * max(d, 1 m)^-beta.

    g is a fading power gain (not an amplitude); accepts scalars or
    broadcastable arrays.
    """
    if np.any(np.asarray(g) < 0.0):
        raise ValueError("fading power gain must be nonnegative")
    d = np.maximum(distance_m, MIN_DISTANCE_M)
    return g * d ** (-beta)


def draw_fading(rng: np.random.Generator, size=None):
    """Draw unit-mean exponential power gains (Rayleigh amplitude fading)."""
    return rng.exponential(1.0, size=size)


def link_rate(blocks, sinrs, bandwidth_hz: float) -> float:
    """Shannon rate in bit/s over the assigned blocks.

    blocks: 0/1 assignment flags, one per block.
    sinrs:  linear SINR per block, aligned with ``blocks``.
    """
    blocks = np.asarray(blocks, dtype=float)
    sinrs = np.asarray(sinrs, dtype=float)
    if blocks.shape != sinrs.shape:
        raise ValueError("blocks and sinrs must align")
    return float(np.sum(blocks * bandwidth_hz * np.log2(1.0 + sinrs)))


@dataclass
class NetworkState:
    """One placement plus one fading realization.

    association[i] is the serving SBS of user i, or -1 when unserved.
    allocations maps SBS id -> Action (set by the harness once the joint
    allocation is known); SBSs missing from the map are idle.  Treated as
    read-only by everything downstream.
    """

    cfg: ScenarioConfig
    sbs_pos: np.ndarray          # (n_sbs, 2) metres
    user_pos: np.ndarray         # (n_users, 2) metres
    distances: np.ndarray        # (n_users, n_sbs) metres
    fading_dl: np.ndarray        # (n_users, n_sbs, n_dl_blocks)
    fading_ul: np.ndarray        # (n_users, n_sbs, n_ul_blocks)
    association: np.ndarray      # (n_users,) int, -1 = unserved
    allocations: dict = field(default_factory=dict)

    def served_users(self, sbs: int) -> list[int]:
        """Users served by ``sbs``, ascending id.  This ordering defines the
        meaning of per-user positions inside an Action."""
        return [int(i) for i in np.flatnonzero(self.association == sbs)]

    def active_sbs(self) -> list[int]:
        """SBSs serving at least one user, ascending id."""
        present = sorted(set(int(s) for s in self.association if s >= 0))
        return present


def place_scenario(cfg: ScenarioConfig, rng: np.random.Generator) -> NetworkState:
    """Drop SBSs and users uniformly on the disc and draw fading.

    Draw order is fixed (SBS positions, user positions, downlink fading,
    uplink fading) so a seed pins the whole realization.  Users associate
    with the nearest SBS whose coverage disc contains them; users covered
    by nobody stay unserved.  Per-SBS load limits are applied later by the
    run harness, not here.
    """
    def uniform_disc(n):
        radius = cfg.area_radius_m * np.sqrt(rng.random(n))
        theta = rng.random(n) * 2.0 * np.pi
        return np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])

    sbs_pos = uniform_disc(cfg.n_sbs)
    user_pos = uniform_disc(cfg.n_users)
    fading_dl = draw_fading(rng, (cfg.n_users, cfg.n_sbs, cfg.n_dl_blocks))
    fading_ul = draw_fading(rng, (cfg.n_users, cfg.n_sbs, cfg.n_ul_blocks))

    if cfg.n_users:
        diff = user_pos[:, None, :] - sbs_pos[None, :, :]
        distances = np.linalg.norm(diff, axis=2)
        covered = distances <= cfg.sbs_coverage_m
        nearest = np.argmin(np.where(covered, distances, np.inf), axis=1)
        association = np.where(covered.any(axis=1), nearest, -1).astype(int)
    else:
        distances = np.zeros((0, cfg.n_sbs))
        association = np.zeros(0, dtype=int)

    return NetworkState(
        cfg=cfg,
        sbs_pos=sbs_pos,
        user_pos=user_pos,
        distances=distances,
        fading_dl=fading_dl,
        fading_ul=fading_ul,
        association=association,
    )


def redraw_fading(state: NetworkState, rng: np.random.Generator) -> NetworkState:
    """New state with fresh fading, same geometry and association."""
    return NetworkState(
        cfg=state.cfg,
        sbs_pos=state.sbs_pos,
        user_pos=state.user_pos,
        distances=state.distances,
        fading_dl=draw_fading(rng, state.fading_dl.shape),
        fading_ul=draw_fading(rng, state.fading_ul.shape),
        association=state.association,
        allocations=dict(state.allocations),
    )


def _gain(state: NetworkState, user: int, sbs: int, fading: float) -> float:
    return float(
        channel_gain(state.distances[user, sbs], state.cfg.pathloss_exp, fading)
    )


def uplink_sinr(state: NetworkState, user: int, sbs: int, block: int) -> float:
    """SINR of ``user`` transmitting to ``sbs`` on uplink ``block``.

    Interference comes from the one user per other cell scheduled on the
    same block, received at this SBS.  Requires state.allocations to hold
    the joint allocation.
    """
    cfg = state.cfg
    signal = cfg.p_user_w * _gain(state, user, sbs, state.fading_ul[user, sbs, block])
    interference = 0.0
    for other, action in state.allocations.items():
        if other == sbs:
            continue
        served = state.served_users(other)
        for pos, blocks in enumerate(action.ul):
            if block in blocks:
                tx = served[pos]
                interference += cfg.p_user_w * _gain(
                    state, tx, sbs, state.fading_ul[tx, sbs, block]
                )
                break
    return signal / (cfg.noise_w + interference)


def downlink_sinr(state: NetworkState, user: int, sbs: int, block: int) -> float:
    """SINR of ``sbs`` transmitting to ``user`` on downlink ``block``.

    Every other SBS currently serving users transmits on all downlink
    blocks, so downlink interference does not depend on how those cells
    split their blocks among users.
    """
    cfg = state.cfg
    signal = cfg.p_sbs_w * _gain(state, user, sbs, state.fading_dl[user, sbs, block])
    interference = 0.0
    for other, action in state.allocations.items():
        if other == sbs or not action.dl:
            continue
        interference += cfg.p_sbs_w * _gain(
            state, user, other, state.fading_dl[user, other, block]
        )
    return signal / (cfg.noise_w + interference)
