"""Hand-built network states with controlled geometry and fading.

Tests that need exact arithmetic bypass random placement entirely: they
lay out positions, pick fading gains, and wire the association by hand,
so every SINR in the pipeline can be recomputed on paper.
"""

import numpy as np

from vrnetsim import NetworkState, ScenarioConfig


def build_state(cfg, sbs_pos, user_pos, association, fading_dl=1.0, fading_ul=1.0):
    """NetworkState with explicit geometry and constant or array fading."""
    sbs_pos = np.asarray(sbs_pos, dtype=float).reshape(-1, 2)
    user_pos = np.asarray(user_pos, dtype=float).reshape(-1, 2)
    distances = np.linalg.norm(user_pos[:, None, :] - sbs_pos[None, :, :], axis=2)
    n_users, n_sbs = len(user_pos), len(sbs_pos)
    if np.isscalar(fading_dl):
        fading_dl = np.full((n_users, n_sbs, cfg.n_dl_blocks), float(fading_dl))
    if np.isscalar(fading_ul):
        fading_ul = np.full((n_users, n_sbs, cfg.n_ul_blocks), float(fading_ul))
    return NetworkState(
        cfg=cfg,
        sbs_pos=sbs_pos,
        user_pos=user_pos,
        distances=distances,
        fading_dl=np.asarray(fading_dl, dtype=float),
        fading_ul=np.asarray(fading_ul, dtype=float),
        association=np.asarray(association, dtype=int),
    )


def two_cell_cfg(**overrides):
    """Small two-cell scenario used by several pipeline tests."""
    base = dict(
        n_sbs=2,
        n_users=2,
        area_radius_m=100.0,
        sbs_coverage_m=100.0,
        n_dl_blocks=2,
        n_ul_blocks=2,
    )
    base.update(overrides)
    return ScenarioConfig(**base)
