"""Echo-state network utility predictor.

Each SBS keeps a small recurrent reservoir whose input is the vector of
broadcast strategy indices (one per SBS, normalized to [0, 1]).  Only the
readout is trained, one row per own action, by LMS on the realized
utility of the action actually played.  The reservoir's recurrent weight
matrix is diagonal with entries inside the unit interval, which keeps the
state contractive and the update cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class EsnState:
    """Reservoir plus readout for one SBS.

    w_in:  (n_reservoir, n_inputs) input weights.
    w_res: (n_reservoir,) diagonal recurrent weights, |w_res| < 1.
    w_out: (n_actions, n_reservoir + n_inputs) readout, one row per action.
    mu:    (n_reservoir,) current reservoir state.
    last_x: input consumed by the most recent reservoir update, or None
            before the first update; train_step regresses on it.
    """

    w_in: np.ndarray
    w_res: np.ndarray
    w_out: np.ndarray
    mu: np.ndarray
    last_x: np.ndarray | None = None

    @property
    def n_reservoir(self) -> int:
        return self.w_in.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.w_in.shape[1]

    @property
    def n_actions(self) -> int:
        return self.w_out.shape[0]


def init_esn(
    n_reservoir: int,
    n_inputs: int,
    n_actions: int,
    rng: np.random.Generator,
    in_scale: float = 1.0,
    res_scale: float = 0.9,
) -> EsnState:
    """Fresh ESN: random fixed weights, zero readout, zero state.

    Requires n_reservoir > n_inputs (the reservoir must be wider than the
    broadcast vector it embeds) and res_scale < 1 so the diagonal
    recurrence is a contraction.
    """
    if n_reservoir <= n_inputs:
        raise ValueError("n_reservoir must exceed n_inputs")
    if n_actions < 1:
        raise ValueError("n_actions must be >= 1")
    if not 0.0 < res_scale < 1.0:
        raise ValueError("res_scale must lie in (0, 1)")
    if in_scale <= 0.0:
        raise ValueError("in_scale must be positive")
    w_in = rng.uniform(-in_scale, in_scale, (n_reservoir, n_inputs))
    w_res = rng.uniform(-res_scale, res_scale, n_reservoir)
    w_out = np.zeros((n_actions, n_reservoir + n_inputs))
    return EsnState(w_in=w_in, w_res=w_res, w_out=w_out, mu=np.zeros(n_reservoir))


def update_reservoir(esn: EsnState, x: np.ndarray) -> np.ndarray:
    """Advance the reservoir one step on input x and return the new state."""
    x = np.asarray(x, dtype=float)
    if x.shape != (esn.n_inputs,):
        raise ValueError(f"expected input shape ({esn.n_inputs},), got {x.shape}")
    esn.mu = np.tanh(esn.w_res * esn.mu + esn.w_in @ x)
    esn.last_x = x.copy()
    return esn.mu


def predict(esn: EsnState, x: np.ndarray) -> np.ndarray:
    """Readout of all action values for input x at the current reservoir
    state.  Pure: does not advance the reservoir."""
    x = np.asarray(x, dtype=float)
    if x.shape != (esn.n_inputs,):
        raise ValueError(f"expected input shape ({esn.n_inputs},), got {x.shape}")
    return esn.w_out @ np.concatenate([esn.mu, x])


def train_step(
    esn: EsnState, action: int, actual_utility: float, step_size: float
) -> np.ndarray:
    """LMS update of one readout row from the realized utility.

    Regresses on the (state, input) pair of the most recent reservoir
    update; only the played action's row moves.  Returns the updated row.
    """
    if esn.last_x is None:
        raise ValueError("update_reservoir must run before training")
    if not 0 <= action < esn.n_actions:
        raise ValueError(f"action index {action} out of range")
    if step_size <= 0.0:
        raise ValueError("step_size must be positive")
    z = np.concatenate([esn.mu, esn.last_x])
    y = float(esn.w_out[action] @ z)
    esn.w_out[action] = esn.w_out[action] + step_size * (actual_utility - y) * z
    return esn.w_out[action]


def check_unambiguity(w_in: np.ndarray, inputs) -> bool:
    """Input-separation test for constant-step training.

    True when every reservoir row maps every pair of distinct inputs at
    least 2 apart (so the row's tanh argument can land in different
    saturation regions).  Fewer than two distinct inputs fails the test.
    """
    w_in = np.asarray(w_in, dtype=float)
    distinct: list[np.ndarray] = []
    for x in inputs:
        x = np.asarray(x, dtype=float)
        if not any(np.array_equal(x, seen) for seen in distinct):
            distinct.append(x)
    if len(distinct) < 2:
        return False
    for a in range(len(distinct)):
        for b in range(a + 1, len(distinct)):
            gaps = np.abs(w_in @ (distinct[a] - distinct[b]))
            if gaps.min() < 2.0:
                return False
    return True


def robbins_monro_schedule(t: int, lambda0: float = 0.03) -> float:
    """Diminishing step size lambda0 / t for step counter t >= 1."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if lambda0 <= 0.0:
        raise ValueError("lambda0 must be positive")
    return lambda0 / t


def save_esn(esn: EsnState, path) -> None:
    """Checkpoint to .npz; load_esn restores the state bit for bit."""
    path = Path(path)
    arrays = {
        "w_in": esn.w_in,
        "w_res": esn.w_res,
        "w_out": esn.w_out,
        "mu": esn.mu,
    }
    if esn.last_x is not None:
        arrays["last_x"] = esn.last_x
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_esn(path) -> EsnState:
    with np.load(Path(path), allow_pickle=False) as data:
        return EsnState(
            w_in=data["w_in"],
            w_res=data["w_res"],
            w_out=data["w_out"],
            mu=data["mu"],
            last_x=data["last_x"] if "last_x" in data.files else None,
        )
