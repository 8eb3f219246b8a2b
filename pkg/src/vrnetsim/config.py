"""Scenario configuration and unit helpers.

All powers are stored in dBm (the usual way link budgets are quoted) and
converted to linear watts at the point of use.  Defaults describe a single
macro area with four small-cell base stations serving VR headsets.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

VR_FRAME_RATE_HZ = 60.0  # headset refresh rate used for traffic demands


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a power in dBm to linear watts."""
    return 10.0 ** (p_dbm / 10.0) * 1e-3


def watts_to_dbm(p_w: float) -> float:
    """Convert a power in watts to dBm.  Requires p_w > 0."""
    if p_w <= 0.0:
        raise ValueError(f"power must be positive, got {p_w}")
    return 10.0 * math.log10(p_w / 1e-3)


@dataclass
class ScenarioConfig:
    """Static description of one simulated deployment.

    Geometry is a disc of radius ``area_radius_m`` with base stations and
    users dropped uniformly at random.  Block counts are per direction and
    per base station; every base station owns the same licensed band, which
    is what creates inter-cell interference.
    """

    n_sbs: int = 4                    # small-cell base stations
    n_users: int = 25                 # VR users dropped in the area
    area_radius_m: float = 100.0
    sbs_coverage_m: float = 25.0
    p_sbs_dbm: float = 20.0           # downlink transmit power per block
    p_user_dbm: float = 20.0          # uplink transmit power per block
    noise_dbm: float = -95.0          # thermal noise per block
    pathloss_exp: float = 3.0
    n_dl_blocks: int = 5              # downlink resource blocks per SBS
    n_ul_blocks: int = 5              # uplink resource blocks per SBS
    block_bandwidth_hz: float = 1.8e6
    image_bits: float = 442368.0      # downlink payload per frame (one user)
    tracking_bits: float = 819200.0   # uplink tracking payload (100 kB)
    gamma_d_s: float = 0.020          # tolerable motion-to-photon delay
    compute_bits: float = 1e9         # bits/s the SBS can correct, shared by served users
    seed: int = 0

    def __post_init__(self):
        if self.n_sbs < 1:
            raise ValueError("n_sbs must be >= 1")
        if self.n_users < 0:
            raise ValueError("n_users must be >= 0")
        if self.n_dl_blocks < 1 or self.n_ul_blocks < 1:
            raise ValueError("block counts must be >= 1")
        if self.area_radius_m <= 0.0:
            raise ValueError("area_radius_m must be positive")
        if self.sbs_coverage_m <= 0.0:
            raise ValueError("sbs_coverage_m must be positive")
        if self.pathloss_exp <= 0.0:
            raise ValueError("pathloss_exp must be positive")
        if self.block_bandwidth_hz <= 0.0:
            raise ValueError("block_bandwidth_hz must be positive")
        if self.image_bits <= 0.0 or self.tracking_bits <= 0.0:
            raise ValueError("payload sizes must be positive")
        if self.gamma_d_s <= 0.0:
            raise ValueError("gamma_d_s must be positive")
        if self.compute_bits <= 0.0:
            raise ValueError("compute_bits must be positive")

    # --- derived linear-unit views ---------------------------------------

    @property
    def p_sbs_w(self) -> float:
        return dbm_to_watts(self.p_sbs_dbm)

    @property
    def p_user_w(self) -> float:
        return dbm_to_watts(self.p_user_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    def replace(self, **kwargs) -> "ScenarioConfig":
        return dataclasses.replace(self, **kwargs)


_FIELD_NAMES = {f.name for f in dataclasses.fields(ScenarioConfig)}


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a scenario from a YAML file.

    The file holds a flat mapping of ScenarioConfig field names; unknown
    keys are an error rather than silently ignored, so typos do not turn
    into mysteriously default-valued runs.  Missing keys take defaults.
    """
    path = Path(path)
    with open(path, "r") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: expected a mapping of config keys")
    unknown = sorted(set(raw) - _FIELD_NAMES)
    if unknown:
        raise ValueError(f"{path}: unknown config keys: {', '.join(unknown)}")
    coerced = {}
    for field in dataclasses.fields(ScenarioConfig):
        if field.name not in raw:
            continue
        value = raw[field.name]
        # YAML 1.1 reads exponents without a sign ("1.0e7") as strings, so
        # coerce instead of trusting the parser's type
        caster = int if field.type in (int, "int") else float
        try:
            coerced[field.name] = caster(value)
        except (TypeError, ValueError):
            raise ValueError(
                f"{path}: config key {field.name} has non-numeric value {value!r}"
            )
    return ScenarioConfig(**coerced)


def save_config(cfg: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(dataclasses.asdict(cfg), fh, sort_keys=True)
