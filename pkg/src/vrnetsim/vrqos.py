"""Multi-attribute VR quality of service.

A user's service quality mixes two attributes: how accurately the serving
station knows the headset pose (tracking accuracy) and how fast a frame
makes the uplink-tracking / downlink-image round trip (delay).  Both are
mapped to [0, 1] and multiplied, so failing either one kills the utility.

Pose is a 6-vector: position x/y/z in metres plus orientation roll/pitch/
yaw in radians, orientation always wrapped to [-pi, pi].  The headset
sends a fixed-point encoding of the pose over its uplink blocks; bit
errors from low SINR corrupt it, and the residual pose error both lowers
accuracy and costs server cycles to correct (a processing delay).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

N_COMPONENTS = 6
POSITION_RANGE_M = 2.0  # encoder covers [-2, 2] m per axis


def wrap_angle(theta):
    """Wrap angles to [-pi, pi], keeping both endpoints fixed.

    Both representations of a half turn are legal quantizer inputs, so
    +pi must not collapse onto -pi; the nearest-multiple form leaves any
    theta already in range untouched.
    """
    theta = np.asarray(theta, dtype=float)
    return theta - 2.0 * np.pi * np.round(theta / (2.0 * np.pi))


@dataclass
class TrackingVector:
    """Headset pose: components = (x, y, z, roll, pitch, yaw).

    Orientation components are wrapped on construction so every instance
    satisfies the [-pi, pi] convention.
    """

    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float).copy()
        if comps.shape != (N_COMPONENTS,):
            raise ValueError(f"expected {N_COMPONENTS} components, got {comps.shape}")
        comps[3:] = wrap_angle(comps[3:])
        self.components = comps

    @property
    def position(self) -> np.ndarray:
        return self.components[:3]

    @property
    def orientation(self) -> np.ndarray:
        return self.components[3:]


@dataclass(frozen=True)
class TrackingEncoding:
    """Uniform fixed-point quantizer for the pose vector.

    Each component is clipped to [lower, upper] and mapped to an unsigned
    integer of ``bits_per_component`` bits; codewords are concatenated
    MSB-first in component order.
    """

    bits_per_component: int = 16
    lower: tuple = (-POSITION_RANGE_M,) * 3 + (-np.pi,) * 3
    upper: tuple = (POSITION_RANGE_M,) * 3 + (np.pi,) * 3

    def __post_init__(self):
        if self.bits_per_component < 2:
            raise ValueError("bits_per_component must be >= 2")
        if len(self.lower) != N_COMPONENTS or len(self.upper) != N_COMPONENTS:
            raise ValueError("ranges must cover all six components")
        if any(u <= l for l, u in zip(self.lower, self.upper)):
            raise ValueError("each upper bound must exceed its lower bound")

    @property
    def total_bits(self) -> int:
        return N_COMPONENTS * self.bits_per_component


def encode_tracking(vec: TrackingVector, enc: TrackingEncoding) -> np.ndarray:
    """Quantize a pose to a bit array of shape (enc.total_bits,), MSB first."""
    b = enc.bits_per_component
    lo = np.asarray(enc.lower)
    hi = np.asarray(enc.upper)
    levels = (1 << b) - 1
    t = np.clip((vec.components - lo) / (hi - lo), 0.0, 1.0)
    codes = np.floor(t * levels + 0.5).astype(np.int64)  # round half up
    shifts = np.arange(b - 1, -1, -1)
    bits = (codes[:, None] >> shifts[None, :]) & 1
    return bits.reshape(-1).astype(np.uint8)


def decode_tracking(bits: np.ndarray, enc: TrackingEncoding) -> TrackingVector:
    """Inverse of encode_tracking (up to quantization error)."""
    b = enc.bits_per_component
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape != (enc.total_bits,):
        raise ValueError(f"expected {enc.total_bits} bits, got {bits.shape}")
    lo = np.asarray(enc.lower)
    hi = np.asarray(enc.upper)
    levels = (1 << b) - 1
    weights = 1 << np.arange(b - 1, -1, -1)
    codes = bits.reshape(N_COMPONENTS, b) @ weights
    comps = lo + codes / levels * (hi - lo)
    return TrackingVector(comps)


def worst_case_error(reference: TrackingVector, enc: TrackingEncoding) -> float:
    """Largest pose error any decodable vector can have w.r.t. reference.

    Per component the farthest representable value is one of the range
    endpoints; the worst joint error is the Euclidean norm of those
    per-component maxima.  Used to normalize tracking accuracy.
    """
    lo = np.asarray(enc.lower)
    hi = np.asarray(enc.upper)
    ref = reference.components
    per_comp = np.maximum(np.abs(ref - lo), np.abs(hi - ref))
    return float(np.linalg.norm(per_comp))


def tracking_accuracy(
    received: TrackingVector, reference: TrackingVector, worst_error: float
) -> float:
    """1 - error/worst_error, clamped to [0, 1].

    Differences are taken on the raw components (orientation is treated as
    a bounded coordinate after wrapping, not as a circle), which keeps the
    accuracy consistent with worst_case_error.
    """
    if worst_error <= 0.0:
        raise ValueError("worst_error must be positive")
    err = float(np.linalg.norm(received.components - reference.components))
    return float(np.clip(1.0 - err / worst_error, 0.0, 1.0))


def ber_from_sinr(sinr) -> float:
    """Bit error probability of an uplink block at the given linear SINR."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0.0):
        raise ValueError("SINR must be nonnegative")
    return 0.5 * np.exp(-sinr / 2.0)


def lost_tracking(reference: TrackingVector, enc: TrackingEncoding) -> TrackingVector:
    """Worst decodable pose w.r.t. reference; stands in for a lost update."""
    lo = np.asarray(enc.lower)
    hi = np.asarray(enc.upper)
    ref = reference.components
    comps = np.where(np.abs(ref - lo) >= np.abs(hi - ref), lo, hi)
    return TrackingVector(comps)


def corrupt_tracking(
    truth: TrackingVector,
    per_block_sinr,
    blocks,
    enc: TrackingEncoding,
    rng: np.random.Generator,
) -> TrackingVector:
    """Push the encoded pose through the uplink and decode what survives.

    Bits are striped round-robin over the assigned blocks (bit b rides
    block b mod n_blocks) and each flips independently with that block's
    error probability.  With no blocks assigned the update is lost and the
    worst decodable pose is returned.  Consumes exactly one rng.random
    call of size enc.total_bits when blocks are assigned.
    """
    blocks = tuple(blocks)
    if len(blocks) == 0:
        return lost_tracking(truth, enc)
    sinrs = np.asarray(per_block_sinr, dtype=float)
    if sinrs.shape != (len(blocks),):
        raise ValueError("need one SINR per assigned block")
    bits = encode_tracking(truth, enc)
    p_block = ber_from_sinr(sinrs)
    p_bit = p_block[np.arange(enc.total_bits) % len(blocks)]
    flips = rng.random(enc.total_bits) < p_bit
    return decode_tracking(bits ^ flips, enc)


# --- delay pipeline -------------------------------------------------------


def transmission_delay(
    image_bits: float, tracking_bits: float, dl_rate_bps: float, ul_rate_bps: float
) -> float:
    """Downlink image time plus uplink tracking time, in seconds.

    A zero rate on a leg with traffic makes that leg (and so the total)
    infinite; the delay utility then bottoms out at zero.
    """
    if image_bits < 0.0 or tracking_bits < 0.0:
        raise ValueError("payload sizes must be nonnegative")
    if dl_rate_bps < 0.0 or ul_rate_bps < 0.0:
        raise ValueError("rates must be nonnegative")

    def leg(bits, rate):
        if bits == 0.0:
            return 0.0
        return bits / rate if rate > 0.0 else math.inf

    return leg(image_bits, dl_rate_bps) + leg(tracking_bits, ul_rate_bps)


def correction_bits(
    received: TrackingVector,
    reference: TrackingVector,
    worst_error: float,
    image_bits: float,
) -> int:
    """Rendering data the server must recompute for a given pose error.

    Scales linearly from 0 (perfect pose) to the full image payload (pose
    error at the worst-case bound), rounded half-up to whole bits.
    """
    if worst_error <= 0.0:
        raise ValueError("worst_error must be positive")
    if image_bits <= 0.0:
        raise ValueError("image_bits must be positive")
    error = float(np.linalg.norm(received.components - reference.components))
    frac = min(1.0, error / worst_error)
    return int(math.floor(image_bits * frac + 0.5))


def processing_delay(
    upsilon_bits: float, compute_bits: float, n_served: int
) -> float:
    """Server-side correction time: upsilon / (compute_bits / n_served).

    compute_bits is the bits/s the SBS can correct in total; the budget is
    split evenly over the users it serves, so a busier cell corrects each
    pose more slowly.
    """
    if n_served < 1:
        raise ValueError("n_served must be >= 1")
    if compute_bits <= 0.0:
        raise ValueError("compute_bits must be positive")
    if upsilon_bits < 0.0:
        raise ValueError("upsilon_bits must be nonnegative")
    return upsilon_bits * n_served / compute_bits


def total_delay(transmission_s: float, processing_s: float) -> float:
    if transmission_s < 0.0 or processing_s < 0.0:
        raise ValueError("delays must be nonnegative")
    return transmission_s + processing_s


def delay_utility(delay_s: float, max_delay_s: float, target_s: float) -> float:
    """Piecewise delay score: 1 below the target, linear decay to 0 at max.

    Degenerate case: when even the worst feasible delay meets the target
    (max_delay_s <= target_s) the score is a step at the target.  Output
    is clamped to [0, 1] so out-of-model inputs cannot escape the range.
    """
    if target_s <= 0.0:
        raise ValueError("target_s must be positive")
    if max_delay_s <= target_s:
        return 1.0 if delay_s <= target_s else 0.0
    if delay_s < target_s:
        return 1.0
    return float(np.clip((max_delay_s - delay_s) / (max_delay_s - target_s), 0.0, 1.0))


def total_utility(delay_util: float, k: float) -> float:
    """Multi-attribute utility: delay score times tracking accuracy.

    Either factor at zero zeroes the product, so neither service aspect
    can buy back a total failure of the other.
    """
    if not 0.0 <= delay_util <= 1.0:
        raise ValueError("delay_util must lie in [0, 1]")
    if not 0.0 <= k <= 1.0:
        raise ValueError("k must lie in [0, 1]")
    return delay_util * k


def _worst_split_rate(block_rate, n_dl: int, v: int, m: int) -> float:
    """Minimum downlink rate rank m of v users can get from a contiguous
    split of n_dl blocks.

    Runs are handed out in rank order, every block is used, and rates add
    over a run, so the worst feasible run is the shortest one the rank
    can reach: block 0 for the first rank, the last block for the last
    rank, any single block k with m-1 <= k <= n_dl-(v-m)-1 in between.
    With one user the only split is the whole band.
    """
    if v == 1:
        return sum(block_rate(k) for k in range(n_dl))
    if m == 1:
        return block_rate(0)
    if m == v:
        return block_rate(n_dl - 1)
    return min(block_rate(k) for k in range(m - 1, n_dl - (v - m)))


def max_delay(state, user: int, ul_blocks, proc_delay_s: float = 0.0) -> float:
    """Worst total delay over the serving SBS's feasible downlink splits.

    With v served users taking contiguous runs of the downlink blocks in
    rank order, the slowest run a user can be handed is a single block,
    except at the edges: the first rank always starts on block 0, the
    last rank always ends on the final block, and a lone user holds
    every block (one feasible split, so the worst case is the split
    itself).  Uplink time comes from the given uplink blocks and
    ``state.allocations``; the processing term is supplied by the caller
    because it does not depend on the downlink split.
    """
    from .channel import downlink_sinr, link_rate, uplink_sinr

    cfg = state.cfg
    sbs = int(state.association[user])
    if sbs < 0:
        raise ValueError(f"user {user} is unserved")
    served = state.served_users(sbs)
    v = len(served)
    m = served.index(user) + 1  # 1-based rank in the canonical order
    worst_rate = _worst_split_rate(
        lambda k: cfg.block_bandwidth_hz
        * math.log2(1.0 + downlink_sinr(state, user, sbs, k)),
        cfg.n_dl_blocks,
        v,
        m,
    )

    ul_blocks = tuple(ul_blocks)
    mask = np.zeros(cfg.n_ul_blocks)
    sinrs = np.zeros(cfg.n_ul_blocks)
    for k in ul_blocks:
        mask[k] = 1.0
        sinrs[k] = uplink_sinr(state, user, sbs, k)
    ul_rate = link_rate(mask, sinrs, cfg.block_bandwidth_hz)

    tx = transmission_delay(cfg.image_bits, cfg.tracking_bits, worst_rate, ul_rate)
    return total_delay(tx, proc_delay_s)


# --- per-user QoS record ---------------------------------------------------


@dataclass
class QosBreakdown:
    """Everything that went into one user's utility for one realization."""

    user: int
    sbs: int
    dl_rate_bps: float
    ul_rate_bps: float
    accuracy: float
    dl_delay_s: float
    ul_delay_s: float
    tx_delay_s: float
    proc_delay_s: float
    total_delay_s: float
    max_delay_s: float
    delay_score: float
    utility: float


# --- marginal utility of extra blocks --------------------------------------


@dataclass(frozen=True)
class LinkQos:
    """Rate-level summary of one user's service, enough to price a change.

    min_dl_rate_bps is the rate of the slowest downlink split the serving
    cell could have chosen; it pins the worst-case delay that anchors the
    delay score's linear section.
    """

    image_bits: float
    tracking_bits: float
    dl_rate_bps: float
    min_dl_rate_bps: float
    ul_rate_bps: float
    proc_delay_s: float
    accuracy: float
    target_s: float

    def tx_delay_s(self) -> float:
        return transmission_delay(
            self.image_bits, self.tracking_bits, self.dl_rate_bps, self.ul_rate_bps
        )

    def total_delay_s(self) -> float:
        return total_delay(self.tx_delay_s(), self.proc_delay_s)

    def max_delay_s(self) -> float:
        tx = transmission_delay(
            self.image_bits, self.tracking_bits, self.min_dl_rate_bps, self.ul_rate_bps
        )
        return total_delay(tx, self.proc_delay_s)

    def utility(self) -> float:
        score = delay_utility(self.total_delay_s(), self.max_delay_s(), self.target_s)
        return total_utility(score, self.accuracy)


def _capped_score(q: LinkQos) -> float:
    """accuracy * delay score, written so the sub-target branch is the
    natural cap of the linear section."""
    d_max = q.max_delay_s()
    if d_max <= q.target_s:
        return q.accuracy * (1.0 if q.total_delay_s() <= q.target_s else 0.0)
    headroom = d_max - q.total_delay_s()  # = L/c_min - L/c_d + (ul/proc shifts)
    return q.accuracy * min(1.0, headroom / (d_max - q.target_s))


@dataclass(frozen=True)
class UplinkChange:
    """What an uplink reallocation can touch, downlink service held fixed.

    Fields left as None keep the instance's current value; more blocks
    typically raise the tracking rate, improve pose accuracy (fewer bit
    errors), and shift the processing term through the correction payload.
    """

    ul_rate_bps: float | None = None
    accuracy: float | None = None
    proc_delay_s: float | None = None

    def apply(self, q: LinkQos) -> LinkQos:
        return replace(
            q,
            ul_rate_bps=self.ul_rate_bps if self.ul_rate_bps is not None else q.ul_rate_bps,
            accuracy=self.accuracy if self.accuracy is not None else q.accuracy,
            proc_delay_s=(
                self.proc_delay_s if self.proc_delay_s is not None else q.proc_delay_s
            ),
        )


def gain_uplink(instance: LinkQos, change: UplinkChange) -> float:
    """Utility change from an uplink-side reallocation (rate, accuracy or
    processing), downlink service held fixed.

    Both states share the downlink headroom L/c_min - L/c_d, so the gain
    reduces to that bracket rescaled by each state's accuracy over its
    worst-case margin.  Equals utility(after) - utility(before) exactly.
    """
    after = change.apply(instance)
    return _capped_score(after) - _capped_score(instance)


def gain_downlink(instance: LinkQos, extra_dl_rate_bps: float) -> float:
    """Utility change from adding downlink rate, everything else fixed.

    Closed form K * L/(D_max - target) * delta/(c^2 + c*delta) with
    c = current downlink rate and delta = added rate.  Valid on the linear
    section of the delay score (delay above target before and after).
    """
    if extra_dl_rate_bps < 0.0:
        raise ValueError("extra_dl_rate_bps must be nonnegative")
    c = instance.dl_rate_bps
    if c <= 0.0:
        raise ValueError("dl_rate_bps must be positive")
    d_max = instance.max_delay_s()
    if d_max <= instance.target_s:
        raise ValueError("worst-case delay already meets the target")
    delta = extra_dl_rate_bps
    scale = instance.accuracy * instance.image_bits / (d_max - instance.target_s)
    return scale * delta / (c * c + c * delta)


def gain_downlink_large_delta(instance: LinkQos) -> float:
    """Limit of gain_downlink as the added rate dwarfs the current rate."""
    c = instance.dl_rate_bps
    d_max = instance.max_delay_s()
    if d_max <= instance.target_s:
        raise ValueError("worst-case delay already meets the target")
    return instance.accuracy * instance.image_bits / ((d_max - instance.target_s) * c)


def gain_downlink_small_delta(instance: LinkQos, extra_dl_rate_bps: float) -> float:
    """First-order gain_downlink for added rate much below the current rate."""
    c = instance.dl_rate_bps
    d_max = instance.max_delay_s()
    if d_max <= instance.target_s:
        raise ValueError("worst-case delay already meets the target")
    return (
        instance.accuracy
        * instance.image_bits
        * extra_dl_rate_bps
        / ((d_max - instance.target_s) * c * c)
    )


# --- traffic demand ---------------------------------------------------------


def demand_rate(
    width_px: int,
    height_px: int,
    bit_depth: int,
    fps: float,
    eyes: int = 2,
    compression: float = 1.0,
) -> float:
    """Raw VR video rate in bit/s for the given format.

    1920x1080 at 16 bits, 60 fps, both eyes, 150:1 compression comes to
    26 542 080 bit/s (25.3125 binary Mbit/s).
    """
    if min(width_px, height_px, bit_depth, eyes) < 1:
        raise ValueError("pixel format fields must be positive")
    if fps <= 0.0 or compression < 1.0:
        raise ValueError("need fps > 0 and compression >= 1")
    return width_px * height_px * bit_depth * fps * eyes / compression


def to_binary_mbit(rate_bps: float) -> float:
    """bit/s -> binary Mbit/s (divide by 1024^2)."""
    return rate_bps / (1024.0 * 1024.0)


# --- synthetic headset motion ----------------------------------------------


class SyntheticTrajectory:
    """Deterministic pseudo-random headset motion for one user.

    Position does a clipped Gaussian random walk inside a 2x2x2 m cube;
    orientation sweeps sinusoidally with per-axis amplitude, frequency and
    phase drawn once at construction.  step() returns the pose for the
    current slot and advances the walk.
    """

    def __init__(self, rng: np.random.Generator, step_m: float = 0.05):
        self._rng = rng
        self._step_m = step_m
        self._pos = rng.uniform(-1.0, 1.0, 3)
        self._amp = rng.uniform(0.25, 1.0, 3) * np.pi
        self._freq = rng.uniform(0.005, 0.05, 3)  # cycles per slot
        self._phase = rng.uniform(0.0, 2.0 * np.pi, 3)
        self._t = 0

    def step(self) -> TrackingVector:
        orient = self._amp * np.sin(2.0 * np.pi * self._freq * self._t + self._phase)
        vec = TrackingVector(np.concatenate([self._pos, orient]))
        self._pos = np.clip(
            self._pos + self._rng.normal(0.0, self._step_m, 3), -1.0, 1.0
        )
        self._t += 1
        return vec
