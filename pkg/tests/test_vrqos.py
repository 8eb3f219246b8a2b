"""Pose encoding, corruption, accuracy and the delay/utility pipeline.

Monte Carlo checks compare against closed forms (bit flip probability,
worst-case error dominance); the max-delay test brute-forces every
feasible downlink split instead of trusting the implementation's
shortcut.
"""

import itertools
import math

import numpy as np
import pytest

from vrnetsim import (
    Action,
    TrackingEncoding,
    TrackingVector,
    correction_bits,
    corrupt_tracking,
    decode_tracking,
    delay_utility,
    demand_rate,
    encode_tracking,
    max_delay,
    processing_delay,
    total_delay,
    total_utility,
    tracking_accuracy,
    transmission_delay,
    worst_case_error,
)
from vrnetsim.channel import link_rate, uplink_sinr, downlink_sinr
from vrnetsim.vrqos import (
    SyntheticTrajectory,
    ber_from_sinr,
    lost_tracking,
    to_binary_mbit,
    wrap_angle,
)

from helpers import build_state, two_cell_cfg


def vec(*comps) -> TrackingVector:
    return TrackingVector(np.asarray(comps, dtype=float))


ZERO = vec(0, 0, 0, 0, 0, 0)


# --- encoding ----------------------------------------------------------------


def test_tracking_vector_wraps_orientation():
    v = vec(0, 0, 0, 3.5 * np.pi, -2.5 * np.pi, 0.25)
    assert np.all(np.abs(v.orientation) <= np.pi)
    assert math.isclose(v.components[3], -0.5 * np.pi, abs_tol=1e-12)
    assert math.isclose(v.components[4], -0.5 * np.pi, abs_tol=1e-12)


def test_encoding_needs_two_bits():
    with pytest.raises(ValueError):
        TrackingEncoding(bits_per_component=1)


def test_encode_length_96_bits():
    enc = TrackingEncoding()
    bits = encode_tracking(ZERO, enc)
    assert bits.shape == (96,)
    assert set(np.unique(bits)) <= {0, 1}


def test_encode_zero_vector_gives_midpoint_codes():
    # symmetric ranges put 0 on the half-range boundary; round-half-up
    # lands on the code with only the top bit set (2^15 of 65535 levels)
    enc = TrackingEncoding()
    rows = encode_tracking(ZERO, enc).reshape(6, 16)
    expect = np.zeros(16, dtype=np.uint8)
    expect[0] = 1
    assert np.array_equal(rows, np.tile(expect, (6, 1)))


def test_encode_decode_round_trip_half_step():
    enc = TrackingEncoding()
    rng = np.random.default_rng(0)
    lo = np.asarray(enc.lower)
    hi = np.asarray(enc.upper)
    step = (hi - lo) / ((1 << enc.bits_per_component) - 1)
    for _ in range(200):
        v = TrackingVector(lo + rng.random(6) * (hi - lo))
        back = decode_tracking(encode_tracking(v, enc), enc)
        assert np.all(np.abs(back.components - v.components) <= step / 2 + 1e-12)


def test_encode_clamps_out_of_range():
    enc = TrackingEncoding()
    big = vec(100.0, -100.0, 0, 0, 0, 0)
    back = decode_tracking(encode_tracking(big, enc), enc)
    assert back.components[0] == enc.upper[0]
    assert back.components[1] == enc.lower[0]


def test_decode_rejects_wrong_length():
    enc = TrackingEncoding()
    with pytest.raises(ValueError):
        decode_tracking(np.zeros(95, dtype=np.uint8), enc)


# --- corruption ---------------------------------------------------------------


def test_corrupt_infinite_sinr_returns_quantized_truth():
    enc = TrackingEncoding()
    truth = vec(0.3, -1.1, 0.8, 1.0, -2.0, 3.0)
    rng = np.random.default_rng(1)
    out = corrupt_tracking(truth, [np.inf, np.inf], (0, 1), enc, rng)
    quantized = decode_tracking(encode_tracking(truth, enc), enc)
    assert np.array_equal(out.components, quantized.components)


def test_corrupt_zero_sinr_flips_half_monte_carlo():
    # p_e(0) = 1/2; fraction of flipped bits over ~10^5 transmitted bits
    enc = TrackingEncoding()
    truth = vec(0.2, 0.1, -0.4, 0.9, 1.5, -0.7)
    ref_bits = encode_tracking(truth, enc)
    rng = np.random.default_rng(2)
    flipped = 0
    total = 0
    for _ in range(1100):
        out = corrupt_tracking(truth, [0.0], (0,), enc, rng)
        out_bits = encode_tracking(out, enc)
        flipped += int(np.sum(out_bits != ref_bits))
        total += enc.total_bits
    assert total >= 100_000
    assert abs(flipped / total - 0.5) < 0.01


def test_corrupt_deterministic_given_seed():
    enc = TrackingEncoding()
    truth = vec(0.3, 0.3, 0.3, 0.3, 0.3, 0.3)
    a = corrupt_tracking(truth, [1.0, 2.0], (0, 1), enc, np.random.default_rng(5))
    b = corrupt_tracking(truth, [1.0, 2.0], (0, 1), enc, np.random.default_rng(5))
    assert np.array_equal(a.components, b.components)


def test_corrupt_no_blocks_is_lost_update():
    enc = TrackingEncoding()
    truth = vec(0.5, -0.5, 1.0, 0.4, -1.2, 2.2)
    out = corrupt_tracking(truth, [], (), enc, np.random.default_rng(0))
    err = float(np.linalg.norm(out.components - truth.components))
    assert math.isclose(err, worst_case_error(truth, enc), rel_tol=1e-12)


def test_corrupt_sinr_count_must_match_blocks():
    enc = TrackingEncoding()
    with pytest.raises(ValueError):
        corrupt_tracking(ZERO, [1.0], (0, 1), enc, np.random.default_rng(0))


def test_ber_from_sinr_anchors():
    assert ber_from_sinr(0.0) == 0.5
    assert math.isclose(ber_from_sinr(2.0), 0.5 * math.exp(-1.0), rel_tol=1e-12)
    assert ber_from_sinr(np.inf) == 0.0


# --- accuracy and worst-case error ---------------------------------------------


def test_tracking_accuracy_anchor_points():
    worst = worst_case_error(ZERO, TrackingEncoding())
    assert tracking_accuracy(ZERO, ZERO, worst) == 1.0
    half = vec(worst / 2, 0, 0, 0, 0, 0)
    assert math.isclose(tracking_accuracy(half, ZERO, worst), 0.5, rel_tol=1e-12)
    at_worst = lost_tracking(ZERO, TrackingEncoding())
    assert tracking_accuracy(at_worst, ZERO, worst) == 0.0


def test_tracking_accuracy_requires_positive_worst():
    with pytest.raises(ValueError):
        tracking_accuracy(ZERO, ZERO, 0.0)


def test_worst_case_error_midpoint_sqrt6():
    a = 1.5
    enc = TrackingEncoding(lower=(-a,) * 6, upper=(a,) * 6)
    assert math.isclose(worst_case_error(ZERO, enc), math.sqrt(6) * a, rel_tol=1e-12)


def test_worst_case_error_corner_full_diagonal():
    a = 1.5
    enc = TrackingEncoding(lower=(-a,) * 6, upper=(a,) * 6)
    corner = TrackingVector(np.full(6, a))
    assert math.isclose(
        worst_case_error(corner, enc), math.sqrt(6) * 2 * a, rel_tol=1e-12
    )


def test_worst_case_error_dominates_corrupted_samples():
    # no corrupted decode may ever exceed the normalization bound
    enc = TrackingEncoding()
    rng = np.random.default_rng(4)
    for _ in range(20):
        ref = TrackingVector(rng.uniform(-2, 2, 6))
        bound = worst_case_error(ref, enc)
        for _ in range(500):
            out = corrupt_tracking(ref, [0.0], (0,), enc, rng)
            err = float(np.linalg.norm(out.components - ref.components))
            assert err <= bound + 1e-9


# --- delays ----------------------------------------------------------------------


def test_transmission_delay_arithmetic():
    assert transmission_delay(100.0, 50.0, 100.0, 50.0) == 2.0


def test_transmission_delay_infinite_rates():
    assert transmission_delay(442368.0, 819200.0, np.inf, np.inf) == 0.0


def test_transmission_delay_zero_rate_sentinel():
    assert transmission_delay(100.0, 50.0, 0.0, 50.0) == np.inf
    assert transmission_delay(100.0, 50.0, 100.0, 0.0) == np.inf


def test_transmission_delay_frame_budget():
    # payload sized for one frame at 60 fps moves in exactly 1/60 s
    rate = demand_rate(1920, 1080, 16, 60.0, 2, 150.0)
    frame_bits = rate / 60.0
    delay = transmission_delay(frame_bits, 819200.0, rate, np.inf)
    assert math.isclose(delay, 1.0 / 60.0, rel_tol=1e-12)


def test_processing_delay_arithmetic():
    assert math.isclose(processing_delay(10.0, 100.0, 2), 0.2, rel_tol=1e-12)
    assert processing_delay(0.0, 1e9, 4) == 0.0
    assert math.isclose(processing_delay(5000.0, 1e6, 1), 5e-3, rel_tol=1e-12)


def test_processing_delay_rejects_zero_served():
    with pytest.raises(ValueError):
        processing_delay(10.0, 100.0, 0)


def test_processing_delay_monotone():
    base = processing_delay(10.0, 100.0, 2)
    assert processing_delay(20.0, 100.0, 2) > base
    assert processing_delay(10.0, 100.0, 3) > base


def test_total_delay_sum_and_sentinel():
    assert total_delay(1.0, 2.0) == 3.0
    assert total_delay(0.0, 0.0) == 0.0
    assert total_delay(np.inf, 0.5) == np.inf


# --- correction payload -------------------------------------------------------


def test_correction_bits_identical_poses():
    worst = worst_case_error(ZERO, TrackingEncoding())
    assert correction_bits(ZERO, ZERO, worst, 1000.0) == 0


def test_correction_bits_saturates_at_payload():
    enc = TrackingEncoding()
    worst = worst_case_error(ZERO, enc)
    at_worst = lost_tracking(ZERO, enc)
    assert correction_bits(at_worst, ZERO, worst, 1000.0) == 1000


def test_correction_bits_linear_quarter():
    worst = worst_case_error(ZERO, TrackingEncoding())
    quarter = vec(worst / 4, 0, 0, 0, 0, 0)
    assert correction_bits(quarter, ZERO, worst, 1000.0) == 250


def test_correction_bits_never_exceeds_payload():
    rng = np.random.default_rng(6)
    enc = TrackingEncoding()
    for _ in range(200):
        ref = TrackingVector(rng.uniform(-2, 2, 6))
        recv = TrackingVector(rng.uniform(-2, 2, 6))
        worst = worst_case_error(ref, enc)
        bits = correction_bits(recv, ref, worst, 442368.0)
        assert 0 <= bits <= 442368


# --- delay utility and total utility ---------------------------------------------


def test_delay_utility_below_target_is_one():
    assert delay_utility(0.010, 0.5, 0.020) == 1.0


def test_delay_utility_zero_at_max():
    assert delay_utility(0.5, 0.5, 0.020) == 0.0


def test_delay_utility_linear_midpoint():
    assert math.isclose(delay_utility(1.5, 2.0, 1.0), 0.5, rel_tol=1e-12)


def test_delay_utility_degenerate_step():
    # worst-case delay already meets the target: step at the target
    assert delay_utility(0.010, 0.015, 0.020) == 1.0
    assert delay_utility(0.025, 0.015, 0.020) == 0.0


def test_total_utility_products():
    assert total_utility(1.0, 1.0) == 1.0
    assert math.isclose(total_utility(0.5, 0.8), 0.4, rel_tol=1e-12)
    assert total_utility(0.7, 0.0) == 0.0
    assert total_utility(0.0, 0.9) == 0.0


def test_total_utility_rejects_out_of_range():
    with pytest.raises(ValueError):
        total_utility(1.5, 0.5)
    with pytest.raises(ValueError):
        total_utility(0.5, -0.1)


def test_utility_fuzz_range_dominance_monotonicity():
    rng = np.random.default_rng(8)
    n = 10_000
    ks = rng.random(n)
    gammas = rng.uniform(1e-3, 0.1, n)
    d_maxes = gammas + rng.uniform(0.0, 0.5, n)
    ds = rng.uniform(0.0, 1.2, n) * d_maxes
    for k, gamma, d_max, d in zip(ks, gammas, d_maxes, ds):
        score = delay_utility(d, d_max, gamma)
        u = total_utility(score, k)
        assert 0.0 <= score <= 1.0
        assert 0.0 <= u <= 1.0
        if score == 0.0 or k == 0.0:
            assert u == 0.0
        # worse delay never helps, better accuracy never hurts
        assert delay_utility(d * 1.1, d_max, gamma) <= score + 1e-12
        assert total_utility(score, min(1.0, k * 1.1)) >= u - 1e-12


# --- worst-case delay over downlink splits ------------------------------------


def _compositions(total, parts):
    for cuts in itertools.combinations(range(1, total), parts - 1):
        edges = (0,) + cuts + (total,)
        yield tuple(edges[i + 1] - edges[i] for i in range(parts))


@pytest.mark.parametrize(
    "n_users,n_dl,dl_split,ul_sets",
    [
        (2, 3, (1, 2), ((0,), (1,))),
        (3, 4, (1, 2, 1), ((0,), (1,), (0, 1))),
    ],
)
def test_max_delay_brute_force_over_compositions(n_users, n_dl, dl_split, ul_sets):
    """The reported worst delay must equal an exhaustive maximum over all
    contiguous downlink splits, for every served rank."""
    cfg = two_cell_cfg(n_sbs=1, n_users=n_users, n_dl_blocks=n_dl, n_ul_blocks=2)
    rng = np.random.default_rng(9 + n_users)
    state = build_state(
        cfg,
        [[0.0, 0.0]],
        [[8.0 + 7.0 * i, 0.0] for i in range(n_users)],
        [0] * n_users,
        fading_dl=rng.exponential(1.0, (n_users, 1, n_dl)),
        fading_ul=rng.exponential(1.0, (n_users, 1, 2)),
    )
    state.allocations = {0: Action(dl=dl_split, ul=ul_sets)}

    for rank, user in enumerate(range(n_users)):
        # library answer, no processing term
        got = max_delay(state, user, ul_sets[rank])

        ul_mask = np.zeros(2)
        ul_sinrs = np.zeros(2)
        for k in ul_sets[rank]:
            ul_mask[k] = 1.0
            ul_sinrs[k] = uplink_sinr(state, user, 0, k)
        ul_rate = link_rate(ul_mask, ul_sinrs, cfg.block_bandwidth_hz)

        # independent recomputation over every positive composition, the
        # user taking the contiguous run at its rank
        worst = 0.0
        for split in _compositions(n_dl, n_users):
            start = sum(split[:rank])
            dl_rate = sum(
                cfg.block_bandwidth_hz
                * math.log2(1.0 + downlink_sinr(state, user, 0, k))
                for k in range(start, start + split[rank])
            )
            worst = max(
                worst,
                transmission_delay(cfg.image_bits, cfg.tracking_bits, dl_rate, ul_rate),
            )
        assert math.isclose(got, worst, rel_tol=1e-12)

        # dominance over the split actually in force
        start, stop = state.allocations[0].dl_slices()[rank]
        chosen_rate = sum(
            cfg.block_bandwidth_hz * math.log2(1.0 + downlink_sinr(state, user, 0, k))
            for k in range(start, stop)
        )
        chosen = transmission_delay(
            cfg.image_bits, cfg.tracking_bits, chosen_rate, ul_rate
        )
        assert got >= chosen - 1e-15


def test_max_delay_singleton_split():
    # one served user has exactly one feasible split (the whole band), so
    # the worst case IS that split's delay
    cfg = two_cell_cfg(n_sbs=1, n_users=1)
    state = build_state(cfg, [[0.0, 0.0]], [[5.0, 0.0]], [0])
    state.allocations = {0: Action(dl=(2,), ul=((0, 1),))}
    got = max_delay(state, 0, (0, 1), proc_delay_s=0.001)

    dl_rate = sum(
        cfg.block_bandwidth_hz * math.log2(1.0 + downlink_sinr(state, 0, 0, k))
        for k in range(2)
    )
    ul_rate = sum(
        cfg.block_bandwidth_hz * math.log2(1.0 + uplink_sinr(state, 0, 0, k))
        for k in range(2)
    )
    expect = transmission_delay(
        cfg.image_bits, cfg.tracking_bits, dl_rate, ul_rate
    ) + 0.001
    assert math.isclose(got, expect, rel_tol=1e-12)


# --- demand rate -----------------------------------------------------------------


def test_demand_rate_reference_format():
    rate = demand_rate(1920, 1080, 16, 60.0, 2, 150.0)
    assert rate == 26_542_080.0
    assert to_binary_mbit(rate) == 25.3125


def test_demand_rate_identity_and_linearity():
    assert demand_rate(1, 1, 1, 1.0, 1, 1.0) == 1.0
    assert demand_rate(640, 480, 8, 60.0, 2, 10.0) == 2 * demand_rate(
        640, 480, 8, 30.0, 2, 10.0
    )


def test_demand_rate_validation():
    with pytest.raises(ValueError):
        demand_rate(0, 1080, 16, 60.0, 2, 150.0)
    with pytest.raises(ValueError):
        demand_rate(1920, 1080, 16, 60.0, 2, 0.5)


# --- synthetic motion --------------------------------------------------------------


def test_trajectory_stays_in_bounds():
    walker = SyntheticTrajectory(np.random.default_rng(12))
    for _ in range(500):
        pose = walker.step()
        assert np.all(np.abs(pose.position) <= 1.0 + 1e-12)
        assert np.all(np.abs(pose.orientation) <= np.pi)


def test_trajectory_deterministic():
    a = SyntheticTrajectory(np.random.default_rng(13))
    b = SyntheticTrajectory(np.random.default_rng(13))
    for _ in range(50):
        assert np.array_equal(a.step().components, b.step().components)


def test_wrap_angle_range():
    angles = np.linspace(-10 * np.pi, 10 * np.pi, 1001)
    wrapped = wrap_angle(angles)
    assert np.all(wrapped >= -np.pi)
    assert np.all(wrapped <= np.pi)
    # endpoints are fixed points, in-range angles pass through untouched
    assert wrap_angle(np.pi) == np.pi
    assert wrap_angle(-np.pi) == -np.pi
    assert wrap_angle(0.7) == 0.7
