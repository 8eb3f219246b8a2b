"""Action-space enumeration against an independent brute-force oracle.

The oracle builds actions from raw cartesian products with no shared
code: downlink splits are any positive tuples with the right sum,
uplink assignments any owner vectors that cover every user.
"""

import itertools

import pytest

from vrnetsim import (
    Action,
    InfeasibleActionError,
    count_actions,
    enumerate_actions,
    validate_action,
)


def oracle_action_set(n_served, n_dl, n_ul):
    actions = set()
    for dl in itertools.product(range(1, n_dl + 1), repeat=n_served):
        if sum(dl) != n_dl:
            continue
        for owner in itertools.product(range(n_served), repeat=n_ul):
            if len(set(owner)) != n_served:
                continue
            ul = tuple(
                tuple(b for b in range(n_ul) if owner[b] == u)
                for u in range(n_served)
            )
            actions.add((dl, ul))
    return actions


GRID = [
    (v, s_d, s_u)
    for v in (1, 2, 3)
    for s_d in (1, 2, 3, 4, 5)
    for s_u in (1, 2, 3, 4, 5)
    if v <= min(s_d, s_u)
]


@pytest.mark.parametrize("v,s_d,s_u", GRID)
def test_enumeration_matches_oracle(v, s_d, s_u):
    got = enumerate_actions(v, s_d, s_u)
    as_pairs = {(a.dl, a.ul) for a in got}
    assert len(as_pairs) == len(got), "enumeration must not repeat actions"
    assert as_pairs == oracle_action_set(v, s_d, s_u)


@pytest.mark.parametrize("v,s_d,s_u", GRID)
def test_count_matches_enumeration(v, s_d, s_u):
    assert count_actions(v, s_d, s_u) == len(enumerate_actions(v, s_d, s_u))


@pytest.mark.parametrize("v,s_d,s_u", GRID)
def test_enumerated_actions_validate(v, s_d, s_u):
    for a in enumerate_actions(v, s_d, s_u):
        validate_action(a, v, s_d, s_u)


def test_reference_counts():
    assert count_actions(1, 2, 2) == 1
    assert count_actions(2, 2, 2) == 2
    assert count_actions(2, 3, 2) == 4


def test_infeasible_combinations_raise():
    with pytest.raises(InfeasibleActionError):
        enumerate_actions(3, 2, 5)
    with pytest.raises(InfeasibleActionError):
        enumerate_actions(3, 5, 2)
    with pytest.raises(InfeasibleActionError):
        count_actions(0, 2, 2)


def test_count_monotone_in_uplink_blocks():
    # more uplink blocks never shrink the choice set
    for v in (2, 3):
        counts = [count_actions(v, 5, s_u) for s_u in range(v, 6)]
        assert counts == sorted(counts)
        assert counts[0] < counts[-1]


def test_validate_action_rejects_malformed():
    ok = Action(dl=(1, 2), ul=((0,), (1,)))
    validate_action(ok, 2, 3, 2)
    with pytest.raises(ValueError):
        validate_action(Action(dl=(1, 1), ul=((0,), (1,))), 2, 3, 2)
    with pytest.raises(ValueError):
        validate_action(Action(dl=(0, 3), ul=((0,), (1,))), 2, 3, 2)
    with pytest.raises(ValueError):
        validate_action(Action(dl=(1, 2), ul=((0,), (0,))), 2, 3, 2)
    with pytest.raises(ValueError):
        validate_action(Action(dl=(1, 2), ul=((0, 1), ())), 2, 3, 2)
    with pytest.raises(ValueError):
        validate_action(Action(dl=(1, 2), ul=((0,),)), 2, 3, 2)


def test_dl_slices_cover_band():
    a = Action(dl=(2, 1, 3), ul=((0,), (1,), (2,)))
    assert a.dl_slices() == [(0, 2), (2, 3), (3, 6)]
