import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salemcantor.errors import ConfigError, InfeasibleScheduleError
from salemcantor.schedule import (
    BranchingSchedule,
    PhiSpec,
    bernstein_feasible,
    branching_number,
    build_dyadic_schedule,
    build_flat_schedule,
    build_general_schedule,
    min_start_level,
    rounding_drift_demo,
)


def _log_theta_products(s):
    out, acc = [], 0.0
    for N in range(1, s.levels + 1):
        acc += math.log(s.t[N]) - s.alpha * math.log(s.psi[N])
        out.append(acc)
    return out


def test_exact_products_match_recomputation():
    for s in (build_dyadic_schedule(0.5, 20), build_general_schedule(0.5, 0.5, PhiSpec(), False, 10)):
        P, T = 1, 1
        for N in range(1, s.levels + 1):
            P *= s.psi[N]
            T *= s.t[N]
            assert s.Psi[N] == P and s.T[N] == T


def test_dyadic_band_tracks_log_target():
    s = build_dyadic_schedule(0.5, 20)
    logs = _log_theta_products(s)
    dev = [logs[N - 1] - math.log(math.log(2.0 ** N * 8)) for N in range(1, 21)]
    assert max(dev) - min(dev) <= math.log(2) + 0.5 * math.log(2) + abs(dev[0])
    assert set(s.t[1:]) <= {1, 2}
    assert all(p == 2 for p in s.psi[1:])


def test_first_theta_takes_one_of_two_values():
    s = build_dyadic_schedule(0.5, 8)
    assert s.theta(1) == pytest.approx(2 ** -0.5) or s.theta(1) == pytest.approx(2 ** 0.5)


def test_dyadic_T_growth_alpha_09():
    s = build_dyadic_schedule(0.9, 30)
    ratios = [s.T[N] / (2 ** (N * 0.9) * N) for N in range(s.start_level, 31)]
    assert max(ratios) / min(ratios) < 8


def test_flat_band_and_first_two_levels():
    s = build_flat_schedule(0.5, 20)
    logs = _log_theta_products(s)
    assert max(abs(x) for x in logs) <= math.log(2) + 0.5 * math.log(2)
    assert sorted(s.t[1:3]) == [1, 2]


def test_flat_empty_product_is_one():
    s = build_flat_schedule(0.5, 20)
    assert s.T[0] == 1 and s.Psi[0] == 1


def test_branching_number_at_four():
    # ceil(sqrt(4 log 2)) + 2 = ceil(1.665..) + 2
    assert branching_number(PhiSpec(), 4) == 4
    with mpmath.workprec(200):
        expect = int(mpmath.ceil(mpmath.sqrt(4 * mpmath.log(2)))) + 2
    assert expect == 4


def test_general_schedule_constraints():
    s = build_general_schedule(0.5, 0.5, PhiSpec(), False, 10)
    assert s.psi[4] == 4
    for N in range(1, s.levels + 1):
        if N <= s.band_start:
            assert s.t[N] == s.tau[N] == 1
        else:
            assert 1 <= s.tau[N] <= s.t[N] <= s.psi[N] - 2
    assert all(a <= b for a, b in zip(s.psi[1:], s.psi[2:]))
    assert s.start_level >= s.band_start


def test_general_want2_band():
    for s in (
        build_general_schedule(0.5, 0.5, PhiSpec(), False, 10),
        build_general_schedule(0.6, 0.4, PhiSpec(), True, 10),
    ):
        vals = [
            math.log(s.tau_product(N)) - math.log(s.T[N]) + s.beta / 2 * math.log(s.Psi[N])
            for N in range(s.start_level + 1, s.levels + 1)
        ]
        assert max(vals) - min(vals) < 1.0


def test_bernstein_feasibility_past_start_level():
    for s in (build_dyadic_schedule(0.3, 16), build_flat_schedule(0.8, 16), build_general_schedule(0.5, 0.5, PhiSpec(), False, 10)):
        for N in range(s.start_level + 1, s.levels + 1):
            assert 4 * math.log(8 * s.Psi[N]) <= s.T[N - 1]
            assert bernstein_feasible(s.T[N - 1], s.Psi[N])


def test_min_start_level_scan():
    s = build_dyadic_schedule(0.5, 20)
    n0 = min_start_level(s)
    for N in range(n0 + 1, 21):
        assert 4 * math.log(2.0 ** N * 8) <= s.T[N - 1]
    assert n0 == 0 or 4 * math.log(2.0 ** n0 * 8) > s.T[n0 - 1]
    assert s.start_level >= n0


def test_all_ones_schedule_is_infeasible():
    L = 8
    s = BranchingSchedule("thm3", 0.5, 0.5, L, (1,) + (2,) * (L + 1), (1,) * (L + 1), (0,) * (L + 1))
    with pytest.raises(InfeasibleScheduleError):
        min_start_level(s)


def test_invalid_inputs():
    with pytest.raises(ConfigError):
        build_dyadic_schedule(1.2, 10)
    with pytest.raises(ConfigError):
        build_general_schedule(0.5, 0.6, PhiSpec(), False, 10)
    with pytest.raises(ConfigError):
        build_general_schedule(0.5, 0.5, PhiSpec(), True, 10)
    with pytest.raises(ConfigError):
        PhiSpec("log-power", epsilon=0.0)


def test_rounding_drift_examples():
    assert rounding_drift_demo(0.5, 1) == 0.0
    expect = math.log(8 / (math.sqrt(2) * math.sqrt(3) * 2))
    assert rounding_drift_demo(0.5, 4) == pytest.approx(expect, abs=1e-12)


def test_rounding_drift_perfect_squares_handled_exactly():
    # every perfect square contributes exactly zero
    assert rounding_drift_demo(0.5, 9) - rounding_drift_demo(0.5, 8) == pytest.approx(0.0, abs=1e-12)


def test_phi_parse_roundtrip():
    for text in ("log:1", "log:0.5", "loglog:2", "table:2=1,10=3"):
        p = PhiSpec.parse(text)
        assert PhiSpec.parse(p.descriptor()) == p
    with pytest.raises(ConfigError):
        PhiSpec.parse("nope:1")


def test_schedule_dict_roundtrip():
    s = build_general_schedule(0.6, 0.4, PhiSpec(), True, 10)
    t = BranchingSchedule.from_dict(s.to_dict())
    assert t == s and t.digest() == s.digest() and t.start_level == s.start_level


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.1, 0.95), levels=st.integers(14, 30))
def test_binary_schedule_invariants(alpha, levels):
    for build in (build_dyadic_schedule, build_flat_schedule):
        try:
            s = build(alpha, levels)
        except InfeasibleScheduleError:
            continue
        assert set(s.t[1:]) <= {1, 2}
        for N in range(s.start_level + 1, levels + 1):
            assert bernstein_feasible(s.T[N - 1], s.Psi[N])


@settings(max_examples=15, deadline=None)
@given(
    alpha=st.floats(0.3, 0.9),
    ratio=st.floats(0.5, 1.0),
    eps=st.floats(0.5, 2.0),
)
def test_general_schedule_invariants(alpha, ratio, eps):
    beta = alpha * ratio
    try:
        s = build_general_schedule(alpha, beta, PhiSpec("log-power", epsilon=eps), False, 10)
    except InfeasibleScheduleError:
        return
    for N in range(s.band_start + 1, s.levels + 1):
        assert 1 <= s.tau[N] <= s.t[N] <= s.psi[N] - 2
    assert all(a <= b for a, b in zip(s.psi[1:], s.psi[2:]))


@settings(max_examples=30, deadline=None)
@given(xs=st.lists(st.floats(2.0, 1e12), min_size=1, max_size=10))
def test_phi_doubling_bounded(xs):
    assert PhiSpec().doubling_gap(xs) <= math.log(2) + 1e-9
