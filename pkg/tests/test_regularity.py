import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salemcantor.errors import ConfigError
from salemcantor.regularity import (
    IntervalQuery,
    bracket_limit_measure,
    limit_measure_of_interval,
    measure_of_interval,
    regularity_scan,
)


def cell(s, N, a):
    return IntervalQuery.from_endpoints(Fraction(a, s.Psi[N]), Fraction(a + 1, s.Psi[N]))


def test_full_interval_and_single_cell(thm2_tree):
    s = thm2_tree.schedule
    whole = IntervalQuery(Fraction(1, 2), Fraction(1, 2))
    for N in (0, 5, 16):
        assert measure_of_interval(thm2_tree, N, whole) == 1
    assert limit_measure_of_interval(thm2_tree, whole) == 1
    a = int(thm2_tree.nodes(12)[3])
    assert measure_of_interval(thm2_tree, 12, cell(s, 12, a)) == Fraction(1, s.T[12])
    N0 = s.start_level
    b = int(thm2_tree.nodes(N0)[0])
    assert limit_measure_of_interval(thm2_tree, cell(s, N0, b)) == Fraction(1, s.T[N0])


def test_disjoint_interval_has_zero_mass(thm2_tree):
    s = thm2_tree.schedule
    nodes = set(thm2_tree.nodes(10).tolist())
    gap = next(a for a in range(s.Psi[10]) if a not in nodes)
    assert measure_of_interval(thm2_tree, 10, cell(s, 10, gap)) == 0


def test_straddle_is_linear(thm3_tree):
    s = thm3_tree.schedule
    a = int(thm3_tree.nodes(10)[0])
    lo = Fraction(4 * a + 1, 4 * s.Psi[10])
    I = IntervalQuery.from_endpoints(lo, Fraction(a + 1, s.Psi[10]))
    assert measure_of_interval(thm3_tree, 10, I) == Fraction(3, 4) / s.T[10]


def test_refinement_invariance(thm3_tree):
    s = thm3_tree.schedule
    rng = np.random.default_rng(0)
    for _ in range(50):
        N = int(rng.integers(s.start_level, 15))
        i, j = sorted(rng.integers(0, s.Psi[N] + 1, size=2).tolist())
        if i == j:
            continue
        I = IntervalQuery.from_endpoints(Fraction(i, s.Psi[N]), Fraction(j, s.Psi[N]))
        vals = {measure_of_interval(thm3_tree, M, I) for M in (N, N + 2, thm3_tree.depth)}
        assert len(vals) == 1
        assert vals == {limit_measure_of_interval(thm3_tree, I)}


def test_unaligned_interval_rejected(thm3_tree):
    with pytest.raises(ConfigError):
        limit_measure_of_interval(thm3_tree, IntervalQuery(Fraction(1, 3), Fraction(1, 7)))


def test_bracket_contains_step_masses(thm1_tree):
    rng = np.random.default_rng(2)
    D = thm1_tree.depth
    for _ in range(50):
        c = Fraction(int(rng.integers(1, 999)), 1000)
        h = Fraction(int(rng.integers(1, 200)), 10000)
        I = IntervalQuery(c, h)
        lo, hi = bracket_limit_measure(thm1_tree, D, I)
        assert lo <= measure_of_interval(thm1_tree, D, I) <= hi


@settings(max_examples=40, deadline=None)
@given(cuts=st.lists(st.integers(1, (1 << 12) - 1), min_size=1, max_size=8, unique=True))
def test_additivity_over_aligned_partition(thm2_tree, cuts):
    s = thm2_tree.schedule
    N = 12
    pts = [0] + sorted(cuts) + [s.Psi[N]]
    pieces = [
        limit_measure_of_interval(thm2_tree, IntervalQuery.from_endpoints(Fraction(a, s.Psi[N]), Fraction(b, s.Psi[N])))
        for a, b in zip(pts, pts[1:])
    ]
    assert sum(pieces) == 1


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_two_cell_bound(thm3_tree, data):
    s = thm3_tree.schedule
    N = data.draw(st.integers(1, 15))
    num = data.draw(st.integers(0, 4 * s.Psi[N]))
    width = data.draw(st.integers(1, 511))
    # |I| = width / (512 Psi(N)) < 1/Psi(N)
    I = IntervalQuery(Fraction(num, 4 * s.Psi[N]), Fraction(width, 1024 * s.Psi[N]))
    assert measure_of_interval(thm3_tree, N, I) <= Fraction(2, s.T[N])


def test_scan_bands(thm2_tree, thm3_tree):
    for tree, depth, delta in ((thm2_tree, 10, 6), (thm3_tree, 14, 2)):
        rep = regularity_scan(tree, depth, 16, delta=delta)
        assert rep.band_lower > 0 and rep.width <= 16
        assert all(x.contains_cell for x in rep.samples if x.centered)
        assert all(x.mass_lower >= Fraction(1, tree.schedule.T[x.scale + 1]) for x in rep.samples if x.centered)
        assert all(2 * x.halfwidth < Fraction(1, 2) for x in rep.samples)
        ratios = [x.ratio_upper for x in rep.samples]
        assert rep.band_upper == max(ratios)


def test_scan_envelope_kinds(thm2_tree, thm3_tree, thm1_tree, second_part_tree):
    assert regularity_scan(thm2_tree, 9, 4, delta=6).envelope == "power-over-log"
    assert regularity_scan(thm3_tree, 13, 4, delta=2).envelope == "pure-power"
    assert regularity_scan(thm1_tree, None, 4, delta=2).envelope == "power-over-log"
    assert regularity_scan(second_part_tree, None, 4, delta=2).envelope == "pure-power"


def test_scan_refuses_missing_margin(thm2_tree):
    with pytest.raises(ConfigError):
        regularity_scan(thm2_tree, 14, 4, delta=6)


def test_scan_csv(tmp_path, thm3_tree):
    rep = regularity_scan(thm3_tree, 13, 4, delta=2)
    path = tmp_path / "r.csv"
    rep.write_csv(path, {"seed": 3})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#") and lines[1].startswith("scale,")
    assert len(lines) == 2 + len(rep.samples)
    assert math.isfinite(rep.summary()["width"])
