from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parklot.annot_ingest import PILLAR, VEHICLE
from parklot.errors import OverlappingRowBands
from parklot.vacancy import (
    OCCUPIED,
    VACANT,
    assign_rows,
    candidate_spots,
    count_spots,
    extract_vacancies,
    spot_status,
)

from conftest import make_object


def pillar(x_lo, x_hi, y=1.0):
    return make_object(PILLAR, x_lo, x_hi, y, y + 0.8)


def vehicle(x_lo, x_hi, y=1.0):
    return make_object(VEHICLE, x_lo, x_hi, y, y + 4.5)


class TestAssignRows:
    def test_in_band(self):
        lot = assign_rows([pillar(0, 1, y=2)], [(0, 4)], 2.5)
        assert len(lot.rows[0].pillars) == 1 and not lot.unassigned

    def test_unassigned(self):
        lot = assign_rows([pillar(0, 1, y=10)], [(0, 4), (5, 9)], 2.5)
        assert len(lot.unassigned) == 1 and not lot.pillars

    def test_sorted_by_x(self):
        lot = assign_rows([pillar(7, 8), pillar(3, 4), pillar(11, 12)], [(0, 4)], 2.5)
        assert [p.footprint.x_lo for p in lot.rows[0].pillars] == [3, 7, 11]

    def test_overlapping_bands(self):
        with pytest.raises(OverlappingRowBands):
            assign_rows([], [(0, 5), (4, 9)], 2.5)

    def test_bounds_cover_footprints(self):
        objs = [pillar(0, 1), vehicle(3, 5, y=1), pillar(-2, -1, y=30)]
        lot = assign_rows(objs, [(0, 6)], 2.5)
        b = lot.lot_bounds
        for o in objs:
            f = o.footprint
            assert b.x_lo <= f.x_lo and f.x_hi <= b.x_hi and b.y_lo <= f.y_lo and f.y_hi <= b.y_hi


@pytest.mark.parametrize("gap, width, n", [(10, 2.5, 4), (9.9, 2.5, 3), (2.0, 2.5, 0), (0, 2.5, 0), (-1, 2.5, 0)])
def test_count_spots(gap, width, n):
    assert count_spots(gap, width) == n


def brute_count(gap, width):
    n = 0
    while gap >= width:
        gap -= width
        n += 1
    return n


@settings(max_examples=300)
@given(st.integers(0, 2000), st.sampled_from([Fraction(2), Fraction(5, 2), Fraction(3), Fraction(7, 4)]))
def test_count_spots_matches_exact_subtraction(tenths, width):
    gap = Fraction(tenths, 10)
    assert count_spots(float(gap), float(width)) == brute_count(gap, width)


class TestCandidates:
    def test_four_spots(self):
        spots = candidate_spots([pillar(0, 1), pillar(11, 12)], 2.5)
        assert spots == [(1, 3.5), (3.5, 6), (6, 8.5), (8.5, 11)]

    def test_single_pillar(self):
        assert candidate_spots([pillar(0, 1)], 2.5) == []

    def test_slack_right(self):
        spots = candidate_spots([pillar(0, 1), pillar(7, 8)], 2.5)
        assert spots == [(1, 3.5), (3.5, 6)]
        assert 7 - spots[-1][1] == pytest.approx(1.0)


class TestSpotStatus:
    def test_occupied(self):
        assert spot_status((3.5, 6.0), [vehicle(3.6, 5.9)], 0.2) == OCCUPIED

    def test_empty_row(self):
        assert spot_status((3.5, 6.0), [], 0.2) == VACANT

    def test_threshold_edge(self):
        assert spot_status((3.5, 6.0), [vehicle(5.7, 8.0)], 0.2) == VACANT


def brute_status(interval, vehicles, fraction, width, step=Fraction(1, 100)):
    """Sweep x at 0.01 and measure covered length inside the interval."""
    lo, hi = (Fraction(v).limit_denominator(1000) for v in interval)
    for v in vehicles:
        v_lo = Fraction(v.footprint.x_lo).limit_denominator(1000)
        v_hi = Fraction(v.footprint.x_hi).limit_denominator(1000)
        covered = 0
        x = lo
        while x < hi:
            if v_lo <= x and x + step <= v_hi:
                covered += step
            x += step
        if covered >= Fraction(fraction).limit_denominator(1000) * Fraction(width).limit_denominator(1000):
            return OCCUPIED
    return VACANT


class TestExtract:
    pillars = [pillar(0, 1), pillar(11, 12)]

    def test_empty_lot(self):
        vmap = extract_vacancies(assign_rows(self.pillars, [(0, 6)], 2.5))
        assert [s.status for s in vmap.spots] == [VACANT] * 4
        assert [s.spot_id for s in vmap.spots] == [0, 1, 2, 3]

    def test_vehicles_in_spots_0_and_2(self):
        cars = [vehicle(1.25, 3.25), vehicle(6.25, 8.25)]
        lot = assign_rows(self.pillars + cars, [(0, 6)], 2.5)
        vmap = extract_vacancies(lot, 0.2)
        expected = [brute_status((s.x_lo, s.x_hi), cars, 0.2, 2.5) for s in vmap.spots]
        assert expected == [OCCUPIED, VACANT, OCCUPIED, VACANT]
        assert [s.status for s in vmap.spots] == expected

    def test_fully_parked(self):
        cars = [vehicle(1.25 + 2.5 * k, 3.25 + 2.5 * k) for k in range(4)]
        vmap = extract_vacancies(assign_rows(self.pillars + cars, [(0, 6)], 2.5))
        assert vmap.vacant == []

    def test_row_major_ids(self):
        objs = [pillar(0, 1), pillar(6, 7), pillar(0, 1, y=11), pillar(6, 7, y=11)]
        vmap = extract_vacancies(assign_rows(objs, [(0, 6), (10, 16)], 2.5))
        assert [(s.spot_id, s.row_index) for s in vmap.spots] == [(0, 0), (1, 0), (2, 1), (3, 1)]


@st.composite
def rows_of_lots(draw):
    xs = sorted(draw(st.lists(st.floats(0, 60), min_size=2, max_size=6, unique=True)))
    pillars = [pillar(x, x + 0.8) for x in xs]
    cars = []
    for _ in range(draw(st.integers(0, 8))):
        x = draw(st.floats(-2, 62))
        cars.append(vehicle(x, x + 2.0))
    extra = draw(st.floats(-2, 62))
    return pillars, cars, vehicle(extra, extra + 2.0)


@settings(max_examples=200, deadline=None)
@given(rows_of_lots(), st.sampled_from([2.0, 2.5, 3.0]))
def test_vacancy_properties(lot_parts, width):
    pillars, cars, extra = lot_parts
    lot = assign_rows(pillars + cars, [(0, 8)], width)
    vmap = extract_vacancies(lot, 0.2)
    row_pillars = lot.rows[0].pillars
    total = sum(
        count_spots(b.footprint.x_lo - a.footprint.x_hi, width) for a, b in zip(row_pillars, row_pillars[1:])
    )
    assert len(vmap.vacant) + len(vmap.occupied) == total
    for s in vmap.vacant:
        for c in cars:
            overlap = max(0.0, min(s.x_hi, c.footprint.x_hi) - max(s.x_lo, c.footprint.x_lo))
            assert overlap < 0.2 * width
    for s in vmap.spots:
        assert s.x_hi - s.x_lo == pytest.approx(width, abs=1e-9)
    more = extract_vacancies(assign_rows(pillars + cars + [extra], [(0, 8)], width), 0.2)
    assert len(more.vacant) <= len(vmap.vacant)
