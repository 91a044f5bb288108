"""Vacant spot extraction by dividing inter-pillar gaps into spot-wide slots.

Rows are y-bands supplied by configuration. Within a row, the gap between
consecutive pillars holds ``floor(gap / spot_width)`` candidate spots laid
left to right; any slack is left at the right end of the gap. A candidate is
occupied when a vehicle footprint covers enough of its width.
"""

import math
from dataclasses import dataclass

from parklot.annot_ingest import PILLAR, VEHICLE
from parklot.errors import OverlappingRowBands
from parklot.view_fusion import Rect

VACANT = "vacant"
OCCUPIED = "occupied"

DEFAULT_OCCUPANCY_FRACTION = 0.2
# Absorbs round-off in gap / width so exact multiples are not floored down.
COUNT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RowBand:
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not self.y_lo < self.y_hi:
            raise ValueError(f"row band [{self.y_lo}, {self.y_hi}] is empty")

    def contains(self, y):
        return self.y_lo <= y <= self.y_hi

    @property
    def center(self):
        return (self.y_lo + self.y_hi) / 2


@dataclass(frozen=True)
class Row:
    band: RowBand
    pillars: tuple = ()
    vehicles: tuple = ()


@dataclass(frozen=True)
class LotModel:
    rows: tuple
    spot_width: float
    lot_bounds: Rect
    unassigned: tuple = ()

    def __post_init__(self):
        if not self.spot_width > 0:
            raise ValueError("spot_width must be positive")

    @property
    def pillars(self):
        return [p for row in self.rows for p in row.pillars]

    @property
    def vehicles(self):
        return [v for row in self.rows for v in row.vehicles]

    @property
    def objects(self):
        return self.pillars + self.vehicles + list(self.unassigned)


@dataclass(frozen=True)
class VacancySpot:
    spot_id: int
    row_index: int
    x_lo: float
    x_hi: float
    status: str

    @property
    def center_x(self):
        return (self.x_lo + self.x_hi) / 2


@dataclass(frozen=True)
class VacancyMap:
    spots: tuple
    generated_from: str = ""
    generated_at: str = None

    @property
    def vacant(self):
        return [s for s in self.spots if s.status == VACANT]

    @property
    def occupied(self):
        return [s for s in self.spots if s.status == OCCUPIED]

    def spot(self, spot_id):
        return self.spots[spot_id]

    def with_status(self, spot_id, status):
        spots = list(self.spots)
        old = spots[spot_id]
        spots[spot_id] = VacancySpot(old.spot_id, old.row_index, old.x_lo, old.x_hi, status)
        return VacancyMap(tuple(spots), self.generated_from, self.generated_at)


def _x_key(obj):
    return (obj.floor_position.x, obj.floor_position.y, obj.footprint.as_tuple())


def _bounds(rects):
    return Rect(
        min(r.x_lo for r in rects),
        min(r.y_lo for r in rects),
        max(r.x_hi for r in rects),
        max(r.y_hi for r in rects),
    )


def assign_rows(objects, row_bands, spot_width):
    """Group objects into rows by the band containing their floor y.

    Objects outside every band land in ``LotModel.unassigned``. The lot
    bounds are the hull of all footprints and row bands.
    """
    bands = [b if isinstance(b, RowBand) else RowBand(*b) for b in row_bands]
    ordered = sorted(bands, key=lambda b: b.y_lo)
    for a, b in zip(ordered, ordered[1:]):
        if b.y_lo <= a.y_hi:
            raise OverlappingRowBands(f"row bands [{a.y_lo}, {a.y_hi}] and [{b.y_lo}, {b.y_hi}] overlap")

    members = [([], []) for _ in bands]
    unassigned = []
    for obj in objects:
        for i, band in enumerate(bands):
            if band.contains(obj.floor_position.y):
                members[i][0 if obj.class_label == PILLAR else 1].append(obj)
                break
        else:
            unassigned.append(obj)

    rows = tuple(
        Row(band, tuple(sorted(p, key=_x_key)), tuple(sorted(v, key=_x_key)))
        for band, (p, v) in zip(bands, members)
    )
    rects = [o.footprint for o in objects]
    if bands:
        lo = min(o.footprint.x_lo for o in objects) if objects else 0.0
        hi = max(o.footprint.x_hi for o in objects) if objects else 1.0
        rects += [Rect(lo, b.y_lo, hi, b.y_hi) for b in bands]
    lot_bounds = _bounds(rects) if rects else Rect(0.0, 0.0, 1.0, 1.0)
    unassigned.sort(key=lambda o: (o.class_label,) + _x_key(o))
    return LotModel(rows, spot_width, lot_bounds, tuple(unassigned))


def count_spots(gap, spot_width):
    if not spot_width > 0:
        raise ValueError("spot_width must be positive")
    if gap <= 0:
        return 0
    return math.floor(gap / spot_width + COUNT_TOLERANCE)


def candidate_spots(pillars, spot_width):
    """Spot intervals between each consecutive pair of (x-sorted) pillars."""
    intervals = []
    for prev, nxt in zip(pillars, pillars[1:]):
        start = prev.footprint.x_hi
        n = count_spots(nxt.footprint.x_lo - start, spot_width)
        intervals.extend((start + k * spot_width, start + (k + 1) * spot_width) for k in range(n))
    return intervals


def x_overlap(lo_a, hi_a, lo_b, hi_b):
    return max(0.0, min(hi_a, hi_b) - max(lo_a, lo_b))


def spot_status(interval, row_vehicles, occupancy_fraction=DEFAULT_OCCUPANCY_FRACTION, spot_width=None):
    if not 0 < occupancy_fraction <= 1:
        raise ValueError("occupancy_fraction must lie in (0, 1]")
    lo, hi = interval
    width = (hi - lo) if spot_width is None else spot_width
    need = occupancy_fraction * width
    for v in row_vehicles:
        if v.class_label == VEHICLE and x_overlap(lo, hi, v.footprint.x_lo, v.footprint.x_hi) >= need:
            return OCCUPIED
    return VACANT


def extract_vacancies(lot, occupancy_fraction=DEFAULT_OCCUPANCY_FRACTION, generated_from="", generated_at=None):
    spots = []
    for r, row in enumerate(lot.rows):
        for lo, hi in candidate_spots(row.pillars, lot.spot_width):
            status = spot_status((lo, hi), row.vehicles, occupancy_fraction, lot.spot_width)
            spots.append(VacancySpot(len(spots), r, lo, hi, status))
    return VacancyMap(tuple(spots), generated_from, generated_at)
