"""Depth proxies for detected objects.

Two estimators are provided: the inverse of the distance from the camera
origin to the object's centroid, and the inverse of the bounding-box area.
Neither is a metric depth; both are ordinal proxies, always positive.
"""

import math
from dataclasses import dataclass

from parklot.errors import NonFiniteInput, NonPositiveArea

EPSILON_FLOOR = 1e-6
EQUALITY_RTOL = 1e-9

CENTROID_INVERSE = "centroid_inverse"
AREA_INVERSE = "area_inverse"

MIDPOINT = "midpoint"
HALF_EXTENT = "paper_literal"


@dataclass(frozen=True)
class PlanarPoint:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


ORIGIN = PlanarPoint(0.0, 0.0)


@dataclass(frozen=True)
class DepthEstimate:
    method: str
    value: float
    source_quantity: float
    clamped: bool = False


def centroid(box, mode=MIDPOINT):
    """Representative point of a box.

    ``paper_literal`` returns the half-extents of the box,
    which is not the geometric centre unless the box touches the origin.
    """
    if mode == MIDPOINT:
        return PlanarPoint((box.xmin + box.xmax) / 2, (box.ymin + box.ymax) / 2)
    if mode == HALF_EXTENT:
        return PlanarPoint((box.xmax - box.xmin) / 2, (box.ymax - box.ymin) / 2)
    raise ValueError(f"unknown centroid mode {mode!r}")


def euclidean_distance(p, origin=ORIGIN):
    return math.hypot(p.x - origin.x, p.y - origin.y)


def inverse_depth(d):
    if not math.isfinite(d):
        raise NonFiniteInput(f"distance {d!r} is not finite")
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    q = max(d, EPSILON_FLOOR)
    return DepthEstimate(CENTROID_INVERSE, 1.0 / q, q, clamped=d < EPSILON_FLOOR)


def bbox_area(box):
    return (box.xmax - box.xmin) * (box.ymax - box.ymin)


def area_depth(a):
    if not math.isfinite(a):
        raise NonFiniteInput(f"area {a!r} is not finite")
    if a <= 0:
        raise NonPositiveArea(f"area must be positive, got {a}")
    q = max(a, EPSILON_FLOOR)
    return DepthEstimate(AREA_INVERSE, 1.0 / q, q, clamped=a < EPSILON_FLOOR)


@dataclass(frozen=True)
class ComparisonReport:
    distance_a: float
    distance_b: float
    z_a: float
    z_b: float
    area_a: float
    area_b: float
    z_area_a: float
    z_area_b: float
    case: str  # "case1", "case2" or "other"


def _same(u, v):
    return math.isclose(u, v, rel_tol=EQUALITY_RTOL, abs_tol=0.0)


def lemma1_compare(box_a, box_b, origin=ORIGIN, mode=MIDPOINT):
    """Evaluate both depth methods on two boxes and classify the pair.

    case1: equal centroid distance, different area.
    case2: equal area, different centroid distance.
    """
    da = euclidean_distance(centroid(box_a, mode), origin)
    db = euclidean_distance(centroid(box_b, mode), origin)
    aa, ab = bbox_area(box_a), bbox_area(box_b)
    same_d, same_a = _same(da, db), _same(aa, ab)
    if same_d and not same_a:
        case = "case1"
    elif same_a and not same_d:
        case = "case2"
    else:
        case = "other"
    return ComparisonReport(
        distance_a=da,
        distance_b=db,
        z_a=inverse_depth(da).value,
        z_b=inverse_depth(db).value,
        area_a=aa,
        area_b=ab,
        z_area_a=area_depth(aa).value,
        z_area_b=area_depth(ab).value,
        case=case,
    )
