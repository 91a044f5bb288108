"""Ground-plane homographies (IPM) and multi-view fusion of detections.

Each camera carries a 3x3 homography mapping image pixels to lot-floor
coordinates. Detections are projected through it, given a floor footprint,
and duplicates seen by several cameras are collapsed, keeping the detection
with the largest pixel area.
"""

import math
from dataclasses import dataclass

import numpy as np

from parklot.annot_ingest import PILLAR, VEHICLE
from parklot.depth_model import (
    AREA_INVERSE,
    CENTROID_INVERSE,
    PlanarPoint,
    area_depth,
    bbox_area,
    euclidean_distance,
    inverse_depth,
)
from parklot.errors import (
    ConfigError,
    DegenerateConfiguration,
    InsufficientPoints,
    PointAtInfinity,
)

W_EPS = 1e-12
DET_EPS = 1e-12

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_DEPTHS = {VEHICLE: 4.5, PILLAR: 0.8}


@dataclass(frozen=True)
class Rect:
    x_lo: float
    y_lo: float
    x_hi: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError(f"rectangle {self.as_tuple()} has non-positive extent")

    @property
    def area(self):
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    def contains(self, p):
        return self.x_lo <= p.x <= self.x_hi and self.y_lo <= p.y <= self.y_hi

    def as_tuple(self):
        return (self.x_lo, self.y_lo, self.x_hi, self.y_hi)


@dataclass(frozen=True)
class Correspondence:
    image_point: PlanarPoint
    floor_point: PlanarPoint


@dataclass(frozen=True, eq=False)
class CameraView:
    view_id: int
    image_width: float
    image_height: float
    homography: np.ndarray
    camera_floor_position: PlanarPoint

    def __post_init__(self):
        h = normalize_homography(np.asarray(self.homography, dtype=float))
        if abs(np.linalg.det(h)) <= DET_EPS:
            raise DegenerateConfiguration(f"camera {self.view_id}: homography is singular")
        h.setflags(write=False)
        object.__setattr__(self, "homography", h)

    def __eq__(self, other):
        if not isinstance(other, CameraView):
            return NotImplemented
        return (
            self.view_id == other.view_id
            and self.image_width == other.image_width
            and self.image_height == other.image_height
            and self.camera_floor_position == other.camera_floor_position
            and np.array_equal(self.homography, other.homography)
        )

    __hash__ = None

    @property
    def inverse(self):
        return normalize_homography(np.linalg.inv(self.homography))


@dataclass(frozen=True)
class Object3D:
    class_label: str
    floor_position: PlanarPoint
    z: float
    pixel_area: float
    footprint: Rect
    source_view: int

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError(f"depth must be positive, got {self.z}")
        if not self.footprint.contains(self.floor_position):
            raise ValueError("floor position lies outside the footprint")


@dataclass(frozen=True)
class FusionParams:
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    vehicle_depth: float = DEFAULT_DEPTHS[VEHICLE]
    pillar_depth: float = DEFAULT_DEPTHS[PILLAR]

    def depth_for(self, class_label):
        return self.vehicle_depth if class_label == VEHICLE else self.pillar_depth


# -- homography --------------------------------------------------------------


def normalize_homography(h):
    h = np.array(h, dtype=float)
    if abs(h[2, 2]) > W_EPS:
        h = h / h[2, 2]
    else:
        h = h / np.linalg.norm(h)
    return h


def _hartley(points):
    pts = np.asarray(points, dtype=float)
    mean = pts.mean(axis=0)
    dist = np.sqrt(((pts - mean) ** 2).sum(axis=1)).mean()
    if dist <= 0:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2) / dist
    t = np.array([[s, 0, -s * mean[0]], [0, s, -s * mean[1]], [0, 0, 1]])
    homog = np.column_stack([pts, np.ones(len(pts))]) @ t.T
    return homog[:, :2], t


def _has_collinear_triple(pts, tol=1e-9):
    n = len(pts)
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-300)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c = pts[i], pts[j], pts[k]
                cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
                if abs(cross) <= tol * scale * scale:
                    return True
    return False


def fit_homography(correspondences):
    """Normalized DLT fit of the image -> floor homography, scaled so h33 = 1.

    Exactly four correspondences must be in general position; with more,
    the least-squares system only has to be of full rank.
    """
    corr = list(correspondences)
    if len(corr) < 4:
        raise InsufficientPoints(f"need at least 4 correspondences, got {len(corr)}")
    src = np.array([[c.image_point.x, c.image_point.y] for c in corr], dtype=float)
    dst = np.array([[c.floor_point.x, c.floor_point.y] for c in corr], dtype=float)
    if not (np.isfinite(src).all() and np.isfinite(dst).all()):
        raise DegenerateConfiguration("non-finite correspondence coordinate")
    if len(corr) == 4 and (_has_collinear_triple(src) or _has_collinear_triple(dst)):
        raise DegenerateConfiguration("three of the four correspondences are collinear")

    src_n, t_src = _hartley(src)
    dst_n, t_dst = _hartley(dst)
    rows = []
    for (x, y), (u, v) in zip(src_n, dst_n):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    a = np.asarray(rows)
    _, s, vt = np.linalg.svd(a)
    if s[0] <= 0 or s[7] / s[0] < 1e-10:
        raise DegenerateConfiguration("correspondence system is rank deficient")
    h_n = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_n @ t_src
    if abs(h[2, 2]) <= W_EPS * np.abs(h).max():
        raise DegenerateConfiguration("fitted homography has h33 = 0")
    h = h / h[2, 2]
    if abs(np.linalg.det(h)) <= DET_EPS:
        raise DegenerateConfiguration("fitted homography is singular")
    return h


def apply_ipm(h, p):
    x, y = p
    hx = h[0, 0] * x + h[0, 1] * y + h[0, 2]
    hy = h[1, 0] * x + h[1, 1] * y + h[1, 2]
    w = h[2, 0] * x + h[2, 1] * y + h[2, 2]
    if abs(w) < W_EPS:
        raise PointAtInfinity(f"point ({x}, {y}) maps to infinity (w = {w})")
    return PlanarPoint(float(hx / w), float(hy / w))


# -- projection --------------------------------------------------------------


def project_object(view, box, depth_mode=CENTROID_INVERSE, params=None):
    """Lift one detection into the lot frame.

    The bottom edge of the box is taken as the object's ground contact line.
    Its floor image fixes the x extent; the footprint then extends away from
    the camera by the class's modelled depth.
    """
    params = params or FusionParams()
    box.check_bounds(view.image_width, view.image_height)
    h = view.homography
    left = apply_ipm(h, (box.xmin, box.ymax))
    right = apply_ipm(h, (box.xmax, box.ymax))
    anchor = apply_ipm(h, ((box.xmin + box.xmax) / 2, box.ymax))

    x_lo, x_hi = min(left.x, right.x), max(left.x, right.x)
    y_lo, y_hi = min(left.y, right.y), max(left.y, right.y)
    if not x_hi > x_lo:
        raise DegenerateConfiguration(
            f"camera {view.view_id}: box bottom edge maps to a segment with no x extent"
        )
    # The anchor lies on the segment in exact arithmetic; clamp away round-off.
    anchor = PlanarPoint(min(max(anchor.x, x_lo), x_hi), min(max(anchor.y, y_lo), y_hi))
    depth = params.depth_for(box.class_label)
    if anchor.y >= view.camera_floor_position.y:
        y_hi = y_hi + depth
    else:
        y_lo = y_lo - depth
    footprint = Rect(x_lo, y_lo, x_hi, y_hi)

    area = bbox_area(box)
    if depth_mode == CENTROID_INVERSE:
        z = inverse_depth(euclidean_distance(anchor, view.camera_floor_position)).value
    elif depth_mode == AREA_INVERSE:
        z = area_depth(area).value
    else:
        raise ValueError(f"unknown depth mode {depth_mode!r}")
    return Object3D(box.class_label, anchor, z, area, footprint, view.view_id)


def project_view(view, boxes, depth_mode=CENTROID_INVERSE, params=None):
    return [project_object(view, b, depth_mode, params) for b in boxes]


# -- fusion ------------------------------------------------------------------


def footprint_iou(a, b):
    iw = min(a.x_hi, b.x_hi) - max(a.x_lo, b.x_lo)
    ih = min(a.y_hi, b.y_hi) - max(a.y_lo, b.y_lo)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def _priority(obj):
    # Smallest key wins a duplicate cluster.
    return (
        -obj.pixel_area,
        obj.source_view,
        obj.floor_position.x,
        obj.floor_position.y,
        obj.footprint.as_tuple(),
        obj.z,
    )


def canonical_order(obj):
    return (obj.class_label, obj.floor_position.x, obj.floor_position.y, _priority(obj))


def fuse_views(per_view_objects, iou_threshold=DEFAULT_IOU_THRESHOLD):
    """Collapse same-class duplicates across views.

    Objects whose footprints overlap with IoU >= ``iou_threshold`` are
    linked; each connected cluster keeps only its largest-pixel-area member
    (ties: lowest view id, then lowest floor x).
    """
    if not 0 < iou_threshold <= 1:
        raise ValueError("iou_threshold must lie in (0, 1]")
    objects = sorted((o for view in per_view_objects for o in view), key=canonical_order)
    parent = list(range(len(objects)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(objects)):
        for j in range(i + 1, len(objects)):
            a, b = objects[i], objects[j]
            if a.class_label != b.class_label:
                continue
            if footprint_iou(a.footprint, b.footprint) >= iou_threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    best = {}
    for i, obj in enumerate(objects):
        root = find(i)
        if root not in best or _priority(obj) < _priority(best[root]):
            best[root] = obj
    return sorted(best.values(), key=canonical_order)


# -- lot configuration -------------------------------------------------------


def _point(value, where):
    try:
        x, y = value
        return PlanarPoint(float(x), float(y))
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected [x, y], got {value!r}") from None


def camera_from_config(entry):
    """Build a :class:`CameraView` from one ``cameras[]`` entry of a lot config."""
    try:
        view_id = int(entry["view_id"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"camera entry without a valid view_id: {entry!r}") from None
    where = f"camera {view_id}"
    try:
        width, height = (float(v) for v in entry["image_size"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{where}: image_size must be [width, height]") from None
    if "camera_floor_position" not in entry:
        raise ConfigError(f"{where}: missing camera_floor_position")
    cam_pos = _point(entry["camera_floor_position"], f"{where} camera_floor_position")
    raw = entry.get("correspondences")
    if not raw:
        raise ConfigError(f"{where}: missing correspondences")
    corr = []
    for i, c in enumerate(raw):
        try:
            corr.append(
                Correspondence(
                    _point(c["image"], f"{where} correspondence {i}"),
                    _point(c["floor"], f"{where} correspondence {i}"),
                )
            )
        except (KeyError, TypeError):
            raise ConfigError(f"{where} correspondence {i}: need image and floor") from None
    try:
        h = fit_homography(corr)
    except (InsufficientPoints, DegenerateConfiguration) as exc:
        raise ConfigError(f"{where}: {exc.args[0]}") from None
    return CameraView(view_id, width, height, h, cam_pos)


def camera_to_config(view, correspondences):
    return {
        "view_id": view.view_id,
        "image_size": [view.image_width, view.image_height],
        "camera_floor_position": [view.camera_floor_position.x, view.camera_floor_position.y],
        "correspondences": [
            {"image": [c.image_point.x, c.image_point.y], "floor": [c.floor_point.x, c.floor_point.y]}
            for c in correspondences
        ],
    }


def fusion_params_from_config(section):
    section = section or {}
    unknown = set(section) - {"iou_threshold", "vehicle_depth", "pillar_depth"}
    if unknown:
        raise ConfigError(f"fusion: unknown keys {sorted(unknown)}")
    try:
        params = FusionParams(**{k: float(v) for k, v in section.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"fusion: {exc}") from None
    if not 0 < params.iou_threshold <= 1:
        raise ConfigError("fusion.iou_threshold must lie in (0, 1]")
    if params.vehicle_depth <= 0 or params.pillar_depth <= 0:
        raise ConfigError("fusion depths must be positive")
    return params
