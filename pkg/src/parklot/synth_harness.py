"""Synthetic ground-truth lots, per-camera annotation rendering, and metrics.

The generator stands in for a simulated garage plus a detector: it places
pillars on a grid, parks vehicles at random, and projects every object into
each camera through the inverse of its ground-plane homography. Optional
noise jitters, drops and duplicates the resulting boxes.
"""

from dataclasses import asdict, dataclass

import numpy as np

from parklot.annot_ingest import PILLAR, VEHICLE, Annotation, BBox2D, write_voc_xml
from parklot.depth_model import PlanarPoint, euclidean_distance, inverse_depth
from parklot.errors import EmptyTruth, GridMismatch, InvalidSpec
from parklot.vacancy import (
    OCCUPIED,
    VACANT,
    LotModel,
    Row,
    RowBand,
    VacancyMap,
    VacancySpot,
    candidate_spots,
)
from parklot.view_fusion import CameraView, Correspondence, Object3D, Rect, apply_ipm

BAND_MARGIN = 0.25
MIN_BOX_EXTENT = 4.0
TRUTH_VIEW = -1


@dataclass(frozen=True)
class LotSpec:
    rows: int = 2
    pillars_per_row: int = 4
    pillar_pitch: float = 10.8
    spot_width: float = 2.5
    occupancy_probability: float = 0.5
    seed: int = 0
    pillar_size: float = 0.8
    vehicle_width: float = 2.0
    vehicle_length: float = 4.5
    aisle_width: float = 6.0

    def __post_init__(self):
        if self.rows < 1:
            raise InvalidSpec("rows", "must be at least 1")
        if self.pillars_per_row < 1:
            raise InvalidSpec("pillars_per_row", "must be at least 1")
        for name in ("spot_width", "pillar_size", "vehicle_width", "vehicle_length", "aisle_width"):
            if not getattr(self, name) > 0:
                raise InvalidSpec(name, "must be positive")
        if not self.pillar_pitch > self.spot_width:
            raise InvalidSpec("pillar_pitch", f"{self.pillar_pitch} must exceed spot_width {self.spot_width}")
        if not self.pillar_pitch > self.pillar_size:
            raise InvalidSpec("pillar_pitch", f"{self.pillar_pitch} must exceed pillar_size {self.pillar_size}")
        if not 0 <= self.occupancy_probability <= 1:
            raise InvalidSpec("occupancy_probability", "must lie in [0, 1]")

    @property
    def band_depth(self):
        return max(self.vehicle_length, self.pillar_size) + 2 * BAND_MARGIN

    def band(self, r):
        y_lo = r * (self.band_depth + self.aisle_width)
        return RowBand(y_lo, y_lo + self.band_depth)


@dataclass(frozen=True)
class NoiseModel:
    bbox_jitter_sigma: float = 0.0
    drop_probability: float = 0.0
    duplicate_probability: float = 0.0

    def __post_init__(self):
        if self.bbox_jitter_sigma < 0:
            raise InvalidSpec("bbox_jitter_sigma", "must be non-negative")
        for name in ("drop_probability", "duplicate_probability"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidSpec(name, "must lie in [0, 1]")


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    pr_points: tuple = ()
    average_precision: float = None

    def to_dict(self):
        d = asdict(self)
        d["pr_points"] = [list(p) for p in self.pr_points]
        return d


def random_lot_spec(seed):
    """A varied but well-conditioned LotSpec drawn from ``seed``."""
    rng = np.random.default_rng([seed, 0x5EED])
    spot_width = float(rng.choice([2.0, 2.5, 3.0]))
    return LotSpec(
        rows=int(rng.integers(1, 4)),
        pillars_per_row=int(rng.integers(2, 6)),
        pillar_pitch=round(0.8 + spot_width * int(rng.integers(1, 5)) + 0.1 * int(rng.integers(0, 10)), 1),
        spot_width=spot_width,
        occupancy_probability=float(rng.uniform(0.0, 1.0)),
        seed=seed,
    )


def _truth_object(cls, cx, cy, w, d):
    fp = Rect(cx - w / 2, cy - d / 2, cx + w / 2, cy + d / 2)
    pos = PlanarPoint(cx, cy)
    z = inverse_depth(euclidean_distance(pos)).value
    return Object3D(cls, pos, z, fp.area, fp, TRUTH_VIEW)


def generate_lot(spec):
    """Ground-truth lot and its exact vacancy map."""
    rng = np.random.default_rng(spec.seed)
    vw = min(spec.vehicle_width, spec.spot_width)
    rows = []
    spots = []
    for r in range(spec.rows):
        band = spec.band(r)
        pillars = tuple(
            _truth_object(PILLAR, i * spec.pillar_pitch, band.center, spec.pillar_size, spec.pillar_size)
            for i in range(spec.pillars_per_row)
        )
        vehicles = []
        for lo, hi in candidate_spots(pillars, spec.spot_width):
            occupied = bool(rng.random() < spec.occupancy_probability)
            if occupied:
                vehicles.append(_truth_object(VEHICLE, (lo + hi) / 2, band.center, vw, spec.vehicle_length))
            spots.append(VacancySpot(len(spots), r, lo, hi, OCCUPIED if occupied else VACANT))
        rows.append(Row(band, pillars, tuple(vehicles)))

    half = spec.pillar_size / 2
    x_hi = (spec.pillars_per_row - 1) * spec.pillar_pitch + half
    bounds = Rect(-half, rows[0].band.y_lo, x_hi, rows[-1].band.y_hi)
    lot = LotModel(tuple(rows), spec.spot_width, bounds)
    return lot, VacancyMap(tuple(spots), f"synth-seed-{spec.seed}")


def default_entrances(lot, lane_offset=3.0):
    first = lot.rows[0].band
    return [(lot.lot_bounds.x_lo - 2.0, first.y_lo - lane_offset)]


def default_cameras(lot, image_size=640, margins=(2.0, 3.0, 4.0, 5.0)):
    """Overhead cameras that each see the whole lot.

    Cameras 0 and 1 sit below the lot (small y) with the image bottom toward
    them; cameras 2 and 3 sit above it. Differing margins give each view a
    different ground resolution. Returns ``(CameraView, correspondences)``
    pairs, the correspondences being the four image corners.
    """
    b = lot.lot_bounds
    cx, cy = (b.x_lo + b.x_hi) / 2, (b.y_lo + b.y_hi) / 2
    span = max(b.x_hi - b.x_lo, b.y_hi - b.y_lo)
    quarter = (b.x_hi - b.x_lo) / 4
    out = []
    for k, margin in enumerate(margins):
        extent = span + 2 * margin
        s = image_size / extent
        x0 = cx - extent / 2
        below = k < 2
        if below:
            y1 = cy + extent / 2
            # floor -> image: u = s (x - x0), v = s (y1 - y)
            to_image = np.array([[s, 0, -s * x0], [0, -s, s * y1], [0, 0, 1.0]])
            cam = PlanarPoint(cx + (-quarter if k == 0 else quarter), b.y_lo - 5.0)
        else:
            y0 = cy - extent / 2
            to_image = np.array([[s, 0, -s * x0], [0, s, -s * y0], [0, 0, 1.0]])
            cam = PlanarPoint(cx + (quarter if k == 2 else -quarter), b.y_hi + 5.0)
        h = np.linalg.inv(to_image)
        corners = [(0.0, 0.0), (image_size, 0.0), (image_size, image_size), (0.0, image_size)]
        corr = [Correspondence(PlanarPoint(*c), apply_ipm(h, c)) for c in corners]
        out.append((CameraView(k, float(image_size), float(image_size), h, cam), corr))
    return out


def project_footprint(view, footprint):
    """Pixel hull of a floor rectangle as seen by ``view`` (unclipped)."""
    inv = view.inverse
    corners = [
        apply_ipm(inv, (footprint.x_lo, footprint.y_lo)),
        apply_ipm(inv, (footprint.x_hi, footprint.y_lo)),
        apply_ipm(inv, (footprint.x_hi, footprint.y_hi)),
        apply_ipm(inv, (footprint.x_lo, footprint.y_hi)),
    ]
    xs = [p.x for p in corners]
    ys = [p.y for p in corners]
    return min(xs), min(ys), max(xs), max(ys)


def _clip(coords, width, height):
    xmin, ymin, xmax, ymax = coords
    xmin, xmax = min(max(xmin, 0.0), width), min(max(xmax, 0.0), width)
    ymin, ymax = min(max(ymin, 0.0), height), min(max(ymax, 0.0), height)
    if xmax - xmin < MIN_BOX_EXTENT or ymax - ymin < MIN_BOX_EXTENT:
        return None
    return xmin, ymin, xmax, ymax


def _jitter(coords, sigma, rng, width, height):
    noise = rng.normal(0.0, 1.0, 4) * sigma
    xmin, ymin, xmax, ymax = (float(c + n) for c, n in zip(coords, noise))
    xmin, xmax = min(xmin, xmax), max(xmin, xmax)
    ymin, ymax = min(ymin, ymax), max(ymin, ymax)
    return _clip((xmin, ymin, xmax, ymax), width, height)


VOC_NAMES = {VEHICLE: "car", PILLAR: "pillar"}


def render_views(lot, cameras, noise=None, seed=0):
    """Per-camera annotations of every object in ``lot``.

    Returns a list of ``(Annotation, voc_xml_bytes)``, one per camera. Each
    view draws from its own random stream keyed by ``(seed, view_id)``.
    """
    noise = noise or NoiseModel()
    out = []
    for view in cameras:
        rng = np.random.default_rng([seed, view.view_id])
        boxes = []
        for obj in lot.pillars + lot.vehicles:
            coords = _clip(project_footprint(view, obj.footprint), view.image_width, view.image_height)
            if coords is None:
                continue
            # Draw every random number unconditionally so streams stay aligned
            # across noise levels.
            jittered = _jitter(coords, noise.bbox_jitter_sigma, rng, view.image_width, view.image_height)
            drop = rng.random() < noise.drop_probability
            dup = rng.random() < noise.duplicate_probability
            dup_coords = None
            if dup:
                dup_coords = _jitter(coords, noise.bbox_jitter_sigma, rng, view.image_width, view.image_height)
            if drop:
                continue
            for c in (jittered, dup_coords):
                if c is not None:
                    boxes.append(BBox2D(obj.class_label, *c))
        ann = Annotation(f"view{view.view_id}.jpg", view.image_width, view.image_height, boxes)
        out.append((ann, write_voc_xml(ann, VOC_NAMES)))
    return out


# -- metrics -----------------------------------------------------------------


def _ratio(num, den):
    return num / den if den else 1.0


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def interval_iou(a_lo, a_hi, b_lo, b_hi):
    inter = max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))
    union = (a_hi - a_lo) + (b_hi - b_lo) - inter
    return inter / union if union > 0 else 0.0


def match_spots(predicted, truth, min_iou=0.5):
    """Pair predicted spots with truth spots of the same row by interval IoU."""
    pairs = {}
    taken = set()
    for t in truth.spots:
        best = None
        for p in predicted.spots:
            if p.row_index != t.row_index or p.spot_id in taken:
                continue
            iou = interval_iou(p.x_lo, p.x_hi, t.x_lo, t.x_hi)
            if iou >= min_iou and (best is None or iou > best[0]):
                best = (iou, p.spot_id)
        if best is not None:
            pairs[t.spot_id] = best[1]
            taken.add(best[1])
    return pairs


def evaluate_vacancy(predicted, truth, min_iou=0.5):
    """Precision/recall with "vacant" as the positive class."""
    pairs = match_spots(predicted, truth, min_iou)
    if predicted.spots and truth.spots and not pairs:
        raise GridMismatch("no predicted spot overlaps any truth spot")
    pred_status = {p.spot_id: p.status for p in predicted.spots}
    tp = sum(
        1 for t in truth.spots
        if t.status == VACANT and t.spot_id in pairs and pred_status[pairs[t.spot_id]] == VACANT
    )
    predicted_vacant = sum(1 for p in predicted.spots if p.status == VACANT)
    truth_vacant = sum(1 for t in truth.spots if t.status == VACANT)
    precision = _ratio(tp, predicted_vacant)
    recall = _ratio(tp, truth_vacant)
    return EvalReport(precision, recall, _f1(precision, recall))


@dataclass(frozen=True)
class ScoredDetection:
    box: BBox2D
    score: float
    image: str = ""


def box_iou(a, b):
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.width * a.height + b.width * b.height - inter)


def pr_curve(scored_detections, truth_boxes, iou_threshold=0.5):
    """Cumulative precision/recall over score-ranked detections, and AP.

    ``truth_boxes`` is a list of boxes, or a mapping image -> boxes when the
    detections span several images. Detections match only same-class truth
    boxes in the same image; each truth box matches at most once. AP is the
    trapezoidal area under the non-increasing precision envelope, starting
    from recall 0.
    """
    if isinstance(truth_boxes, dict):
        truth = {img: list(bs) for img, bs in truth_boxes.items()}
    else:
        truth = {"": list(truth_boxes)}
    n_truth = sum(len(bs) for bs in truth.values())
    if n_truth == 0:
        raise EmptyTruth("pr_curve needs at least one truth box")

    dets = sorted(enumerate(scored_detections), key=lambda item: (-item[1].score, item[0]))
    used = set()
    tp = 0
    points = []
    for n, (_, det) in enumerate(dets, start=1):
        best = None
        for j, t in enumerate(truth.get(det.image, [])):
            if (det.image, j) in used or t.class_label != det.box.class_label:
                continue
            iou = box_iou(det.box, t)
            if iou >= iou_threshold and (best is None or iou > best[0]):
                best = (iou, j)
        if best is not None:
            used.add((det.image, best[1]))
            tp += 1
        points.append((tp / n_truth, tp / n))

    if not points:
        return EvalReport(1.0, 0.0, 0.0, (), 0.0)

    envelope = [p for _, p in points]
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])
    curve = [(0.0, envelope[0])] + [(r, e) for (r, _), e in zip(points, envelope)]
    ap = sum((r1 - r0) * (p0 + p1) / 2 for (r0, p0), (r1, p1) in zip(curve, curve[1:]))
    recall, precision = points[-1]
    return EvalReport(precision, recall, _f1(precision, recall), tuple(points), min(max(ap, 0.0), 1.0))
