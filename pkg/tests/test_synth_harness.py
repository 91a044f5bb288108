from fractions import Fraction

import numpy as np
import pytest

from parklot.annot_ingest import PILLAR, VEHICLE, BBox2D, parse_voc_xml
from parklot.errors import EmptyTruth, GridMismatch, InvalidSpec
from parklot.synth_harness import (
    LotSpec,
    NoiseModel,
    ScoredDetection,
    default_cameras,
    evaluate_vacancy,
    generate_lot,
    pr_curve,
    random_lot_spec,
    render_views,
)
from parklot.vacancy import OCCUPIED, VACANT, VacancyMap, VacancySpot, extract_vacancies


class TestGenerateLot:
    def test_all_vacant(self):
        _, truth = generate_lot(LotSpec(occupancy_probability=0.0))
        assert truth.spots and all(s.status == VACANT for s in truth.spots)

    def test_all_occupied(self):
        lot, truth = generate_lot(LotSpec(occupancy_probability=1.0))
        assert all(s.status == OCCUPIED for s in truth.spots)
        assert len(lot.vehicles) == len(truth.spots)

    def test_deterministic(self):
        assert generate_lot(LotSpec(seed=9)) == generate_lot(LotSpec(seed=9))

    @pytest.mark.parametrize("seed", range(1, 21))
    def test_truth_consistent_with_extraction(self, seed):
        lot, truth = generate_lot(random_lot_spec(seed))
        assert [s.status for s in extract_vacancies(lot).spots] == [s.status for s in truth.spots]

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            ({"pillar_pitch": 2.0, "spot_width": 2.5}, "pillar_pitch"),
            ({"rows": 0}, "rows"),
            ({"occupancy_probability": 1.5}, "occupancy_probability"),
        ],
    )
    def test_invalid_spec(self, kwargs, field):
        with pytest.raises(InvalidSpec) as info:
            LotSpec(**kwargs)
        assert info.value.field == field


def corner_oracle(h_inv, fp, width, height):
    pts = []
    for x, y in ((fp.x_lo, fp.y_lo), (fp.x_hi, fp.y_lo), (fp.x_hi, fp.y_hi), (fp.x_lo, fp.y_hi)):
        u = h_inv[0, 0] * x + h_inv[0, 1] * y + h_inv[0, 2]
        v = h_inv[1, 0] * x + h_inv[1, 1] * y + h_inv[1, 2]
        w = h_inv[2, 0] * x + h_inv[2, 1] * y + h_inv[2, 2]
        pts.append((u / w, v / w))
    us, vs = [p[0] for p in pts], [p[1] for p in pts]
    return (max(min(us), 0), max(min(vs), 0), min(max(us), width), min(max(vs), height))


class TestRenderViews:
    lot, _ = generate_lot(LotSpec(rows=2, pillars_per_row=3, seed=2))
    cams = [c for c, _ in default_cameras(lot)]

    def test_noise_free_matches_oracle(self):
        views = render_views(self.lot, self.cams, NoiseModel(), seed=1)
        objects = self.lot.pillars + self.lot.vehicles
        for cam, (ann, xml) in zip(self.cams, views):
            inv = np.linalg.inv(cam.homography)
            expected = [corner_oracle(inv, o.footprint, 640, 640) for o in objects]
            got = [b.as_tuple() for b in ann.boxes]
            assert np.allclose(got, expected, rtol=0, atol=1e-9)
            assert parse_voc_xml(xml) == ann

    def test_drop_everything(self):
        views = render_views(self.lot, self.cams, NoiseModel(drop_probability=1.0), seed=1)
        assert all(ann.boxes == () for ann, _ in views)

    def test_noisy_boxes_valid(self):
        views = render_views(self.lot, self.cams, NoiseModel(5.0, 0.2, 0.3), seed=3)
        for ann, xml in views:
            for b in ann.boxes:
                b.check_bounds(640, 640)
                assert b.width >= 4 and b.height >= 4
            assert parse_voc_xml(xml) == ann

    def test_duplicates_add_boxes(self):
        plain = render_views(self.lot, self.cams, NoiseModel(), seed=3)
        dup = render_views(self.lot, self.cams, NoiseModel(duplicate_probability=1.0), seed=3)
        assert [2 * len(a.boxes) for a, _ in plain] == [len(a.boxes) for a, _ in dup]

    def test_deterministic_per_seed(self):
        noise = NoiseModel(2.0, 0.1, 0.1)
        assert render_views(self.lot, self.cams, noise, 5) == render_views(self.lot, self.cams, noise, 5)
        assert render_views(self.lot, self.cams, noise, 5) != render_views(self.lot, self.cams, noise, 6)

    def test_clipping_drops_tiny_boxes(self):
        # a camera that only sees the left edge of the lot
        cam = self.cams[0]
        shifted = type(cam)(9, 640.0, 640.0, cam.homography @ np.diag([0.3, 0.3, 1.0]), cam.camera_floor_position)
        (ann, _), = render_views(self.lot, [shifted], NoiseModel(), seed=0)
        objects = self.lot.pillars + self.lot.vehicles
        assert 0 < len(ann.boxes) < len(objects)
        for b in ann.boxes:
            b.check_bounds(640, 640)


def vmap(statuses, row=0):
    return VacancyMap(tuple(VacancySpot(i, row, 2.5 * i, 2.5 * (i + 1), s) for i, s in enumerate(statuses)))


class TestEvaluateVacancy:
    def test_identical(self):
        truth = vmap([VACANT, OCCUPIED, VACANT])
        r = evaluate_vacancy(truth, truth)
        assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)
        assert r.pr_points == () and r.average_precision is None

    def test_all_occupied_prediction(self):
        truth = vmap([VACANT, OCCUPIED, VACANT])
        r = evaluate_vacancy(vmap([OCCUPIED] * 3), truth)
        assert r.recall == 0 and r.f1 == 0

    def test_counting(self):
        truth = vmap([VACANT, VACANT, VACANT, VACANT, OCCUPIED])
        pred = vmap([VACANT, VACANT, VACANT, OCCUPIED, VACANT])
        r = evaluate_vacancy(pred, truth)
        assert (r.precision, r.recall) == (0.75, 0.75)

    def test_shifted_grid_matches(self):
        truth = vmap([VACANT, OCCUPIED])
        pred = VacancyMap(tuple(VacancySpot(s.spot_id, 0, s.x_lo + 0.3, s.x_hi + 0.3, s.status) for s in truth.spots))
        assert evaluate_vacancy(pred, truth).f1 == 1.0

    def test_grid_mismatch(self):
        far = VacancyMap((VacancySpot(0, 0, 100, 102.5, VACANT),))
        with pytest.raises(GridMismatch):
            evaluate_vacancy(far, vmap([VACANT]))


def det(x, score, cls=VEHICLE):
    return ScoredDetection(BBox2D(cls, x, 0, x + 10, 10), score)


def hand_sweep_ap(outcomes, n_truth):
    """Definition-level AP in exact rationals: cumulative sweep, precision
    envelope, trapezoids from recall 0."""
    tp = 0
    pts = []
    for k, hit in enumerate(outcomes, start=1):
        tp += hit
        pts.append((Fraction(tp, n_truth), Fraction(tp, k)))
    env = [max(p for _, p in pts[i:]) for i in range(len(pts))]
    curve = [(Fraction(0), env[0])] + [(r, e) for (r, _), e in zip(pts, env)]
    return sum((r1 - r0) * (p0 + p1) / 2 for (r0, p0), (r1, p1) in zip(curve, curve[1:]))


# Five detections ordered by score: TP, FP, TP, FP, TP against four truth boxes.
FIVE_TRUTH = [BBox2D(VEHICLE, x, 0, x + 10, 10) for x in (0, 100, 200, 300)]
FIVE_DETS = [det(0, 0.9), det(500, 0.8), det(101, 0.7), det(600, 0.6), det(199, 0.5)]
FIVE_AP = hand_sweep_ap([1, 0, 1, 0, 1], 4)


class TestPrCurve:
    def test_frozen_hand_value(self):
        assert FIVE_AP == Fraction(17, 30)

    def test_five_detection_fixture(self):
        r = pr_curve(FIVE_DETS, FIVE_TRUTH, 0.5)
        assert abs(r.average_precision - float(FIVE_AP)) <= 1e-12
        assert r.precision == 3 / 5 and r.recall == 3 / 4
        assert [p[0] for p in r.pr_points] == sorted(p[0] for p in r.pr_points)

    def test_input_order_irrelevant(self):
        assert pr_curve(FIVE_DETS[::-1], FIVE_TRUTH) == pr_curve(FIVE_DETS, FIVE_TRUTH)

    def test_all_correct(self):
        r = pr_curve([det(0, 0.9), det(100, 0.8)], FIVE_TRUTH[:2])
        assert all(p == 1.0 for _, p in r.pr_points)
        assert r.average_precision == 1.0

    def test_no_detections(self):
        r = pr_curve([], FIVE_TRUTH)
        assert r.recall == 0 and r.average_precision == 0

    def test_empty_truth(self):
        with pytest.raises(EmptyTruth):
            pr_curve([det(0, 0.5)], [])

    def test_class_must_match(self):
        r = pr_curve([det(0, 0.9, PILLAR)], FIVE_TRUTH[:1])
        assert r.recall == 0

    def test_each_truth_matched_once(self):
        r = pr_curve([det(0, 0.9), det(1, 0.8)], FIVE_TRUTH[:1])
        assert [p for _, p in r.pr_points] == [1.0, 0.5]

    def test_per_image_truth(self):
        dets = [ScoredDetection(BBox2D(VEHICLE, 0, 0, 10, 10), 0.9, "b.jpg")]
        truth = {"a.jpg": [BBox2D(VEHICLE, 0, 0, 10, 10)], "b.jpg": [BBox2D(VEHICLE, 0, 0, 10, 10)]}
        assert pr_curve(dets, truth).recall == 0.5

    def test_ratios_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            dets = [det(float(rng.integers(0, 400)), float(rng.random())) for _ in range(8)]
            r = pr_curve(dets, FIVE_TRUTH)
            assert 0 <= r.average_precision <= 1
            recalls = [p[0] for p in r.pr_points]
            assert recalls == sorted(recalls)
