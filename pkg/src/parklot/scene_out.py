"""Scene artifacts: JSON lot model, points table, and a plot script.

Plot script grammar (one element per line, fields separated by spaces)::

    # comment
    points <relative path to points CSV>
    axes x y z
    box <class> <id> <x_lo> <y_lo> <x_hi> <y_hi> <z>
    vacancy <spot_id> <row> <x_lo> <y_lo> <x_hi> <y_hi>

``box`` draws a solid from the floor up to height ``z``; ``vacancy`` draws a
flat marked rectangle on the floor plane (z = 0).
"""

import csv
import io
import json
from dataclasses import dataclass, field

from parklot import __version__
from parklot._numfmt import fmt_real
from parklot.annot_ingest import PILLAR, VEHICLE
from parklot.depth_model import PlanarPoint
from parklot.vacancy import LotModel, Row, RowBand, VacancyMap, VacancySpot, VACANT
from parklot.view_fusion import Object3D, Rect

GENERATOR = f"parklot {__version__}"
POINTS_HEADER = ("kind", "id", "x", "y", "z")


@dataclass(frozen=True)
class SceneDocument:
    lot: LotModel
    vmap: VacancyMap
    entrances: tuple = ()
    lane_offset: float = 3.0
    extra: dict = field(default_factory=dict, compare=False)


def _numbered(lot):
    """(class, id, row index or None, object) in id order."""
    out = []
    for cls in (PILLAR, VEHICLE):
        n = 0
        for r, row in enumerate(lot.rows):
            for obj in row.pillars if cls == PILLAR else row.vehicles:
                out.append((cls, n, r, obj))
                n += 1
        for obj in lot.unassigned:
            if obj.class_label == cls:
                out.append((cls, n, None, obj))
                n += 1
    return out


def _object_entry(cls, oid, row, obj):
    return {
        "class": cls,
        "id": oid,
        "row": row,
        "x": obj.floor_position.x,
        "y": obj.floor_position.y,
        "z": obj.z,
        "footprint": list(obj.footprint.as_tuple()),
        "pixel_area": obj.pixel_area,
        "source_view": obj.source_view,
    }


def scene_dict(scene):
    lot, vmap = scene.lot, scene.vmap
    metadata = {
        "entrances": [list(p) for p in scene.entrances],
        "generated_from": vmap.generated_from,
        "generator": GENERATOR,
        "lane_offset": scene.lane_offset,
        "lot_bounds": list(lot.lot_bounds.as_tuple()),
        "rows": [[row.band.y_lo, row.band.y_hi] for row in lot.rows],
        "spot_width": lot.spot_width,
    }
    if vmap.generated_at is not None:
        metadata["generated_at"] = vmap.generated_at
    return {
        "metadata": metadata,
        "objects": [_object_entry(*item) for item in _numbered(lot)],
        "vacancies": [
            {"spot_id": s.spot_id, "row": s.row_index, "x_lo": s.x_lo, "x_hi": s.x_hi, "status": s.status}
            for s in vmap.spots
        ],
    }


def dump_scene(scene):
    return (json.dumps(scene_dict(scene), sort_keys=True, indent=2, allow_nan=False) + "\n").encode("utf-8")


def to_scene_json(lot, vmap, entrances=(), lane_offset=3.0):
    return dump_scene(SceneDocument(lot, vmap, tuple(tuple(p) for p in entrances), lane_offset))


def parse_scene_json(document):
    data = json.loads(document)
    meta = data["metadata"]
    rows = [([], []) for _ in meta["rows"]]
    unassigned = []
    for entry in sorted(data["objects"], key=lambda e: (e["class"], e["id"])):
        obj = Object3D(
            entry["class"],
            PlanarPoint(entry["x"], entry["y"]),
            entry["z"],
            entry["pixel_area"],
            Rect(*entry["footprint"]),
            entry["source_view"],
        )
        if entry["row"] is None:
            unassigned.append(obj)
        else:
            rows[entry["row"]][0 if entry["class"] == PILLAR else 1].append(obj)
    unassigned.sort(key=lambda o: o.class_label != PILLAR)
    lot = LotModel(
        tuple(Row(RowBand(*band), tuple(p), tuple(v)) for band, (p, v) in zip(meta["rows"], rows)),
        meta["spot_width"],
        Rect(*meta["lot_bounds"]),
        tuple(unassigned),
    )
    spots = tuple(
        VacancySpot(v["spot_id"], v["row"], v["x_lo"], v["x_hi"], v["status"])
        for v in sorted(data["vacancies"], key=lambda v: v["spot_id"])
    )
    vmap = VacancyMap(spots, meta.get("generated_from", ""), meta.get("generated_at"))
    return SceneDocument(
        lot, vmap, tuple(tuple(p) for p in meta.get("entrances", [])), meta.get("lane_offset", 3.0)
    )


def to_points_csv(lot, vmap):
    rows = []
    for cls, oid, _, obj in _numbered(lot):
        rows.append((cls, oid, obj.floor_position.x, obj.floor_position.y, obj.z))
    for s in vmap.spots:
        if s.status == VACANT:
            rows.append(("vacancy", s.spot_id, s.center_x, lot.rows[s.row_index].band.center, 0.0))
    rows.sort(key=lambda r: (r[0], r[1]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(POINTS_HEADER)
    for kind, oid, x, y, z in rows:
        writer.writerow([kind, oid, fmt_real(x), fmt_real(y), fmt_real(z)])
    return buf.getvalue().encode("utf-8")


def to_plot_script(scene, points_path="points.csv"):
    lot, vmap = scene.lot, scene.vmap
    lines = [f"# {GENERATOR} plot script", f"points {points_path}", "axes x y z"]
    for cls, oid, _, obj in _numbered(lot):
        coords = " ".join(fmt_real(v) for v in obj.footprint.as_tuple() + (obj.z,))
        lines.append(f"box {cls} {oid} {coords}")
    for s in vmap.spots:
        if s.status == VACANT:
            band = lot.rows[s.row_index].band
            coords = " ".join(fmt_real(v) for v in (s.x_lo, band.y_lo, s.x_hi, band.y_hi))
            lines.append(f"vacancy {s.spot_id} {s.row_index} {coords}")
    return ("\n".join(lines) + "\n").encode("utf-8")
