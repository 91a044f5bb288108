"""End-to-end pipeline: annotations -> fused objects -> vacancies -> artifacts."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from parklot.annot_ingest import parse_labels_csv, parse_voc_xml
from parklot.depth_model import AREA_INVERSE, CENTROID_INVERSE
from parklot.errors import ConfigError, ParklotError
from parklot.nav_routing import DEFAULT_LANE_OFFSET
from parklot.vacancy import DEFAULT_OCCUPANCY_FRACTION, RowBand, assign_rows, extract_vacancies
from parklot.view_fusion import (
    FusionParams,
    camera_from_config,
    camera_to_config,
    fuse_views,
    fusion_params_from_config,
    project_view,
)


@dataclass
class LotConfig:
    """Everything about a lot that does not come from the detections."""

    cameras: list
    rows: list
    spot_width: float
    entrances: list = field(default_factory=list)
    fusion: FusionParams = field(default_factory=FusionParams)
    occupancy_fraction: float = DEFAULT_OCCUPANCY_FRACTION
    lane_offset: float = DEFAULT_LANE_OFFSET
    link_rows: bool = True
    depth_mode: str = CENTROID_INVERSE
    correspondences: dict = field(default_factory=dict)

    def camera(self, view_id):
        for cam in self.cameras:
            if cam.view_id == view_id:
                return cam
        raise ConfigError(f"no camera with view_id {view_id}")

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("lot config must be a JSON object")
        if not data.get("cameras"):
            raise ConfigError("lot config has no cameras")
        cameras = []
        corr = {}
        for entry in data["cameras"]:
            cam = camera_from_config(entry)
            if any(c.view_id == cam.view_id for c in cameras):
                raise ConfigError(f"duplicate view_id {cam.view_id}")
            cameras.append(cam)
            corr[cam.view_id] = entry["correspondences"]
        try:
            rows = [RowBand(float(lo), float(hi)) for lo, hi in data.get("rows", [])]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"rows: {exc}") from None
        try:
            spot_width = float(data["spot_width"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("spot_width missing or not a number") from None
        if spot_width <= 0:
            raise ConfigError("spot_width must be positive")
        vac = data.get("vacancy", {})
        nav = data.get("navigation", {})
        depth_mode = data.get("depth_mode", CENTROID_INVERSE)
        if depth_mode not in (CENTROID_INVERSE, AREA_INVERSE):
            raise ConfigError(f"depth_mode must be {CENTROID_INVERSE!r} or {AREA_INVERSE!r}")
        occupancy_fraction = float(vac.get("occupancy_fraction", DEFAULT_OCCUPANCY_FRACTION))
        if not 0 < occupancy_fraction <= 1:
            raise ConfigError("vacancy.occupancy_fraction must lie in (0, 1]")
        return cls(
            cameras=cameras,
            rows=rows,
            spot_width=spot_width,
            entrances=[tuple(float(v) for v in p) for p in data.get("entrances", [])],
            fusion=fusion_params_from_config(data.get("fusion")),
            occupancy_fraction=occupancy_fraction,
            lane_offset=float(nav.get("lane_offset", DEFAULT_LANE_OFFSET)),
            link_rows=bool(nav.get("link_rows", True)),
            depth_mode=depth_mode,
            correspondences=corr,
        )

    def to_dict(self):
        cams = []
        for cam in self.cameras:
            entry = camera_to_config(cam, [])
            entry["correspondences"] = self.correspondences[cam.view_id]
            cams.append(entry)
        return {
            "cameras": cams,
            "depth_mode": self.depth_mode,
            "entrances": [list(p) for p in self.entrances],
            "fusion": {
                "iou_threshold": self.fusion.iou_threshold,
                "vehicle_depth": self.fusion.vehicle_depth,
                "pillar_depth": self.fusion.pillar_depth,
            },
            "navigation": {"lane_offset": self.lane_offset, "link_rows": self.link_rows},
            "rows": [[b.y_lo, b.y_hi] for b in self.rows],
            "spot_width": self.spot_width,
            "vacancy": {"occupancy_fraction": self.occupancy_fraction},
        }


def lot_config_for(lot, cameras_with_corr, entrances, **kwargs):
    """LotConfig describing a generated lot seen by the given cameras."""
    cameras = [cam for cam, _ in cameras_with_corr]
    corr = {
        cam.view_id: [
            {"image": [c.image_point.x, c.image_point.y], "floor": [c.floor_point.x, c.floor_point.y]}
            for c in cs
        ]
        for cam, cs in cameras_with_corr
    }
    return LotConfig(
        cameras=cameras,
        rows=[row.band for row in lot.rows],
        spot_width=lot.spot_width,
        entrances=[tuple(p) for p in entrances],
        correspondences=corr,
        **kwargs,
    )


def load_annotation_file(path, aliases=None):
    """Annotations from a VOC XML or labels CSV file."""
    path = Path(path)
    data = path.read_bytes()
    try:
        if path.suffix.lower() == ".csv":
            return parse_labels_csv(data, aliases)
        return [parse_voc_xml(data, aliases)]
    except ParklotError as exc:
        raise type(exc)(f"{path}: {exc.args[0]}") from None


def run_pipeline(config, annotations_by_view, generated_from="", generated_at=None):
    """Project, fuse, assign rows and extract vacancies.

    ``annotations_by_view`` maps view_id -> list of Annotation.
    Returns ``(LotModel, VacancyMap)``.
    """
    per_view = []
    for view_id in sorted(annotations_by_view):
        cam = config.camera(view_id)
        objs = []
        for ann in annotations_by_view[view_id]:
            if (ann.image_width, ann.image_height) != (cam.image_width, cam.image_height):
                raise ConfigError(
                    f"{ann.filename}: image is {ann.image_width}x{ann.image_height}, "
                    f"camera {view_id} expects {cam.image_width}x{cam.image_height}"
                )
            objs.extend(project_view(cam, ann.boxes, config.depth_mode, config.fusion))
        per_view.append(objs)
    fused = fuse_views(per_view, config.fusion.iou_threshold)
    lot = assign_rows(fused, config.rows, config.spot_width)
    vmap = extract_vacancies(lot, config.occupancy_fraction, generated_from, generated_at)
    return lot, vmap


def read_json(path, what):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def dump_json(data):
    return (json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n").encode("utf-8")
