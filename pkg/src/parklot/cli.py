"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal invariant violation.
"""

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from parklot.annot_ingest import BBox2D, canonical_class, split_dataset, write_labels_csv
from parklot.errors import ConfigError, InvalidSpec, ParklotError, RowParseError
from parklot.nav_routing import build_nav_graph, nearest_vacant
from parklot.pipeline import (
    LotConfig,
    dump_json,
    load_annotation_file,
    lot_config_for,
    read_json,
    run_pipeline,
)
from parklot.scene_out import SceneDocument, dump_scene, parse_scene_json, to_plot_script, to_points_csv
from parklot.synth_harness import (
    LotSpec,
    NoiseModel,
    ScoredDetection,
    default_cameras,
    default_entrances,
    evaluate_vacancy,
    generate_lot,
    pr_curve,
    render_views,
)
from parklot.vacancy import VACANT

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


# -- config helpers ----------------------------------------------------------


def apply_overrides(config, assignments):
    """Apply ``key.sub=value`` assignments; values are parsed as JSON when possible."""
    for item in assignments or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {part} is not an object")
        node[parts[-1]] = value
    return config


def _spec_from(section, seed):
    section = dict(section or {})
    section.pop("seed", None)
    try:
        return LotSpec(seed=seed, **section)
    except TypeError as exc:
        raise ConfigError(f"synth.lot: {exc}") from None


def _noise_from(section):
    try:
        return NoiseModel(**(section or {}))
    except TypeError as exc:
        raise ConfigError(f"synth.noise: {exc}") from None


def _synth_run(spec, noise, seed, image_size=640, lot_overrides=None):
    lot, truth = generate_lot(spec)
    cams = default_cameras(lot, image_size)
    entrances = default_entrances(lot)
    config = lot_config_for(lot, cams, entrances)
    if lot_overrides:
        data = config.to_dict()
        for key, value in lot_overrides.items():
            if isinstance(value, dict):
                data.setdefault(key, {}).update(value)
            else:
                data[key] = value
        config = LotConfig.from_dict(data)
    views = render_views(lot, config.cameras, noise, seed)
    return lot, truth, config, views


def _scene(lot, vmap, config):
    return SceneDocument(lot, vmap, tuple(config.entrances), config.lane_offset)


def _counts(vmap):
    vacant = sum(1 for s in vmap.spots if s.status == VACANT)
    return {"vacant": vacant, "occupied": len(vmap.spots) - vacant, "total": len(vmap.spots)}


# -- simulate ----------------------------------------------------------------


def cmd_simulate(args):
    config = read_json(args.config, "simulation config") if args.config else {}
    apply_overrides(config, args.set)
    spec = _spec_from(config.get("lot"), args.seed)
    noise = _noise_from(config.get("noise"))
    image_size = float(config.get("image_size", 640))

    lot, truth, lot_config, views = _synth_run(spec, noise, args.seed, image_size)
    run_dir = Path(args.out) / str(args.seed)
    annotations = {}
    for cam, (_, xml) in zip(lot_config.cameras, views):
        name = f"view{cam.view_id}.xml"
        _write(run_dir / name, xml)
        annotations[str(cam.view_id)] = name
    _write(run_dir / "truth.json", dump_scene(_scene(lot, truth, lot_config)))
    _write(run_dir / "lot.json", dump_json(lot_config.to_dict()))
    run_config = {"lot_config": "lot.json", "annotations": annotations, "output_dir": "out", "seed": args.seed}
    _write(run_dir / "run.json", dump_json(run_config))
    counts = _counts(truth)
    print(f"simulated lot seed {args.seed}: {len(views)} views, "
          f"{counts['vacant']} vacant / {counts['occupied']} occupied -> {run_dir}")
    return EXIT_OK


# -- pipeline ----------------------------------------------------------------


def cmd_pipeline(args):
    config_path = Path(args.config)
    run = read_json(config_path, "run config")
    if not isinstance(run, dict):
        raise ConfigError("run config must be a JSON object")
    apply_overrides(run, args.set)
    base = config_path.parent
    seed = args.seed if args.seed is not None else int(run.get("seed", 0))
    has_ann, has_synth = "annotations" in run, "synth" in run
    if has_ann == has_synth:
        raise ConfigError("run config needs exactly one of 'annotations' or 'synth'")

    lot_overrides = {k: run[k] for k in ("depth_mode", "fusion", "vacancy", "navigation", "entrances") if k in run}
    out_dir = Path(args.out) if args.out else base / run.get("output_dir", "out")
    stamp = None if args.no_timestamp else datetime.now(timezone.utc).isoformat(timespec="seconds")
    truth = None

    if has_synth:
        synth = run["synth"]
        spec = _spec_from(synth.get("lot"), seed)
        noise = _noise_from(synth.get("noise"))
        lot_truth, truth, lot_config, views = _synth_run(
            spec, noise, seed, float(synth.get("image_size", 640)), lot_overrides
        )
        by_view = {cam.view_id: [ann] for cam, (ann, _) in zip(lot_config.cameras, views)}
        source = f"synth-seed-{seed}"
    else:
        if "lot_config" not in run:
            raise ConfigError("run config with annotations needs 'lot_config'")
        lot_data = read_json(base / run["lot_config"], "lot config")
        for key, value in lot_overrides.items():
            if isinstance(value, dict):
                lot_data.setdefault(key, {}).update(value)
            else:
                lot_data[key] = value
        lot_config = LotConfig.from_dict(lot_data)
        entries = run["annotations"]
        if not isinstance(entries, dict):
            raise ConfigError("annotations must map view_id -> file path(s)")
        by_view = {}
        for key, paths in entries.items():
            try:
                view_id = int(key)
            except ValueError:
                raise ConfigError(f"annotations key {key!r} is not a view id") from None
            lot_config.camera(view_id)
            files = [paths] if isinstance(paths, str) else list(paths)
            anns = []
            for f in files:
                path = base / f
                if not path.exists():
                    raise ConfigError(f"annotation file not found: {path}")
                anns.extend(load_annotation_file(path))
            by_view[view_id] = anns
        source = config_path.name

    lot, vmap = run_pipeline(lot_config, by_view, source, stamp)
    scene = _scene(lot, vmap, lot_config)
    _write(out_dir / "scene.json", dump_scene(scene))
    _write(out_dir / "points.csv", to_points_csv(lot, vmap))
    _write(out_dir / "plot.txt", to_plot_script(scene, "points.csv"))
    counts = _counts(vmap)
    report = {
        "counts": counts,
        "unassigned_objects": len(lot.unassigned),
        "spots": [
            {"spot_id": s.spot_id, "row": s.row_index, "x_lo": s.x_lo, "x_hi": s.x_hi, "status": s.status}
            for s in vmap.spots
        ],
    }
    _write(out_dir / "vacancy.json", dump_json(report))
    if truth is not None:
        _write(out_dir / "truth.json", dump_scene(_scene(lot_truth, truth, lot_config)))
        _write(out_dir / "eval.json", dump_json(evaluate_vacancy(vmap, truth).to_dict()))
    print(f"vacant: {counts['vacant']}  occupied: {counts['occupied']}  -> {out_dir}")
    return EXIT_OK


# -- route -------------------------------------------------------------------


def _load_scene(path):
    path = Path(path)
    if path.is_dir():
        path = path / "scene.json"
    if not path.exists():
        raise ConfigError(f"scene not found: {path}")
    try:
        return path, parse_scene_json(path.read_bytes())
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: not a scene document ({exc})") from None


def cmd_route(args):
    path, scene = _load_scene(args.scene)
    graph = build_nav_graph(scene.lot, scene.vmap, scene.entrances, scene.lane_offset)
    if not 0 <= args.entrance < len(scene.entrances):
        raise ConfigError(f"entrance {args.entrance} does not exist ({len(scene.entrances)} configured)")
    route = nearest_vacant(graph, scene.vmap, args.entrance)
    nodes = [graph.nodes[n] for n in route.node_sequence]
    doc = {
        "entrance": args.entrance,
        "target_spot": route.target_spot,
        "total_distance": route.total_distance,
        "node_sequence": list(route.node_sequence),
        "nodes": [
            {"id": n.node_id, "kind": n.kind, "x": n.position.x, "y": n.position.y, "spot": n.spot_ref}
            for n in nodes
        ],
    }
    out = Path(args.out) if args.out else path.parent / "route.json"
    _write(out, dump_json(doc))
    print(f"nearest vacant spot: {route.target_spot}  distance: {route.total_distance:.3f}")
    print(" -> ".join(
        f"{n.kind}{'' if n.spot_ref is None else ' ' + str(n.spot_ref)}({n.position.x:.2f},{n.position.y:.2f})"
        for n in nodes
    ))
    return EXIT_OK


# -- eval --------------------------------------------------------------------

DETECTIONS_HEADER = ("filename", "class", "score", "xmin", "ymin", "xmax", "ymax")


def parse_detections_csv(document):
    reader = csv.reader(io.StringIO(document.decode("utf-8-sig")))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != DETECTIONS_HEADER:
        raise ConfigError(f"detections header must be {','.join(DETECTIONS_HEADER)!r}")
    dets = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            score = float(row[2])
            coords = [float(v) for v in row[3:7]]
        except (ValueError, IndexError):
            raise RowParseError(f"detections line {lineno}: bad number") from None
        dets.append(ScoredDetection(BBox2D(canonical_class(row[1]), *coords), score, row[0]))
    return dets


def cmd_eval(args):
    pred_dir, truth_dir = Path(args.predicted), Path(args.truth)
    for d, what in ((pred_dir, "predicted"), (truth_dir, "truth")):
        if not d.is_dir():
            raise ConfigError(f"{what} directory not found: {d}")
    report = {}
    pred_scene = pred_dir / "scene.json"
    truth_scene = next((p for p in (truth_dir / "truth.json", truth_dir / "scene.json") if p.exists()), None)
    if pred_scene.exists():
        if truth_scene is None:
            raise ConfigError(f"no truth.json or scene.json in {truth_dir}")
        predicted = parse_scene_json(pred_scene.read_bytes()).vmap
        truth = parse_scene_json(truth_scene.read_bytes()).vmap
        report["vacancy"] = evaluate_vacancy(predicted, truth).to_dict()
    det_file, labels = pred_dir / "detections.csv", truth_dir / "labels.csv"
    if det_file.exists():
        if not labels.exists():
            raise ConfigError(f"no labels.csv in {truth_dir}")
        truth_boxes = {a.filename: list(a.boxes) for a in load_annotation_file(labels)}
        dets = parse_detections_csv(det_file.read_bytes())
        report["detection"] = pr_curve(dets, truth_boxes, args.iou).to_dict()
    if not report:
        raise ConfigError(f"nothing to evaluate in {pred_dir} (need scene.json or detections.csv)")
    data = dump_json(report)
    if args.out:
        _write(args.out, data)
    sys.stdout.write(data.decode("utf-8"))
    return EXIT_OK


# -- split -------------------------------------------------------------------


def cmd_split(args):
    annotations = []
    for f in args.inputs:
        path = Path(f)
        if not path.exists():
            raise ConfigError(f"input not found: {path}")
        files = sorted(path.glob("*.xml")) if path.is_dir() else [path]
        for item in files:
            annotations.extend(load_annotation_file(item))
    split = split_dataset(annotations, args.fraction, args.seed)
    out = Path(args.out)
    _write(out / "train_label.csv", write_labels_csv(split.train))
    _write(out / "test_label.csv", write_labels_csv(split.test))
    print(f"train: {len(split.train)}  test: {len(split.test)}  -> {out}")
    return EXIT_OK


# -- entry -------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="parklot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic lot and per-camera VOC annotations")
    p.add_argument("--config", help="JSON with optional 'lot', 'noise', 'image_size' sections")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (dotted path)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="run", help="run directory root; output goes to OUT/<seed>/")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", help="annotations -> fused lot -> vacancies -> scene artifacts")
    p.add_argument("config", help="run config JSON")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (dotted path)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", help="output directory (default: config's output_dir)")
    p.add_argument("--no-timestamp", action="store_true", help="omit generated_at for byte-stable output")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("route", help="route from an entrance to the nearest vacant spot")
    p.add_argument("scene", help="scene.json or the directory holding it")
    p.add_argument("--entrance", type=int, default=0, help="entrance index (default 0)")
    p.add_argument("--out", help="route JSON path (default: next to the scene)")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("eval", help="score predictions against truth")
    p.add_argument("predicted", help="directory with scene.json and/or detections.csv")
    p.add_argument("truth", help="directory with truth.json/scene.json and/or labels.csv")
    p.add_argument("--iou", type=float, default=0.5, help="detection match IoU threshold")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("split", help="seeded train/test split into train_label.csv and test_label.csv")
    p.add_argument("inputs", nargs="+", help="labels CSV files, VOC XML files, or directories of XML")
    p.add_argument("--fraction", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_split)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidSpec) as exc:
        print(f"parklot {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParklotError as exc:
        print(f"parklot {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, AssertionError) as exc:
        print(f"parklot {args.command}: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
