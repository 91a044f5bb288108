"""Parsing, validation, normalization and splitting of detection annotations.

Two interchange formats are supported: PASCAL VOC XML (one file per image)
and a flat labels CSV with one row per box::

    filename,width,height,class,xmin,ymin,xmax,ymax
"""

import csv
import io
import math
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from parklot._numfmt import fmt_real
from parklot.errors import (
    EmptyInput,
    HeaderMismatch,
    InconsistentImageSize,
    InvalidBox,
    MalformedXml,
    RowParseError,
    SchemaViolation,
    UnknownClass,
)

VEHICLE = "vehicle"
PILLAR = "pillar"
CLASSES = (VEHICLE, PILLAR)

#: Source label -> canonical class. Extend per dataset via ``aliases=``.
DEFAULT_ALIASES = {
    "vehicle": VEHICLE,
    "car": VEHICLE,
    "cars": VEHICLE,
    "pillar": PILLAR,
    "pillars": PILLAR,
}

CSV_HEADER = ("filename", "width", "height", "class", "xmin", "ymin", "xmax", "ymax")


@dataclass(frozen=True)
class BBox2D:
    """An axis-aligned detection box in image pixels.

    Only extent and finiteness are checked here; image bounds are checked by
    :meth:`check_bounds` because a bare box does not know its image.
    """

    class_label: str
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if self.class_label not in CLASSES:
            raise UnknownClass(f"class {self.class_label!r} not in {CLASSES}")
        coords = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(math.isfinite(c) for c in coords):
            raise InvalidBox(f"non-finite coordinate in {coords}")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise InvalidBox(f"box {coords} has non-positive extent")

    @property
    def width(self):
        return self.xmax - self.xmin

    @property
    def height(self):
        return self.ymax - self.ymin

    def as_tuple(self):
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def check_bounds(self, image_width, image_height):
        if self.xmin < 0 or self.ymin < 0 or self.xmax > image_width or self.ymax > image_height:
            raise InvalidBox(
                f"box {self.as_tuple()} outside image {image_width}x{image_height}"
            )


@dataclass(frozen=True)
class Annotation:
    filename: str
    image_width: float
    image_height: float
    boxes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not (self.image_width > 0 and self.image_height > 0):
            raise SchemaViolation(
                f"{self.filename}: image size {self.image_width}x{self.image_height} must be positive"
            )
        for box in self.boxes:
            box.check_bounds(self.image_width, self.image_height)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    test: tuple
    seed: int


@dataclass(frozen=True)
class NormalizeResult:
    annotation: Annotation
    dropped: int = 0


def canonical_class(name, aliases=None):
    table = DEFAULT_ALIASES if aliases is None else aliases
    key = name.strip().lower()
    if key not in table:
        raise UnknownClass(f"unknown class name {name!r}")
    return table[key]


def _real(text, what):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise RowParseError(f"{what}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise RowParseError(f"{what}: {text!r} is not finite")
    return value


def _make_box(label, coords, where):
    try:
        return BBox2D(label, *coords)
    except InvalidBox as exc:
        raise InvalidBox(f"{where}: {exc.args[0]}") from None


# -- VOC XML -----------------------------------------------------------------


def _child_text(elem, path, where):
    node = elem.find(path)
    if node is None or node.text is None or not node.text.strip():
        raise SchemaViolation(f"{where}: missing <{path}>")
    return node.text.strip()


def _xml_real(elem, path, where):
    text = _child_text(elem, path, where)
    try:
        value = float(text)
    except ValueError:
        raise SchemaViolation(f"{where}: <{path}> = {text!r} is not a number") from None
    if not math.isfinite(value):
        raise SchemaViolation(f"{where}: <{path}> is not finite")
    return value


def parse_voc_xml(document, aliases=None):
    """Parse a PASCAL VOC annotation document into an :class:`Annotation`."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from None
    if root.tag != "annotation":
        raise SchemaViolation(f"root element is <{root.tag}>, expected <annotation>")

    filename = _child_text(root, "filename", "annotation")
    width = _xml_real(root, "size/width", filename)
    height = _xml_real(root, "size/height", filename)
    if width <= 0 or height <= 0:
        raise SchemaViolation(f"{filename}: image size must be positive")

    boxes = []
    for i, obj in enumerate(root.findall("object")):
        where = f"{filename} object {i}"
        label = canonical_class(_child_text(obj, "name", where), aliases)
        bnd = obj.find("bndbox")
        if bnd is None:
            raise SchemaViolation(f"{where}: missing <bndbox>")
        coords = [_xml_real(bnd, k, where) for k in ("xmin", "ymin", "xmax", "ymax")]
        box = _make_box(label, coords, where)
        try:
            box.check_bounds(width, height)
        except InvalidBox as exc:
            raise InvalidBox(f"{where}: {exc.args[0]}") from None
        boxes.append(box)
    return Annotation(filename, width, height, boxes)


def write_voc_xml(annotation, class_names=None):
    """Serialize an annotation as VOC XML.

    ``class_names`` maps canonical classes to emitted names (e.g. vehicle -> car).
    """
    names = class_names or {}
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = annotation.filename
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = fmt_real(annotation.image_width)
    ET.SubElement(size, "height").text = fmt_real(annotation.image_height)
    ET.SubElement(size, "depth").text = "3"
    for box in annotation.boxes:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = names.get(box.class_label, box.class_label)
        bnd = ET.SubElement(obj, "bndbox")
        for key, value in zip(("xmin", "ymin", "xmax", "ymax"), box.as_tuple()):
            ET.SubElement(bnd, key).text = fmt_real(value)
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


# -- labels CSV --------------------------------------------------------------


def parse_labels_csv(document, aliases=None):
    """Group labels-CSV rows into annotations, one per filename.

    Files appear in order of first occurrence; boxes keep row order.
    """
    text = document.decode("utf-8-sig") if isinstance(document, bytes) else document
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise HeaderMismatch(f"expected header {','.join(CSV_HEADER)!r}, got {header!r}")

    sizes = {}
    grouped = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise RowParseError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        filename = row[0]
        where = f"line {lineno}"
        width = _real(row[1], f"{where} width")
        height = _real(row[2], f"{where} height")
        if filename in sizes and sizes[filename] != (width, height):
            raise InconsistentImageSize(
                f"{where}: {filename} is {width}x{height}, earlier rows say "
                f"{sizes[filename][0]}x{sizes[filename][1]}"
            )
        sizes[filename] = (width, height)
        label = canonical_class(row[3], aliases)
        coords = [_real(v, f"{where} {k}") for k, v in zip(CSV_HEADER[4:], row[4:])]
        box = _make_box(label, coords, where)
        try:
            box.check_bounds(width, height)
        except InvalidBox as exc:
            raise InvalidBox(f"{where}: {exc.args[0]}") from None
        grouped.setdefault(filename, []).append(box)

    return [Annotation(name, *sizes[name], boxes) for name, boxes in grouped.items()]


def write_labels_csv(annotations):
    """Inverse of :func:`parse_labels_csv`.

    Annotations without boxes have no row to live in and are not emitted.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for ann in annotations:
        for box in ann.boxes:
            writer.writerow(
                [ann.filename, fmt_real(ann.image_width), fmt_real(ann.image_height), box.class_label]
                + [fmt_real(v) for v in box.as_tuple()]
            )
    return buf.getvalue().encode("utf-8")


# -- normalization and splitting ---------------------------------------------


def normalize_to_size(annotation, target=640):
    """Rescale an annotation to a ``target`` x ``target`` image.

    Boxes whose extent falls below one pixel after scaling are dropped and
    counted in the result.
    """
    if not target > 0:
        raise ValueError("target must be positive")
    sx = target / annotation.image_width
    sy = target / annotation.image_height
    if sx == 1 and sy == 1:
        return NormalizeResult(annotation, 0)
    kept = []
    dropped = 0
    for box in annotation.boxes:
        xmin, xmax = box.xmin * sx, min(box.xmax * sx, target)
        ymin, ymax = box.ymin * sy, min(box.ymax * sy, target)
        if xmax - xmin < 1 or ymax - ymin < 1:
            dropped += 1
            continue
        kept.append(BBox2D(box.class_label, xmin, ymin, xmax, ymax))
    return NormalizeResult(Annotation(annotation.filename, target, target, kept), dropped)


def split_dataset(annotations, train_fraction=0.75, seed=0):
    """Seeded shuffle, then the first ``floor(train_fraction * N)`` go to train."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    items = list(annotations)
    if not items:
        raise EmptyInput("cannot split an empty annotation list")
    order = list(range(len(items)))
    random.Random(seed).shuffle(order)
    n_train = math.floor(train_fraction * len(items))
    train = tuple(items[i] for i in order[:n_train])
    test = tuple(items[i] for i in order[n_train:])
    return DatasetSplit(train, test, seed)
