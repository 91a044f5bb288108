import sys
from pathlib import Path

import pytest

from parklot.annot_ingest import parse_labels_csv, parse_voc_xml
from parklot.depth_model import PlanarPoint
from parklot.view_fusion import Object3D, Rect

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def fixture_corpus():
    """Every annotation in the fixtures directory, XML and CSV alike."""
    anns = [parse_voc_xml(p.read_bytes()) for p in sorted(FIXTURES.glob("*.xml"))]
    anns += parse_labels_csv((FIXTURES / "labels.csv").read_bytes())
    return anns


def make_object(cls, x_lo, x_hi, y_lo=0.0, y_hi=1.0, area=100.0, view=0, z=1.0):
    fp = Rect(x_lo, y_lo, x_hi, y_hi)
    return Object3D(cls, PlanarPoint((x_lo + x_hi) / 2, y_lo), z, area, fp, view)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.RESULTS:
            terminalreporter.write_line(line)
