import hypothesis
import numpy as np
import pytest

from cxrtasks.core import ImageInfo, Manifest, PathologyAnnotation, Polygons, DiagnosisLabel
from cxrtasks.synthetic import make_manifest

hypothesis.settings.register_profile("default", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile("default")

np.seterr(all="raise")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rect(x0, y0, x1, y1):
    return Polygons((((x0, y0), (x1, y0), (x1, y1), (x0, y1)),))


@pytest.fixture
def tiny_manifest():
    images = (
        ImageInfo("a", 100, 100, DiagnosisLabel.ACTIVE_TB),
        ImageInfo("b", 200, 100, DiagnosisLabel.NORMAL),
    )
    anns = (
        PathologyAnnotation("a", "consolidation", rect(10, 10, 30, 30)),
        PathologyAnnotation("a", "consolidation", rect(60, 60, 90, 80)),
        PathologyAnnotation("a", "cavitation", rect(60, 10, 80, 25)),
    )
    return Manifest(images, anns, ("consolidation", "cavitation", "pleural effusion"))


@pytest.fixture(scope="session")
def synthetic_manifest():
    return make_manifest(100, seed=7)
