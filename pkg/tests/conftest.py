from pathlib import Path

import numpy as np
import pytest

from hsiband.cube_io import SpectralCube, WavelengthAxis
from hsiband.synthgen import default_scene_spec, generate_scene

DATA = Path(__file__).parent / "data"

_acceptance_lines: list[str] = []


@pytest.fixture
def record_criterion():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""

    def record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" -- {detail}"
        _acceptance_lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def axis128():
    return WavelengthAxis.uniform(450.0, 950.0, 128)


@pytest.fixture(scope="session")
def metamer_scene():
    return generate_scene(default_scene_spec())


def make_cube(data, wavelengths=None):
    data = np.asarray(data, dtype=np.float32)
    if wavelengths is None:
        wavelengths = np.linspace(450.0, 950.0, data.shape[0]) if data.shape[0] > 1 else [500.0]
    return SpectralCube(data, WavelengthAxis(np.asarray(wavelengths, float)))
