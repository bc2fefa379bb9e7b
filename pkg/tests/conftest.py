from fractions import Fraction

import pytest

from rabi_cf.model import ModelParams, SectorLabel

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture
def two_mode():
    return ModelParams.two_mode(1.0, 0.7, 0.5)


@pytest.fixture
def two_photon():
    return ModelParams.k_photon(2, 1.0, 0.3, 0.2)


def sector(block, parity="plus"):
    return SectorLabel(Fraction(block), parity)
