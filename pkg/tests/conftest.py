import math
from dataclasses import replace

import pytest

from qkdsim.core import DetectorParams, RunConfig, SourceParams

_criteria: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    """Log an acceptance criterion outcome; printed in the terminal summary."""

    def record(label: str, passed: bool, detail: str = "") -> bool:
        _criteria.append((label, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _criteria:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")


IDEAL_DETECTOR = DetectorParams(eta_d=1.0, v_d=0.0, rho_d=1.0)
REF_SOURCE = SourceParams(pump_rate=1e9, first_pair_prob=4e-6, second_pair_prob=1 / 3, eve_prob=0.0)
REF_DETECTOR = DetectorParams(eta_d=0.8, v_d=2e-4, rho_d=0.8)


@pytest.fixture
def ideal_cfg() -> RunConfig:
    return RunConfig(
        desired_key_length=300,
        source=replace(REF_SOURCE, second_pair_prob=0.0),
        detector=IDEAL_DETECTOR,
        seed=11,
    )


@pytest.fixture
def ref_cfg() -> RunConfig:
    return RunConfig(desired_key_length=300, source=REF_SOURCE, detector=REF_DETECTOR, seed=2024)


@pytest.fixture
def eve_cfg() -> RunConfig:
    return RunConfig(desired_key_length=48, source=replace(REF_SOURCE, eve_prob=0.3),
                     detector=REF_DETECTOR, seed=4242)


def angle_dot(theta_a: float, theta_b: float) -> float:
    """Dot product of two planar unit vectors, from their angles alone."""
    return math.cos(theta_a - theta_b)
