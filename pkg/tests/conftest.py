import json

import numpy as np
import pytest

from glvreduce.model import GlvModel

_acceptance_lines = []


@pytest.fixture
def record_criterion():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""
    def record(number, passed, detail):
        _acceptance_lines.append(f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}  {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def two_species():
    return GlvModel([1.0, 0.9], [[-1.0, 0.2], [-0.15, -1.1]], [0.3, 0.6])


@pytest.fixture
def nested_three():
    # a13 = 0 so that x3 can be eliminated through row 2 and x2 through row 1
    A = [[-1.0, 0.2, 0.0], [0.1, -1.2, 0.25], [-0.2, 0.15, -0.9]]
    return GlvModel([1.0, 0.8, 1.2], A, [0.3, 0.5, 0.7])


@pytest.fixture
def write_json(tmp_path):
    def write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path
    return write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
