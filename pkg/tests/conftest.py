import json

import pytest

TINY_OVERRIDE = {
    "corpus": {"n_clean": 8, "clean_duration_s": 1.0, "n_test": 4, "test_duration_s": 1.0, "noise_duration_s": 30.0},
    "model": {"hidden_sizes": [16]},
    "train": {"epochs": 1, "batch_size": 4, "segment_s": 0.5},
    "experiments": {"seeds": [0], "interpretation": {"probe_items": 4}, "joint_scaleup": {"clean_count": 4}},
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_OVERRIDE))
    return path


_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: numbered acceptance criteria (slow)")


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for a numbered acceptance criterion."""
    def record(number, passed, detail):
        _CRITERIA.append((number, bool(passed), detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
