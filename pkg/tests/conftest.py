"""Shared fixtures and the acceptance-summary reporter."""
from __future__ import annotations

import numpy as np
import pytest

from tmsclean import montage
from tmsclean.core import EpochSet, Recording


@pytest.fixture(scope="session")
def channels30():
    return montage.standard_montage(30)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def make_recording(data, fs=1000.0, channels=None, events=None):
    channels = channels if channels is not None else montage.standard_montage(data.shape[0])
    events = events if events is not None else []
    return Recording(data=np.asarray(data, dtype=float), fs=fs,
                     channels=channels, events=list(events))


def make_epochs(data, fs=1000.0, t0=-1.0, channels=None, **kw):
    channels = channels if channels is not None else montage.standard_montage(data.shape[1])
    return EpochSet(data=np.asarray(data, dtype=float), fs=fs, t0=t0,
                    channels=channels, **kw)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE_RESULTS[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE_RESULTS.items()):
        terminalreporter.write_line(f"{outcome}  {name}")
