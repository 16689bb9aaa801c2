from pathlib import Path

import numpy as np
import pytest

from proxycert.netsim import load_zone
from proxycert.sampler import SamplerConfig

ROOT = Path(__file__).resolve().parents[1]
REFERENCE_ZONE = ROOT / "zones" / "reference_5x10.json"
REFERENCE_CONFIG = ROOT / "configs" / "reference_run.json"


@pytest.fixture(scope="session")
def reference_zone():
    return load_zone(REFERENCE_ZONE)


@pytest.fixture(scope="session")
def reference_sampler(reference_zone):
    return SamplerConfig.default(reference_zone.num_nodes, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS_KEY] = {}


@pytest.fixture
def verdict(request):
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    store = request.config.stash[_VERDICTS_KEY]

    def record(number: int, ok: bool, detail: str) -> None:
        store[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_VERDICTS_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        ok, detail = store[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
