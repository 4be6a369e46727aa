import time

import pytest
from hypothesis import settings

from racatr.element import linear_model
from racatr.feedmodel import FeedParams, solve_q_for_edge_taper
from racatr.layout import EXPERIMENT_LAYOUT, TABLE2_LAYOUT
from racatr.scenario import Design
from racatr.synth import SynthesisConfig, run_ia

settings.register_profile("racatr", deadline=None, max_examples=40)
settings.load_profile("racatr")

TAPER_DB = -20.0


ACCEPTANCE = pytest.StashKey[list]()
SYNTH_SECONDS = {}


def _synthesize(layout):
    q = solve_q_for_edge_taper(layout, TAPER_DB)
    feed = FeedParams.from_layout(layout, q)
    t0 = time.perf_counter()
    result = run_ia(layout, feed, SynthesisConfig(max_iterations=1000))
    SYNTH_SECONDS[layout] = time.perf_counter() - t0
    return result, Design.from_phase(layout, feed, linear_model(), result.aperture_phase)


@pytest.fixture
def acceptance(request):
    """Record one ``PASS``/``FAIL`` line for the end-of-run acceptance summary."""
    def record(criterion: str, checks: dict):
        # checks: description -> (ok, detail)
        ok = all(c[0] for c in checks.values())
        lines = [f"{'PASS' if ok else 'FAIL'}  {criterion}"]
        lines += [f"        [{'ok' if c[0] else 'FAIL'}] {name}: {c[1]}" for name, c in checks.items()]
        request.config.stash.setdefault(ACCEPTANCE, []).append((criterion, "\n".join(lines)))
        print("\n".join(lines))
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, text in sorted(lines):
            terminalreporter.write_line(text)


@pytest.fixture(scope="session")
def table2_run():
    """Full 1000-iteration synthesis of the ideal example (about 45 s)."""
    return _synthesize(TABLE2_LAYOUT)


@pytest.fixture(scope="session")
def table2_result(table2_run):
    return table2_run[0]


@pytest.fixture(scope="session")
def table2_design(table2_run):
    return table2_run[1]


@pytest.fixture(scope="session")
def experiment_design():
    """The same synthesis with the feed at F = 1.207 m."""
    return _synthesize(EXPERIMENT_LAYOUT)[1]


@pytest.fixture(scope="session")
def table2_feed():
    return FeedParams.from_layout(TABLE2_LAYOUT, solve_q_for_edge_taper(TABLE2_LAYOUT, TAPER_DB))
