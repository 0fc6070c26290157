import numpy as np
import pytest

from mmcoal import measures as M

ALL_MEASURES = [
    M.Kingman(),
    M.BolthausenSznitman(),
    M.Beta(0.5, 1.5),
    M.Beta(1.5, 0.5),
    M.Beta(2.5, 1.0),
    M.Dirac(0.3),
    M.Dirac(0.8),
    M.EldonWakeley(0.5),
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mc_close(samples, expected, n_se=3.0):
    """Mean of ``samples`` within ``n_se`` standard errors of ``expected``."""
    samples = np.asarray(samples, dtype=float)
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(samples.mean() - expected) <= n_se * se


# Beta versus growth reference table at full size. Building it takes a few
# minutes, so it is shared by every module that needs it.
CLASSIFICATION_ROWS = 10_000
CLASSIFICATION_N = 100
TABLE_SEED = 2024
FOREST_SEED = 7


@pytest.fixture(scope="session")
def beta_growth_table():
    from mmcoal import rfabc

    return rfabc.simulate_reference_table(
        [rfabc.BetaClass(), rfabc.GrowthClass()], CLASSIFICATION_ROWS, CLASSIFICATION_N, TABLE_SEED
    )


@pytest.fixture(scope="session")
def beta_growth_forests(beta_growth_table):
    """Forests on three statistic sets, trained lazily and kept for the session."""
    from mmcoal import rfabc

    cache = {}

    def get(groups):
        key = tuple(groups)
        if key not in cache:
            cache[key] = rfabc.train_forest(beta_growth_table, 500, rng_seed=FOREST_SEED, groups=list(groups))
        return cache[key]

    return get


# --------------------------------------------------------------------------
# One pass/fail line per acceptance criterion

_CRITERIA: list[tuple[str, str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        label, title = mark.args
        if hasattr(rep, "wasxfail"):
            status = "FAIL" if rep.skipped else "PASS"
            note = "expected failure, known unattainable"
        else:
            status = "PASS" if rep.passed else "FAIL"
            note = ""
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        line = f"[{status}] criterion {label}: {title}"
        if detail:
            line += f" | {detail}"
        if note:
            line += f" ({note})"
        _CRITERIA.append((label, status, title, line))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for *_, line in _CRITERIA:
        terminalreporter.write_line(line)
