import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from regnash.games import BUILTIN_MATRICES, build_kuhn_poker, build_matrix_game, build_polymatrix_game

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BIASED_MP = BUILTIN_MATRICES["biased_mp"]


@pytest.fixture(scope="session")
def biased_mp():
    return build_matrix_game(BIASED_MP, name="biased_mp")


@pytest.fixture(scope="session")
def kuhn():
    return build_kuhn_poker()


def random_antisymmetric_polymatrix(rng, n=3, k=2):
    blocks = {}
    for i in range(n):
        for j in range(i + 1, n):
            blocks[(i, j)] = rng.normal(size=(k, k))
    return build_polymatrix_game(blocks, num_players=n)


@pytest.fixture(scope="session")
def poly3():
    return random_antisymmetric_polymatrix(np.random.default_rng(7))


# ------------------------------------------------------------ acceptance report
_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    _ACCEPTANCE[marker.args[0]] = ("PASS" if rep.passed else "FAIL", item.name, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        status, name, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {name}  {detail}")
