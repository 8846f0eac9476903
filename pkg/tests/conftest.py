import math

import numpy as np
import pytest

from oamsim.fock import BasisState, PureState

PATHS = ("a", "b", "c", "d")


def random_state(rng, n_photons=None, paths=PATHS, ell_range=16, max_terms=6) -> PureState:
    """Normalized random superposition with up to 4 photons and |ell| <= ell_range."""
    if n_photons is None:
        n_photons = int(rng.integers(1, 5))
    terms = {}
    for _ in range(int(rng.integers(1, max_terms + 1))):
        modes = [(paths[int(rng.integers(len(paths)))], int(rng.integers(-ell_range, ell_range + 1))) for _ in range(n_photons)]
        b = BasisState.from_modes(modes)
        terms[b] = terms.get(b, 0j) + complex(rng.normal(), rng.normal())
    return PureState(terms, n_photons).normalized()


def random_qubit(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return complex(v[0]), complex(v[1])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def ket(*modes, amp=1.0):
    return PureState.basis(modes, amp)


SQ = 1 / math.sqrt(2)


# One PASS/FAIL line per acceptance criterion, printed after the run.

_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, True])
    entry[1] = entry[1] and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")
