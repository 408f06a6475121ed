import numpy as np
import pytest

from markovdetect.corpus import Alphabet
from markovdetect.markov import HiddenMarkovSource, iid_model

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def accept():
    """Record one acceptance-criterion verdict; echoed in the summary block."""

    def _record(criterion: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE_RESULTS[criterion] = (passed, detail)
        print(f"[ACCEPT] {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, (passed, detail) in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(
            f"[ACCEPT] {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
        )


@pytest.fixture
def ab_alphabet():
    return Alphabet(symbols=("a", "b"))


@pytest.fixture
def fair_vs_biased():
    """The canonical i.i.d. pair used across detection tests."""
    return iid_model([0.5, 0.5]), iid_model([0.9, 0.1])


@pytest.fixture
def two_state_hmm():
    """Sticky two-state source with overlapping emissions (not Markov of any order)."""
    return HiddenMarkovSource.with_stationary_start(
        transition=np.array([[0.9, 0.1], [0.2, 0.8]]),
        emission=np.array([[0.8, 0.2], [0.3, 0.7]]),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
