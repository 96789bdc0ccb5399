import numpy as np
import pytest

from leakbench import PhantomConfig, TrialSet, generate_phantom


@pytest.fixture(scope="session")
def phantom():
    """Default-geometry phantom, shared read-only across tests."""
    return generate_phantom(PhantomConfig(master_seed=11))


@pytest.fixture(scope="session")
def small_phantom():
    return generate_phantom(
        PhantomConfig(n_trials=20, trial_seconds=8, n_channels=4, master_seed=1)
    )


def separable_trialset(n_trials=20, n_channels=4, seconds=4, fs=128.0, seed=0):
    """Class-1 trials carry much more broadband power than class-0 trials."""
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n_trials // 2)
    rng.shuffle(labels)
    scale = np.where(labels == 1, 10.0, 1.0)[:, None, None]
    x = rng.normal(size=(n_trials, n_channels, int(seconds * fs))) * scale
    return TrialSet.from_array(x, fs, labels=labels)


ACCEPTANCE_LINES = []


def record_criterion(name, passed, detail, status=None):
    status = status or ("PASS" if passed else "FAIL")
    line = f"[{status}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
