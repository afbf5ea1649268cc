import sys

import numpy as np
import pytest

from resilient_forecast.advtrain import AdvTrainJob, adversarial_train, train_clean
from resilient_forecast.attacks import Scaling
from resilient_forecast.dataio import SynthConfig, split_windows, synth_series
from resilient_forecast.mlp import TrainConfig

TRAIN_PERIOD = ("2004-01-01", "2005-12-31")
TEST_PERIOD = ("2006-01-01", "2006-12-31")

def _dates(period):
    from datetime import date

    return tuple(date.fromisoformat(d) for d in period)


@pytest.fixture(scope="session")
def series():
    return synth_series(SynthConfig(), 7)


@pytest.fixture(scope="session")
def splits(series):
    return split_windows(series, _dates(TRAIN_PERIOD), _dates(TEST_PERIOD))


@pytest.fixture(scope="session")
def small_splits(splits):
    """A few months of windows for tests that train many models."""
    train, test = splits
    return train.take(np.arange(120)), test.take(np.arange(60))


@pytest.fixture(scope="session")
def traditional(splits):
    return train_clean(splits[0], TrainConfig(seed=0))


@pytest.fixture(scope="session")
def scaladv(splits):
    return adversarial_train(splits[0], AdvTrainJob(Scaling(2.0, 0.0119, 0), TrainConfig(seed=0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = [line for mod in list(sys.modules.values())
             for line in getattr(mod, "ACCEPTANCE_RESULTS", [])]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
