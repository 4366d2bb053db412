import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mfas.gp_core import CondensedGP, Hyperparameters, TrainingSet  # noqa: E402
from mfas.mf_model import MultiFidelityModel, OutputScaling  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def random_hyper(rng, dim, nugget_range=(1e-2, 1.0)):
    return Hyperparameters(
        amplitude=float(np.exp(rng.uniform(np.log(0.3), np.log(3.0)))),
        inv_length_scales=np.exp(rng.uniform(np.log(0.5), np.log(30.0), dim)),
        nugget=float(np.exp(rng.uniform(*np.log(nugget_range)))) if nugget_range[1] > 0 else 0.0,
    )


def random_gp(rng, n, dim, nugget_range=(1e-2, 1.0)):
    X = rng.random((n, dim))
    y = rng.normal(size=n)
    return CondensedGP(random_hyper(rng, dim, nugget_range), TrainingSet(X, y))


def random_mf_model(rng, n_eta, n_y, dim, scaled=True):
    scaling = OutputScaling(float(rng.normal()), float(np.exp(rng.uniform(-1, 1)))) if scaled else OutputScaling()
    return MultiFidelityModel(random_gp(rng, n_eta, dim), random_gp(rng, n_y, dim), scaling)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
