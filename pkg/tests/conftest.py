from pathlib import Path

import pytest

from h2entangle.model import PhysicsModel
from h2entangle.potentials import default_dressed_pair, embedded_curves

DATA = Path(__file__).parent / "data"


def read_golden(name="golden_delta_theta.txt"):
    out = {}
    for line in (DATA / name).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            key, value = line.split()
            out[key] = float(value)
    return out


@pytest.fixture(scope="session")
def curves():
    return embedded_curves()


@pytest.fixture(scope="session")
def dressed():
    return default_dressed_pair()


@pytest.fixture(scope="session")
def model():
    return PhysicsModel.build()
