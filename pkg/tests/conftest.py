import numpy as np
import pytest

import divband as db

# the reference configuration exercised throughout: Gaussian nominals with
# KL balls at threshold 1
REF = {
    "mean0": -1.0,
    "var0": 1.0,
    "mean1": 1.0,
    "var1": 2.0,
    "eps0": 0.03,
    "eps1": 0.02,
    "lam": 1.0,
}


@pytest.fixture(scope="session")
def grid4096():
    return db.Grid(-12.0, 12.0, 4096)


@pytest.fixture(scope="session")
def grid512():
    return db.Grid(-12.0, 12.0, 512)


def _nominals(grid):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p0 = db.gaussian_density(grid, REF["mean0"], REF["var0"])
        p1 = db.gaussian_density(grid, REF["mean1"], REF["var1"])
    return p0, p1


@pytest.fixture(scope="session")
def nominals4096(grid4096):
    return _nominals(grid4096)


@pytest.fixture(scope="session")
def nominals512(grid512):
    return _nominals(grid512)


@pytest.fixture(scope="session")
def balls4096(nominals4096):
    p0, p1 = nominals4096
    return (
        db.UncertaintyBall(p0, db.kl(), REF["eps0"]),
        db.UncertaintyBall(p1, db.kl(), REF["eps1"]),
    )


@pytest.fixture(scope="session")
def balls512(nominals512):
    p0, p1 = nominals512
    return (
        db.UncertaintyBall(p0, db.kl(), REF["eps0"]),
        db.UncertaintyBall(p1, db.kl(), REF["eps1"]),
    )


@pytest.fixture(scope="session")
def calibrated4096(balls4096):
    return db.calibrate(balls4096[0], balls4096[1], REF["lam"])


@pytest.fixture(scope="session")
def calibrated512(balls512):
    return db.calibrate(balls512[0], balls512[1], REF["lam"])


@pytest.fixture
def rng():
    return np.random.default_rng(42)
