import numpy as np
import pytest

from greedybn.dataset import CONTINUOUS, DISCRETE, Column, Dataset, Schema
from greedybn.kernels import _fallback

try:
    from greedybn.kernels import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = [pytest.param(_fallback, id="python")]
if _core is not None:
    BACKENDS.append(pytest.param(_core, id="compiled"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def make_dataset(disc=None, cont=None, levels=None):
    """Dataset from dicts of integer level codes and float columns."""
    disc = disc or {}
    cont = cont or {}
    levels = levels or {}
    cols = []
    for name, v in disc.items():
        nl = levels.get(name, max(2, int(np.max(v)) + 1))
        cols.append(Column(name, DISCRETE, tuple(f"l{k}" for k in range(nl))))
    cols += [Column(name, CONTINUOUS) for name in cont]
    return Dataset.from_columns(Schema(tuple(cols)), {**disc, **cont})


def gaussian_chain(n, seed=0, coefs=(1.5, -1.0)):
    """A -> B -> C linear Gaussian data."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = coefs[0] * a + rng.normal(size=n)
    c = coefs[1] * b + rng.normal(size=n)
    return make_dataset(cont={"A": a, "B": b, "C": c})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ------------------------------------------------------

_ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for an acceptance criterion."""
    def record(number, ok, detail=""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _ACCEPTANCE[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
