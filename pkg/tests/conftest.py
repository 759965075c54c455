import contextlib
import time

import numpy as np
import pytest

from holonomylab.families import poincare_disk_family, product_family, fubini_study_family


@pytest.fixture(scope="session")
def poincare():
    return poincare_disk_family()


@pytest.fixture(scope="session")
def product4d():
    return product_family()


@pytest.fixture(scope="session")
def fubini():
    return fubini_study_family()


def random_spd(rng, dim, spread=1.0):
    a = rng.standard_normal((dim, dim))
    return a @ a.T + spread * np.eye(dim)


def random_skew(rng, dim, scale=1.0):
    a = rng.standard_normal((dim, dim))
    return scale * 0.5 * (a - a.T)


def series_exp(mat, terms=40):
    """Taylor-series exponential, independent of scipy (test oracle)."""
    out = np.eye(mat.shape[0])
    power = np.eye(mat.shape[0])
    for n in range(1, terms):
        power = power @ mat / n
        out = out + power
    return out


@contextlib.contextmanager
def criterion(number, description, budget=None):
    """Print one pass/fail line per acceptance criterion."""
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:02d} {description}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    print(f"ACCEPTANCE {number:02d} {description}: PASS ({elapsed:.1f}s)")
    if budget is not None:
        assert elapsed < budget, f"criterion {number} exceeded its {budget}s runtime budget"
