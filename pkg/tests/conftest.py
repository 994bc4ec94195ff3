import numpy as np
import pytest
from hypothesis import strategies as st

from boxcar.harness import generate_reference
from boxcar.measure import DiscreteMeasure, read_measure_csv

# desk-scale reference for test case 3
REF_NODES = 16384
REF_SUBSTEPS = 16

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tc3_reference(request):
    """Simplified-EBT reference for test case 3, kept in the pytest cache between sessions."""
    folder = request.config.cache.mkdir("boxcar-reference")
    path = folder / f"tc3_I{REF_NODES}_J{REF_SUBSTEPS}.csv"
    if path.exists():
        measure, meta = read_measure_csv(path, with_metadata=True)
        if meta.get("I_ref") == str(REF_NODES) and meta.get("J_ref") == str(REF_SUBSTEPS) and len(measure):
            return measure
    return generate_reference(path, 3, REF_NODES, REF_SUBSTEPS)


@st.composite
def measures(draw, max_atoms=6, lo=0.0, hi=3.0, max_mass=2.0, min_atoms=0):
    n = draw(st.integers(min_atoms, max_atoms))
    xs = draw(st.lists(st.floats(lo, hi, allow_nan=False), min_size=n, max_size=n))
    ms = draw(st.lists(st.floats(0.0, max_mass, allow_nan=False), min_size=n, max_size=n))
    return DiscreteMeasure(np.array(xs, dtype=float), np.array(ms, dtype=float))


def random_pair_on_pool(rng, pool_size=6, scale=3.0, grid=None):
    """Two measures drawn from a shared pool of positions, so the merged support stays small."""
    if grid is None:
        pool = np.sort(rng.uniform(0.0, scale, pool_size))
    else:
        pool = np.sort(rng.choice(int(scale / grid) + 1, pool_size, replace=False)) * grid
    a = rng.random(pool_size) < 0.6
    b = rng.random(pool_size) < 0.6
    mu = DiscreteMeasure(pool[a], rng.uniform(0.0, 2.0, a.sum()))
    nu = DiscreteMeasure(pool[b], rng.uniform(0.0, 2.0, b.sum()))
    return mu, nu
