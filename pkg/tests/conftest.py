import logging
from itertools import combinations

import numpy as np
import pytest

from trip import SceneConfig, build_viewing_graph, generate_scene

logging.getLogger("trip").setLevel(logging.ERROR)


def graph_from_points(x, pairs=None, corrupt=None, latent=None):
    """Viewing graph with exact directions x_i - x_j (or latent ones on ``corrupt``)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if pairs is None:
        pairs = list(combinations(range(n), 2))
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    vec = x[pairs[:, 0]] - x[pairs[:, 1]]
    if corrupt is not None:
        bad = np.asarray(corrupt, dtype=bool)
        vec[bad] = latent[pairs[bad, 0]] - latent[pairs[bad, 1]]
    return build_viewing_graph(n, (pairs, vec))


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture(scope="session")
def clean_grid():
    return generate_scene(SceneConfig(geometry="grid", n=49, seed=0))


@pytest.fixture(scope="session")
def clean_torus():
    return generate_scene(SceneConfig(geometry="torus", n=60, seed=1))


@pytest.fixture(scope="session")
def corrupt_grid():
    return generate_scene(SceneConfig(geometry="grid", n=64, q=0.2, seed=3))


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion."""

    def record(num, ok, detail):
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
