import textwrap

import pytest

from ipsim.dynamics.rules import BINARY, Contact, CustomRule, IndependentFlip
from ipsim.graph.graph_builder import build_torus


@pytest.fixture
def cycle3():
    return build_torus(1, 3)


@pytest.fixture
def cycle4():
    return build_torus(1, 4)


@pytest.fixture
def cycle8():
    return build_torus(1, 8)


@pytest.fixture
def torus5():
    return build_torus(2, 5)


@pytest.fixture
def contact():
    return Contact(lam=1.0, delta=1.0)


@pytest.fixture
def pure_birth():
    return IndependentFlip(up=1.0, down=0.0)


@pytest.fixture
def anti_monotone():
    """Failed neighbours slow a site's own failure down."""

    def rate_fn(own, counts):
        failed = int(counts[0, 1])
        return [0.0, max(0.0, 2.0 - 0.5 * failed)] if own == 0 else [0.5, 0.0]

    return CustomRule(BINARY, 1, rate_fn, name="anti-monotone")


@pytest.fixture
def write_config(tmp_path):
    def _write(body: str, name: str = "experiment.toml") -> str:
        path = tmp_path / name
        path.write_text(textwrap.dedent(body), encoding="utf-8")
        return str(path)

    return _write


TORUS_INDEPENDENT = """
    [graph]
    type = "torus"
    dim = 2
    side = 5

    [model]
    type = "independent"
    lambda = 1.0

    [sim]
    t_end = 3.0
    grid = "linspace(0, 3, 61)"
    replicas = 200
    seed = 11

    [analysis]
    times = [1.0]
    alpha = 0.5
"""


@pytest.fixture
def torus_independent_toml():
    return TORUS_INDEPENDENT
