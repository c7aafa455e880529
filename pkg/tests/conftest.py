import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from tact.kg import from_ids  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_triples(rng, num_entities, num_relations, num_edges, reflexive=False):
    out = []
    while len(out) < num_edges:
        h, t = (int(x) for x in rng.integers(num_entities, size=2))
        if h == t and not reflexive:
            continue
        out.append((h, int(rng.integers(num_relations)), t))
    return out


def random_graph(rng, num_entities=12, num_relations=3, num_edges=20, reflexive=False):
    return from_ids(random_triples(rng, num_entities, num_relations, num_edges, reflexive), num_entities, num_relations)


@st.composite
def graphs(draw, max_entities=10, max_relations=4, max_edges=25, reflexive=False):
    n_e = draw(st.integers(2, max_entities))
    n_r = draw(st.integers(1, max_relations))
    node = st.integers(0, n_e - 1)
    edge = st.tuples(node, st.integers(0, n_r - 1), node)
    if not reflexive:
        edge = edge.filter(lambda e: e[0] != e[2])
    triples = draw(st.lists(edge, max_size=max_edges))
    return from_ids(triples, n_e, n_r)


# ------------------------------------------------------------- acceptance report

_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
