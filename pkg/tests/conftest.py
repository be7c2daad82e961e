from __future__ import annotations

import pytest

from cofcheck.algorithms import load_reference
from cofcheck.valency import build_valency_graph, construct_refutation


@pytest.fixture(scope="session")
def cons3():
    return load_reference("cons3-naive")[1]


@pytest.fixture(scope="session")
def cons3_vg(cons3):
    return build_valency_graph(cons3)


@pytest.fixture(scope="session")
def cons3_refutation(cons3, cons3_vg):
    return construct_refutation(cons3, vg=cons3_vg)
