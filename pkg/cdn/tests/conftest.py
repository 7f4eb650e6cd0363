"""Shared fixtures for the CDN test suite."""

import json

import numpy as np
import pytest

from cdn.services.copulas import CLAYTON, NORMAL_PAIR
from cdn.services.margins import DiscreteMargin
from cdn.services.model import CdnModel, CopulaFactor, model_to_dict, student_network

from .oracles import normal_variables


# --- Model fixtures ---

@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture
def clayton_pair():
    return CdnModel(normal_variables('A', 'B'), [CopulaFactor(CLAYTON, 2.0, (0, 1))])


@pytest.fixture
def normal_pair():
    return CdnModel(normal_variables('A', 'B'), [CopulaFactor(NORMAL_PAIR, 0.6, (0, 1))])


@pytest.fixture
def normal_chain():
    """X1 - X2 - X3 with normal factors."""
    return CdnModel(
        normal_variables('X1', 'X2', 'X3'),
        [CopulaFactor(NORMAL_PAIR, 0.5, (0, 1)), CopulaFactor(NORMAL_PAIR, -0.3, (1, 2))],
    )


@pytest.fixture
def mixed_model():
    """A trivariate Clayton factor sharing X3 with a normal pair, plus a Clayton loop edge."""
    return CdnModel(
        normal_variables('X1', 'X2', 'X3', 'X4'),
        [
            CopulaFactor(CLAYTON, 1.2, (0, 1, 2)),
            CopulaFactor(NORMAL_PAIR, 0.4, (2, 3)),
            CopulaFactor(CLAYTON, 0.7, (3, 0)),
        ],
    )


@pytest.fixture
def student():
    return student_network()


@pytest.fixture
def discrete_pair():
    return CdnModel(
        [('A', DiscreteMargin(0, [0.2, 0.5, 0.3])), ('B', DiscreteMargin(1, [0.6, 0.4]))],
        [CopulaFactor(CLAYTON, 1.5, (0, 1))],
    )


@pytest.fixture
def discrete_triple():
    return CdnModel(
        [
            ('A', DiscreteMargin(0, [0.3, 0.7])),
            ('B', DiscreteMargin(0, [0.1, 0.4, 0.5])),
            ('C', DiscreteMargin(2, [0.5, 0.5])),
        ],
        [CopulaFactor(NORMAL_PAIR, 0.5, (0, 1)), CopulaFactor(CLAYTON, 2.0, (1, 2))],
    )


@pytest.fixture
def model_file(tmp_path, normal_chain):
    path = tmp_path / 'chain.json'
    path.write_text(json.dumps(model_to_dict(normal_chain)), encoding='utf-8')
    return path
