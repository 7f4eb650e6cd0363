"""
Archetypal CDN structures with bivariate factors and standard normal margins.

    chain  n variables, edges (i, i+1)
    loop   the chain plus (n-1, 0)
    tree   complete binary tree with n levels (2^n - 1 variables)
    grid   n x n lattice, one factor per lattice edge
"""

import logging

import numpy as np

from . import copulas
from .errors import InvalidSpec
from .margins import NormalMargin
from .model import CdnModel, CopulaFactor

logger = logging.getLogger(__name__)

FAMILIES = ('chain', 'loop', 'tree', 'grid')
MIN_SIZE = {'chain': 2, 'loop': 3, 'tree': 2, 'grid': 2}
COPULA_KINDS = {'clayton': copulas.CLAYTON, 'normal': copulas.NORMAL_PAIR}


class ArchetypeSpec:
    """Family, size and copula; param None draws each factor's parameter at random."""

    def __init__(self, family, n, copula='normal', param=None):
        if family not in FAMILIES:
            raise InvalidSpec(f'unknown family {family!r}; choose from {", ".join(FAMILIES)}')
        if copula not in COPULA_KINDS:
            raise InvalidSpec(f'unknown copula {copula!r}; choose from clayton, normal')
        n = int(n)
        if n < MIN_SIZE[family]:
            raise InvalidSpec(f'{family} needs n >= {MIN_SIZE[family]}, got {n}')
        kind = COPULA_KINDS[copula]
        if param is not None and not copulas.in_domain(kind, 2, param):
            lo, hi = copulas.param_domain(kind, 2)
            raise InvalidSpec(f'{copula} parameter {param} outside ({lo}, {hi})')
        self.family = family
        self.n = n
        self.copula = copula
        self.kind = kind
        self.param = param

    def __repr__(self):
        return f'ArchetypeSpec({self.family!r}, {self.n}, {self.copula!r}, param={self.param!r})'


def archetype_edges(family, n):
    """(number of variables, edge list) of a family at size n."""
    if family == 'chain':
        return n, [(i, i + 1) for i in range(n - 1)]
    if family == 'loop':
        return n, [(i, i + 1) for i in range(n - 1)] + [(n - 1, 0)]
    if family == 'tree':
        size = 2 ** n - 1
        edges = []
        for i in range(size):
            for c in (2 * i + 1, 2 * i + 2):
                if c < size:
                    edges.append((i, c))
        return size, edges
    if family == 'grid':
        edges = []
        for r in range(n):
            for c in range(n):
                v = r * n + c
                if c + 1 < n:
                    edges.append((v, v + 1))
                if r + 1 < n:
                    edges.append((v, v + n))
        return n * n, edges
    raise InvalidSpec(f'unknown family {family!r}')


def generate(spec, seed=None):
    """A model for the archetype; random parameters are reproducible per seed."""
    rng = np.random.default_rng(seed)
    size, edges = archetype_edges(spec.family, spec.n)
    factors = [
        CopulaFactor(
            spec.kind,
            spec.param if spec.param is not None else copulas.draw_param(spec.kind, rng),
            edge,
        )
        for edge in edges
    ]
    variables = [(f'X{i + 1}', NormalMargin()) for i in range(size)]
    logger.debug('Generated %r: %d variables, %d factors', spec, size, len(factors))
    return CdnModel(variables, factors)
