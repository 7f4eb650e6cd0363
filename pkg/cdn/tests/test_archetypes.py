import numpy as np
import pytest

from cdn.services.archetypes import ArchetypeSpec, archetype_edges, generate
from cdn.services.copulas import CLAYTON, NORMAL_PAIR
from cdn.services.errors import InvalidSpec


class TestEdges:
    @pytest.mark.parametrize('family,n,size,factors', [
        ('chain', 5, 5, 4),
        ('loop', 5, 5, 5),
        ('tree', 3, 7, 6),
        ('tree', 4, 15, 14),
        ('grid', 3, 9, 12),
        ('grid', 4, 16, 24),
    ])
    def test_counts(self, family, n, size, factors):
        actual_size, edges = archetype_edges(family, n)
        assert actual_size == size
        assert len(edges) == factors

    def test_loop_closes_the_chain(self):
        _, edges = archetype_edges('loop', 4)
        assert edges[-1] == (3, 0)

    def test_tree_children(self):
        _, edges = archetype_edges('tree', 2)
        assert edges == [(0, 1), (0, 2)]


class TestSpec:
    @pytest.mark.parametrize('args', [
        ('ring', 3), ('chain', 1), ('loop', 2), ('chain', 3, 'frank'), ('chain', 3, 'normal', 1.0),
        ('chain', 3, 'clayton', 0.0),
    ], ids=['family', 'chain-size', 'loop-size', 'copula', 'rho', 'theta'])
    def test_rejected(self, args):
        with pytest.raises(InvalidSpec):
            ArchetypeSpec(*args)


class TestGenerate:
    def test_names_and_kinds(self):
        model = generate(ArchetypeSpec('grid', 2, 'clayton'), seed=1)
        assert model.names == ['X1', 'X2', 'X3', 'X4']
        assert {f.kind for f in model.factors} == {CLAYTON}

    def test_fixed_parameter(self):
        model = generate(ArchetypeSpec('chain', 4, 'normal', 0.25))
        assert {f.kind for f in model.factors} == {NORMAL_PAIR}
        np.testing.assert_array_equal(model.params(), [0.25, 0.25, 0.25])

    def test_seed_is_reproducible(self):
        spec = ArchetypeSpec('loop', 6, 'clayton')
        np.testing.assert_array_equal(generate(spec, seed=9).params(), generate(spec, seed=9).params())
        assert not np.array_equal(generate(spec, seed=9).params(), generate(spec, seed=10).params())

    def test_random_parameters_in_range(self):
        model = generate(ArchetypeSpec('tree', 4, 'normal'), seed=2)
        assert np.all((model.params() >= 0.0) & (model.params() < 1.0))
