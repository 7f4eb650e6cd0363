"""
Tests for the conditional-method sampler. Structural checks run by default;
the Monte-Carlo checks on dependence and margins are marked slow.
"""

import numpy as np
import pytest
from scipy import stats

from cdn.services.archetypes import ArchetypeSpec, generate
from cdn.services.copulas import NORMAL_PAIR, factor_log_partial
from cdn.services.errors import InvalidSpec
from cdn.services.inference import query
from cdn.services.margins import std_normal_cdf, std_normal_quantile
from cdn.services.model import CdnModel, CopulaFactor, CumulativeBound, Point
from cdn.services.sampling import make_sampling_cliques, sample_cdn, sample_conditional, sample_copula

from .oracles import normal_variables


def empirical_cdf(u, grid):
    """Joint empirical CDF of the first two columns on grid x grid."""
    below_a = u[:, 0, None] <= grid
    below_b = u[:, 1, None] <= grid
    return (below_a[:, :, None] & below_b[:, None, :]).mean(axis=0)


class TestPlan:
    @pytest.mark.parametrize('fixture', ['normal_chain', 'mixed_model', 'student'])
    def test_every_variable_drawn_once(self, request, fixture, rng):
        model = request.getfixturevalue(fixture)
        plan = make_sampling_cliques(model, rng)
        assert sorted(plan.order) == list(range(model.n))
        assert plan.steps[0].conditioning == ()

    def test_chain_starts_at_a_leaf(self, normal_chain, rng):
        plan = make_sampling_cliques(normal_chain, rng)
        assert plan.order[0] in (0, 2)

    def test_conditioning_is_the_adjacent_drawn_branch(self, normal_chain):
        plan = make_sampling_cliques(normal_chain, order=['X1', 'X3', 'X2'])
        assert [s.conditioning for s in plan.steps] == [(), (), (0, 2)]

    def test_factor_untouched_by_conditioning_is_an_extra(self, normal_chain):
        plan = make_sampling_cliques(normal_chain, order=['X1', 'X2', 'X3'])
        second = plan.steps[1]
        assert second.conditioning == (0,)
        assert second.factor_ids == [0]
        assert second.extras == [1]

    def test_observed_variables_count_as_drawn(self, normal_chain, rng):
        plan = make_sampling_cliques(normal_chain, rng, observed=['X2'])
        assert sorted(plan.order) == [0, 2]
        assert plan.steps[0].conditioning == (1,)
        assert 1 in plan.steps[1].conditioning

    def test_order_must_match_targets(self, normal_chain):
        with pytest.raises(InvalidSpec):
            make_sampling_cliques(normal_chain, order=['X1', 'X2'])

    def test_observed_target_overlap(self, normal_chain):
        with pytest.raises(InvalidSpec):
            make_sampling_cliques(normal_chain, observed=['X1'], targets=['X1', 'X2'])


class TestSampling:
    def test_same_seed_same_samples(self, mixed_model):
        first = sample_cdn(mixed_model, count=20, seed=7)
        second = sample_cdn(mixed_model, count=20, seed=7)
        np.testing.assert_array_equal(first, second)

    def test_copula_samples_in_unit_interval(self, student):
        u = sample_copula(student, count=25, seed=3)
        assert u.shape == (25, student.n)
        assert np.all((u > 0) & (u < 1))

    def test_conditional_columns(self, normal_chain):
        out = sample_conditional(normal_chain, {'X2': 0.4}, targets=['X1'], count=10, seed=1)
        np.testing.assert_array_equal(out[:, 1], 0.4)
        assert np.all(np.isfinite(out[:, 0]))
        assert np.all(np.isnan(out[:, 2]))

    def test_discrete_margins_give_support_values(self, discrete_triple):
        out = sample_cdn(discrete_triple, count=30, seed=5)
        assert set(np.unique(out[:, 0])) <= {0, 1}
        assert set(np.unique(out[:, 2])) <= {2, 3}


@pytest.mark.slow
class TestMonteCarlo:
    """10000 draws; proportions and dependence measures within ±0.03."""

    COUNT = 10000

    def test_copula_space_is_uniform(self, mixed_model):
        u = sample_copula(mixed_model, count=self.COUNT, seed=13)
        for i in range(mixed_model.n):
            assert stats.kstest(u[:, i], 'uniform').pvalue > 0.01

    def test_margins_stay_standard_normal(self, mixed_model):
        x = sample_cdn(mixed_model, count=self.COUNT, seed=17)
        for i in range(mixed_model.n):
            assert stats.kstest(x[:, i], 'norm').pvalue > 0.01

    def test_normal_pair_correlation(self):
        model = CdnModel(normal_variables('A', 'B'), [CopulaFactor(NORMAL_PAIR, 0.8, (0, 1))])
        w = std_normal_quantile(sample_copula(model, count=self.COUNT, seed=11))
        assert np.corrcoef(w.T)[0, 1] == pytest.approx(0.8, abs=0.03)

    def test_clayton_pair_kendall_tau(self, clayton_pair):
        """Kendall's τ of a Clayton copula is θ / (θ + 2)."""
        x = sample_cdn(clayton_pair, count=self.COUNT, seed=12)
        assert stats.kendalltau(x[:, 0], x[:, 1]).statistic == pytest.approx(0.5, abs=0.03)

    def test_draw_order_does_not_change_the_law(self, clayton_pair):
        forward = sample_copula(clayton_pair, count=self.COUNT, seed=21, order=['A', 'B'])
        backward = sample_copula(clayton_pair, count=self.COUNT, seed=22, order=['B', 'A'])
        grid = np.linspace(0.05, 0.95, 19)
        a, b = np.meshgrid(grid, grid, indexing='ij')
        factor = clayton_pair.factors[0]
        points = np.column_stack([a.ravel(), b.ravel()])
        exact = factor_log_partial(factor.kind, factor.param, points, ()).value().reshape(a.shape)
        assert np.abs(empirical_cdf(forward, grid) - empirical_cdf(backward, grid)).max() < 0.03
        assert np.abs(empirical_cdf(forward, grid) - exact).max() < 0.03
        assert np.abs(empirical_cdf(backward, grid) - exact).max() < 0.03

    def test_conditional_normal(self, normal_pair):
        """A | B = 1 is N(0.6, 0.64)."""
        out = sample_conditional(normal_pair, {'B': 1.0}, count=self.COUNT, seed=14)
        assert out[:, 0].mean() == pytest.approx(0.6, abs=0.03)
        assert out[:, 0].std() == pytest.approx(0.8, abs=0.03)

    def test_conditional_at_the_median_matches_the_query_engine(self):
        """With ρ = 0.9 and A at its median, B is N(0, 0.19)."""
        model = CdnModel(normal_variables('A', 'B'), [CopulaFactor(NORMAL_PAIR, 0.9, (0, 1))])
        out = sample_conditional(model, {'A': 0.0}, count=self.COUNT, seed=23)
        b = out[:, 1]
        assert np.mean(std_normal_cdf(b) > 0.5) == pytest.approx(0.5, abs=0.03)
        for t in (-0.5, 0.2, 0.8):
            law = np.exp(query(model, {'B': CumulativeBound(t)}, {'A': Point(0.0)}))
            assert law == pytest.approx(std_normal_cdf(t / np.sqrt(0.19)), rel=1e-8)
            assert np.mean(b <= t) == pytest.approx(law, abs=0.03)

    def test_grid_margins(self):
        model = generate(ArchetypeSpec('grid', 3, 'clayton'), seed=15)
        x = sample_cdn(model, count=1000, seed=16)
        for i in range(model.n):
            assert stats.kstest(x[:, i], 'norm').pvalue > 1e-3
