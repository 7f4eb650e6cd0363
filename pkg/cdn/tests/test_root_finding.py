import numpy as np
import pytest

from cdn.services.errors import MaxIterations, NoBracket
from cdn.services.root_finding import BRACKET, RootProblem, brent_root, brent_roots


def batch(fn):
    return lambda x, idx: fn(np.asarray(x))


class TestBrentRoots:
    def test_single_root(self):
        roots = brent_roots(batch(lambda x: x ** 2 - 0.25), 1)
        assert roots[0] == pytest.approx(0.5, abs=1e-10)

    def test_each_entry_solves_its_own_problem(self):
        targets = np.array([0.1, 0.5, 0.93, 0.002])
        roots = brent_roots(lambda x, idx: np.log(x) - np.log(targets[idx]), len(targets))
        np.testing.assert_allclose(roots, targets, rtol=1e-9)

    def test_no_bracket(self):
        with pytest.raises(NoBracket):
            brent_roots(batch(lambda x: x + 1.0), 2)

    def test_pinning_to_the_nearer_endpoint(self):
        """Always positive pins low, always negative pins high."""
        offsets = np.array([1.0, -2.0, -0.5])
        roots = brent_roots(lambda x, idx: x + offsets[idx], 3, pin=True)
        assert roots[0] == BRACKET[0]
        assert roots[1] == BRACKET[1]
        assert roots[2] == pytest.approx(0.5, abs=1e-10)

    def test_non_finite_endpoint_is_nudged(self):
        """ln(x - lo) is -inf at the lower endpoint itself."""
        lo = BRACKET[0]
        roots = brent_roots(batch(lambda x: np.log(x - lo) - np.log(0.3)), 1)
        assert roots[0] == pytest.approx(0.3 + lo, abs=1e-10)

    def test_iteration_cap(self):
        with pytest.raises(MaxIterations):
            brent_roots(batch(lambda x: x ** 2 - 0.25), 1, max_iter=1)

    def test_exact_root_at_endpoint(self):
        roots = brent_roots(batch(lambda x: x - BRACKET[0]), 1)
        assert roots[0] == BRACKET[0]


def test_scalar_root_problem():
    problem = RootProblem(lambda x: x ** 3, target=0.125)
    assert brent_root(problem) == pytest.approx(0.5, abs=1e-10)
