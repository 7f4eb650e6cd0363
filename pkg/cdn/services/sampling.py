"""
Exact sampling by the conditional method.

Variables are drawn one at a time from their conditional CDF given the
variables already drawn. In a CDN a variable depends on the drawn set only
through the connected groups ("branches") of drawn variables adjacent to it,
so each step conditions on the union of those branches. The plan fixes the
order greedily (smallest total adjacent branch size first) and caches one
clique tree per step over the conditioning variables.

Each conditional CDF is a ratio of two passes over that tree, with the
drawn variable at u^d in the numerator and at 1 in the denominator, times
the factors that touch the variable but none of its conditioning set. It is
inverted with a batched Brent solve in log space.
"""

import logging

import numpy as np

from .cliquetree import build_min_fill
from .copulas import factor_log_partial
from .errors import InvalidSpec
from .inference import copula_derivative
from .margins import clamped_copula_coord, power_coord
from .root_finding import BRACKET, brent_roots

logger = logging.getLogger(__name__)


class SamplingStep:
    def __init__(self, variable, conditioning, weight, factor_ids, scopes, tree, extras, branches):
        self.variable = variable
        self.conditioning = tuple(sorted(conditioning))
        self.weight = weight
        self.factor_ids = factor_ids
        self.scopes = scopes
        self.tree = tree
        self.extras = extras
        self.branches = branches

    def __repr__(self):
        return f'SamplingStep(variable={self.variable}, conditioning={self.conditioning})'


class SamplingPlan:
    def __init__(self, steps, observed=()):
        self.steps = steps
        self.observed = tuple(sorted(observed))

    @property
    def order(self):
        return [s.variable for s in self.steps]

    def __len__(self):
        return len(self.steps)


def _make_step(model, variable, conditioning, weight, branches):
    conditioning = set(conditioning)
    factor_ids, scopes = [], []
    for f in model.factors_touching(conditioning):
        factor_ids.append(f)
        scopes.append(tuple(s for s in model.factors[f].scope if s in conditioning))
    extras = [
        f for f, factor in enumerate(model.factors)
        if variable in factor.scope and not conditioning & set(factor.scope)
    ]
    tree = build_min_fill(scopes) if conditioning else None
    return SamplingStep(variable, conditioning, weight, factor_ids, scopes, tree, extras, branches)


def make_sampling_cliques(model, rng=None, observed=(), targets=None, order=None):
    """
    Greedy sampling order with a cached clique tree per step.

    The to-do list starts from the leaves of the variable graph (plus the
    neighbours of observed variables); the candidate whose adjacent drawn
    branches have the smallest total size goes next, ties broken at random.
    A leafless graph starts from a random vertex, and a random undrawn
    variable is added whenever the to-do list runs dry. Observed variables
    count as already drawn. An explicit order skips the greedy choice.
    """
    rng = rng if rng is not None else np.random.default_rng()
    graph = model.neighbours()
    observed = [model.index(v) for v in observed]
    targets = (
        [v for v in range(model.n) if v not in observed]
        if targets is None else [model.index(v) for v in targets]
    )
    if set(targets) & set(observed):
        raise InvalidSpec('a variable cannot be both observed and sampled')

    branch_of = {}
    branches = {}

    def merge(variable, adjacent):
        members = {variable}
        for b in adjacent:
            members |= branches.pop(b)
        bid = variable
        branches[bid] = members
        for m in members:
            branch_of[m] = bid

    def adjacent_branches(variable):
        return {branch_of[u] for u in graph.neighbors(variable) if u in branch_of}

    for v in observed:
        merge(v, adjacent_branches(v))

    remaining = set(targets)
    steps = []

    def take(variable):
        adjacent = adjacent_branches(variable)
        conditioning = set().union(*(branches[b] for b in adjacent)) if adjacent else set()
        weight = len(conditioning)
        merge(variable, adjacent)
        snapshot = tuple(frozenset(b) for b in branches.values())
        steps.append(_make_step(model, variable, conditioning, weight, snapshot))
        remaining.discard(variable)

    if order is not None:
        order = [model.index(v) for v in order]
        if sorted(order) != sorted(targets):
            raise InvalidSpec(f'sampling order {order} must list exactly the variables to sample')
        for v in order:
            take(v)
        return SamplingPlan(steps, observed)

    todo = [v for v in sorted(remaining) if graph.degree(v) == 1]
    for v in observed:
        todo.extend(u for u in sorted(graph.neighbors(v)) if u in remaining and u not in todo)

    while remaining:
        todo = [v for v in todo if v in remaining]
        if not todo:
            todo.append(int(rng.choice(sorted(remaining))))
        weights = [sum(len(branches[b]) for b in adjacent_branches(v)) for v in todo]
        best = min(weights)
        tied = [v for v, w in zip(todo, weights) if w == best]
        chosen = tied[0] if len(tied) == 1 else int(rng.choice(tied))
        take(chosen)
        todo.extend(u for u in sorted(graph.neighbors(chosen)) if u in remaining and u not in todo)

    logger.debug('Sampling order %s', [model.names[s.variable] for s in steps])
    return SamplingPlan(steps, observed)


def _conditional_roots(model, step, v, targets):
    """Solve CondCDF(u) = k for every row, in log space."""
    c = step.variable
    d = model.d[c]
    diff_vars = step.conditioning

    base = v.copy()
    base[:, c] = 1.0
    den = copula_derivative(
        model, base, diff_vars, tree=step.tree, scopes=step.scopes, factor_ids=step.factor_ids,
    ).log_abs
    log_k = np.log(targets)

    def objective(x, idx):
        rows = v[idx].copy()
        rows[:, c] = power_coord(x, d)
        num = copula_derivative(
            model, rows, diff_vars, tree=step.tree, scopes=step.scopes, factor_ids=step.factor_ids,
        )
        log_num = np.where(num.sign > 0, num.log_abs, -np.inf)
        for f in step.extras:
            factor = model.factors[f]
            log_num = log_num + _factor_log_cdf(factor, rows)
        return log_num - den[idx] - log_k[idx]

    return brent_roots(objective, v.shape[0], BRACKET, pin=True)


def _factor_log_cdf(factor, rows):
    return factor_log_partial(factor.kind, factor.param, rows[:, list(factor.scope)], ()).log_abs


def _run_plan(model, plan, v, u, rng):
    count = v.shape[0]
    for step in plan.steps:
        c = step.variable
        k = np.clip(rng.random(count), BRACKET[0], BRACKET[1])
        if step.conditioning:
            u[:, c] = _conditional_roots(model, step, v, k)
        else:
            u[:, c] = k
        v[:, c] = power_coord(u[:, c], model.d[c])
    return u


def sample_copula(model, plan=None, count=1, seed=None, order=None):
    """Copula-space samples u (count, n)."""
    rng = np.random.default_rng(seed)
    if plan is None:
        plan = make_sampling_cliques(model, rng, order=order)
    v = np.ones((count, model.n))
    u = np.ones((count, model.n))
    return _run_plan(model, plan, v, u, rng)


def sample_cdn(model, plan=None, count=1, seed=None, order=None):
    """Samples (count, n) on the data scale, through the margin quantiles."""
    u = sample_copula(model, plan, count, seed, order)
    return np.column_stack([m.quantile(u[:, i]) for i, m in enumerate(model.margins)])


def sample_conditional(model, observed, targets=None, count=1, seed=None, order=None):
    """
    Samples of the targets given observed values; observed columns repeat
    their value and variables that are neither observed nor targets are NaN
    (marginalised).
    """
    rng = np.random.default_rng(seed)
    obs = {model.index(k): float(x) for k, x in observed.items()}
    plan = make_sampling_cliques(model, rng, observed=obs, targets=targets, order=order)

    v = np.ones((count, model.n))
    u = np.ones((count, model.n))
    for i, x in obs.items():
        u_i = clamped_copula_coord(model.margins[i], x)
        u[:, i] = u_i
        v[:, i] = power_coord(u_i, model.d[i])
    _run_plan(model, plan, v, u, rng)

    out = np.full((count, model.n), np.nan)
    for i, x in obs.items():
        out[:, i] = x
    for step in plan.steps:
        c = step.variable
        out[:, c] = model.margins[c].quantile(u[:, c])
    return out
