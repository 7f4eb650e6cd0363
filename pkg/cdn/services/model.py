"""
CDN model container: variables with margins, copula factors and exponents.

The joint CDF is the product of factor CDFs, each taking v_i = F_i(x_i)^(1/k_i)
for every variable i in its scope, where k_i counts the factors that mention
variable i. Evidence reduction turns a query into a point plus the set of
variables that are differentiated.
"""

import logging

import networkx as nx
import numpy as np

from . import copulas
from .errors import (
    DuplicateScopeEntry, EmptyScope, InvalidSpec, OrphanVariable, ParamOutOfDomain,
    UnknownVariable, UnsupportedArity, Violation, raise_for_violations,
)
from .margins import NormalMargin, clamped_copula_coord, margin_from_dict, power_coord

logger = logging.getLogger(__name__)


class CopulaFactor:
    """One copula CDF over an ordered scope of variable indices."""

    def __init__(self, kind, param, scope):
        self.kind = kind
        self.param = float(param)
        self.scope = tuple(int(s) for s in scope)

    @property
    def arity(self):
        return len(self.scope)

    def with_param(self, param):
        return CopulaFactor(self.kind, param, self.scope)

    def to_dict(self):
        return {'kind': self.kind, 'param': self.param, 'scope': list(self.scope)}

    def __eq__(self, other):
        return (
            isinstance(other, CopulaFactor)
            and (self.kind, self.param, self.scope) == (other.kind, other.param, other.scope)
        )

    def __repr__(self):
        return f'CopulaFactor({self.kind!r}, {self.param!r}, {self.scope!r})'


class CdnModel:
    """
    Variables (name, margin) and copula factors.

    Construction validates by default and raises the first violation's error
    type; pass validate=False for intermediate models built by optimisers.
    A model is a value: variables, factors and the exponents are read-only,
    and with_params / with_margins return new models.
    """

    def __init__(self, variables, factors, validate=True):
        self.variables = tuple((str(name), margin) for name, margin in variables)
        self.factors = tuple(factors)
        if validate:
            raise_for_violations(validate_model(self))
        counts = np.zeros(len(self.variables))
        for f in self.factors:
            for s in f.scope:
                if 0 <= s < len(counts):
                    counts[s] += 1
        self.k = counts
        self.d = 1.0 / np.maximum(counts, 1.0)
        self.k.setflags(write=False)
        self.d.setflags(write=False)

    @property
    def n(self):
        return len(self.variables)

    @property
    def names(self):
        return [name for name, _ in self.variables]

    @property
    def margins(self):
        return [margin for _, margin in self.variables]

    def index(self, name):
        """Variable index by name or by index."""
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.n:
                raise UnknownVariable(f'variable index {name} out of range 0..{self.n - 1}')
            return int(name)
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownVariable(f'unknown variable {name!r}') from None

    def scopes(self):
        return [f.scope for f in self.factors]

    def params(self):
        return np.array([f.param for f in self.factors], dtype=float)

    def with_params(self, theta):
        factors = [f.with_param(t) for f, t in zip(self.factors, theta)]
        return CdnModel(self.variables, factors, validate=False)

    def with_margins(self, margins):
        variables = [(name, m) for (name, _), m in zip(self.variables, margins)]
        return CdnModel(variables, self.factors, validate=False)

    def neighbours(self):
        """Bidirected graph: variables joined when they share a factor."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        for f in self.factors:
            for a in range(f.arity):
                for b in range(a + 1, f.arity):
                    graph.add_edge(f.scope[a], f.scope[b])
        return graph

    def factors_touching(self, variables):
        variables = set(variables)
        return [i for i, f in enumerate(self.factors) if variables & set(f.scope)]

    def is_discrete(self):
        return all(m.kind == 'discrete' for m in self.margins)

    def __repr__(self):
        return f'CdnModel(n={self.n}, factors={len(self.factors)})'


def validate_model(model):
    """Every structural and parameter violation of a model, in factor order."""
    violations = []
    names = model.names
    if len(set(names)) != len(names):
        duplicates = sorted({n for n in names if names.count(n) > 1})
        violations.append(Violation(InvalidSpec, f'duplicate variable names {duplicates}', duplicates))

    seen = set()
    for i, f in enumerate(model.factors):
        if f.kind not in copulas.KINDS:
            violations.append(Violation(InvalidSpec, f'factor {i}: unknown kind {f.kind!r}', f))
            continue
        if not f.scope:
            violations.append(Violation(EmptyScope, f'factor {i} has an empty scope', f))
            continue
        unknown = [s for s in f.scope if not 0 <= s < model.n]
        if unknown:
            violations.append(Violation(UnknownVariable, f'factor {i} references unknown variables {unknown}', f))
        if len(set(f.scope)) != len(f.scope):
            violations.append(Violation(DuplicateScopeEntry, f'factor {i} repeats a variable in {list(f.scope)}', f))
        seen.update(s for s in f.scope if 0 <= s < model.n)
        try:
            lo, hi = copulas.param_domain(f.kind, f.arity)
        except UnsupportedArity as exc:
            violations.append(Violation(UnsupportedArity, f'factor {i}: {exc}', f))
            continue
        if not (np.isfinite(f.param) and lo < f.param < hi):
            violations.append(Violation(
                ParamOutOfDomain, f'factor {i}: {f.kind} parameter {f.param} outside ({lo}, {hi})', f,
            ))

    for v in range(model.n):
        if v not in seen:
            violations.append(Violation(OrphanVariable, f'variable {names[v]!r} is in no factor', v))
    return violations


# --- Evidence ---

class Free:
    """Value taken from the query point; differentiated."""

    def __repr__(self):
        return 'Free()'

    def __eq__(self, other):
        return isinstance(other, Free)


class Marginalized:
    """Argument set to 1."""

    def __repr__(self):
        return 'Marginalized()'

    def __eq__(self, other):
        return isinstance(other, Marginalized)


class Point:
    """Fixed at x and differentiated (density evidence)."""

    def __init__(self, x):
        self.x = float(x)

    def __repr__(self):
        return f'Point({self.x!r})'

    def __eq__(self, other):
        return isinstance(other, Point) and self.x == other.x


class CumulativeBound:
    """Fixed at x, not differentiated (the event X <= x)."""

    def __init__(self, x):
        self.x = float(x)

    def __repr__(self):
        return f'CumulativeBound({self.x!r})'

    def __eq__(self, other):
        return isinstance(other, CumulativeBound) and self.x == other.x


class PointTransform:
    """Copula coordinates of one or more points and their log chain-rule constant."""

    def __init__(self, u, v, log_kappa):
        self.u = u
        self.v = v
        self.log_kappa = log_kappa


def transform_point(model, x, diff_vars=()):
    """
    u = F(x), v = u^d and ln κ = Σ_{i differentiated} ln[f_i(x_i) d_i u_i^(d_i - 1)].

    x has shape (n,) or (rows, n); +inf entries are marginalised (u = v = 1).
    Probit-scale arguments of normal factors are formed by the factor kernels.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    rows = np.atleast_2d(x)
    if rows.shape[1] != model.n:
        raise InvalidSpec(f'point has {rows.shape[1]} coordinates, model has {model.n} variables')
    u = np.empty(rows.shape)
    for i, margin in enumerate(model.margins):
        u[:, i] = clamped_copula_coord(margin, rows[:, i])
    v = power_coord(u, model.d)

    log_kappa = np.zeros(rows.shape[0])
    for i in diff_vars:
        if np.any(rows[:, i] == np.inf):
            raise InvalidSpec(f'variable {model.names[i]!r} cannot be differentiated at +inf')
        d = model.d[i]
        log_kappa += model.margins[i].log_pdf(rows[:, i]) + np.log(d) + (d - 1.0) * np.log(u[:, i])

    if single:
        return PointTransform(u[0], v[0], log_kappa[0])
    return PointTransform(u, v, log_kappa)


class Reduction:
    """Effective point, differentiated variables and their transform."""

    def __init__(self, model, x_eff, diff_vars):
        self.model = model
        self.x_eff = x_eff
        self.diff_vars = tuple(sorted(diff_vars))
        self.transform = transform_point(model, x_eff, self.diff_vars)

    def as_evidence(self):
        """Evidence that reduces to this same reduction (single points only)."""
        evidence = {}
        for i, x in enumerate(np.asarray(self.x_eff, dtype=float)):
            if i in self.diff_vars:
                evidence[i] = Point(x)
            elif x == np.inf:
                evidence[i] = Marginalized()
            else:
                evidence[i] = CumulativeBound(x)
        return evidence


def reduce(model, evidence=None, x=None):
    """
    Apply evidence to a model.

    evidence maps variable names or indices to Free, Marginalized, Point or
    CumulativeBound; variables it leaves out are marginalised. With no evidence
    at all, every variable is Free. Free variables read their value from x.
    """
    if evidence is None:
        evidence = {i: Free() for i in range(model.n)}
    states = [Marginalized() for _ in range(model.n)]
    for key, state in evidence.items():
        states[model.index(key)] = state

    needs_x = any(isinstance(s, Free) for s in states)
    if needs_x and x is None:
        raise InvalidSpec('free variables need a query point x')
    if x is not None:
        x = np.asarray(x, dtype=float)
        shape = x.shape
    else:
        shape = (model.n,)
    x_eff = np.full(shape, np.inf)

    diff_vars = []
    for i, state in enumerate(states):
        if isinstance(state, Free):
            x_eff[..., i] = x[..., i]
            diff_vars.append(i)
        elif isinstance(state, Point):
            x_eff[..., i] = state.x
            diff_vars.append(i)
        elif isinstance(state, CumulativeBound):
            x_eff[..., i] = state.x
        elif not isinstance(state, Marginalized):
            raise InvalidSpec(f'unknown evidence state {state!r} for {model.names[i]!r}')
    return Reduction(model, x_eff, diff_vars)


# --- Serialisation ---

def model_to_dict(model):
    return {
        'variables': [{'name': name, 'margin': m.to_dict()} for name, m in model.variables],
        'factors': [f.to_dict() for f in model.factors],
    }


def model_from_dict(data, validate=True):
    """
    Build a model from its JSON form, checking the schema first. Learned-model
    files are accepted too; their report is checked and ignored.
    """
    from cdn_schema.schemas import LEARNED_MODEL_SCHEMA, MODEL_SCHEMA, check_schema

    check_schema(data, LEARNED_MODEL_SCHEMA if isinstance(data, dict) and 'report' in data else MODEL_SCHEMA)
    variables = [(v['name'], margin_from_dict(v['margin'])) for v in data['variables']]
    factors = [CopulaFactor(f['kind'], f['param'], f['scope']) for f in data['factors']]
    return CdnModel(variables, factors, validate=validate)


STUDENT_NAMES = ('C', 'D', 'I', 'G', 'S', 'L', 'J', 'H')


def student_network():
    """
    Eight-variable student network: coursework, difficulty, intelligence,
    grade, SAT, letter, job and happiness. Three-variable factors are Clayton.
    """
    idx = {name: i for i, name in enumerate(STUDENT_NAMES)}
    spec = [
        (copulas.NORMAL_PAIR, 0.5, 'CD'),
        (copulas.CLAYTON, 1.5, 'DIG'),
        (copulas.NORMAL_PAIR, 0.4, 'IS'),
        (copulas.NORMAL_PAIR, -0.3, 'GH'),
        (copulas.NORMAL_PAIR, 0.6, 'GL'),
        (copulas.CLAYTON, 2.0, 'SLJ'),
    ]
    factors = [CopulaFactor(kind, param, [idx[c] for c in scope]) for kind, param, scope in spec]
    return CdnModel([(name, NormalMargin()) for name in STUDENT_NAMES], factors)
