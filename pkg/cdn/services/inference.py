"""
Derivative-sum-product message passing over a clique tree.

Given copula coordinates v and a set D of differentiated variables, passes
compute ∂^|D| Π_f C_f(v) / ∂v_D. Within a clique the product of its items
(assigned factors and incoming messages) is differentiated with the product
rule, one item at a time:

    V(l, A) = Σ_{E ⊆ A ∩ item_l} item_l(E) · V(l - 1, A \\ E)

evaluated top-down from an explicit stack with a memo. The discrete variant
replaces derivatives by backward differences; its product rule evaluates an
item at the upper corner for variables differenced by earlier items and at
the lower corner for those differenced by later items, so every recurrence
entry carries a second mask of variables held at the upper corner.

Values are SignedLog arrays (one entry per row of a batch) in the log
back-end, plain float arrays in the linear one.
"""

import itertools
import logging

import networkx as nx
import numpy as np

from . import copulas
from .cliquetree import build_min_fill
from .copulas import SignedLog
from .errors import InvalidSpec, OutOfSupport, ScheduleViolation
from .model import reduce

logger = logging.getLogger(__name__)

ROOT = None


# --- Arithmetic back-ends ---

class LogArithmetic:
    name = 'log'

    @staticmethod
    def one(rows):
        return SignedLog.ones(rows)

    @staticmethod
    def zero(rows):
        return SignedLog.zeros(rows)

    @staticmethod
    def convert(value):
        return value

    @staticmethod
    def mul(a, b):
        return a * b

    @staticmethod
    def total(terms):
        return SignedLog.sum(terms)

    @staticmethod
    def is_zero(a):
        return a.is_zero()

    @staticmethod
    def to_signed_log(a):
        return a


class LinearArithmetic:
    """Plain float arithmetic; underflows where the log back-end does not."""

    name = 'linear'

    @staticmethod
    def one(rows):
        return np.ones(rows)

    @staticmethod
    def zero(rows):
        return np.zeros(rows)

    @staticmethod
    def convert(value):
        return value.value()

    @staticmethod
    def mul(a, b):
        return a * b

    @staticmethod
    def total(terms):
        return np.sum(terms, axis=0)

    @staticmethod
    def is_zero(a):
        return bool(np.all(a == 0))

    @staticmethod
    def to_signed_log(a):
        return SignedLog.from_value(a)


LOG = LogArithmetic()
LINEAR = LinearArithmetic()

ARITHMETIC = {'log': LOG, 'linear': LINEAR}


# --- Factor evaluators ---

class ContinuousPoint:
    """
    Factor partial derivatives at copula coordinates v of shape (rows, n).

    factor_ids maps the factor indices used by a clique tree onto model
    factors (identity when omitted).
    """

    discrete = False

    def __init__(self, model, v, factor_ids=None):
        self.model = model
        self.v = np.atleast_2d(np.asarray(v, dtype=float))
        self.rows = self.v.shape[0]
        self.factor_ids = list(range(len(model.factors))) if factor_ids is None else list(factor_ids)

    def factor(self, f):
        return self.model.factors[self.factor_ids[f]]

    def factor_term(self, f, diff, at_upper=frozenset(), wrt_param=False):
        factor = self.factor(f)
        positions = tuple(p for p, s in enumerate(factor.scope) if s in diff)
        args = self.v[:, list(factor.scope)]
        return copulas.factor_log_partial(factor.kind, factor.param, args, positions, wrt_param)


class DiscretePoint:
    """
    Backward differences of factor CDFs between upper corner a = F(x)^d and
    lower corner b = F(x - 1)^d. Variables outside diff_vars are constant and
    read from the upper array.
    """

    discrete = True

    def __init__(self, model, v_upper, v_lower, diff_vars, factor_ids=None):
        self.model = model
        self.upper = np.atleast_2d(np.asarray(v_upper, dtype=float))
        self.lower = np.atleast_2d(np.asarray(v_lower, dtype=float))
        self.rows = self.upper.shape[0]
        self.diff_vars = frozenset(diff_vars)
        self.factor_ids = list(range(len(model.factors))) if factor_ids is None else list(factor_ids)

    def factor(self, f):
        return self.model.factors[self.factor_ids[f]]

    def _cdf(self, factor, args, wrt_param):
        grounded = np.any(args <= 0.0, axis=1)
        safe = np.where(args <= 0.0, 0.5, args)
        value = copulas.factor_log_partial(factor.kind, factor.param, safe, (), wrt_param).value()
        return np.where(grounded, 0.0, value)

    def factor_term(self, f, diff, at_upper=frozenset(), wrt_param=False):
        factor = self.factor(f)
        scope = list(factor.scope)
        base = np.empty((self.rows, len(scope)))
        for p, s in enumerate(scope):
            if s in at_upper or s not in self.diff_vars:
                base[:, p] = self.upper[:, s]
            else:
                base[:, p] = self.lower[:, s]
        diff_positions = [p for p, s in enumerate(scope) if s in diff]

        total = np.zeros(self.rows)
        for corners in itertools.product((False, True), repeat=len(diff_positions)):
            args = base.copy()
            for p, low in zip(diff_positions, corners):
                args[:, p] = self.lower[:, scope[p]] if low else self.upper[:, scope[p]]
            sign = -1.0 if sum(corners) % 2 else 1.0
            total += sign * self._cdf(factor, args, wrt_param)
        return SignedLog.from_value(total)


# --- Messages and workspace ---

class MessageSet:
    """
    Message table over the differentiated sepset variables.

    Keys are (d, a) bitmasks over `sepset` positions: d is differentiated by
    the sender, a is held at the upper corner (always 0 in continuous passes).
    """

    def __init__(self, sepset, table):
        self.sepset = tuple(sepset)
        self.table = table

    def get(self, d, a=0):
        return self.table[(d, a)]

    def __len__(self):
        return len(self.table)

    def __repr__(self):
        return f'MessageSet(sepset={self.sepset!r}, entries={len(self.table)})'


def _submasks(mask):
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


class _Item:
    __slots__ = ('mask', 'evaluate')

    def __init__(self, mask, evaluate):
        self.mask = mask
        self.evaluate = evaluate


class InferenceWorkspace:
    """
    One evaluation point (or batch) over a clique tree: message store and
    factor-partial cache. scopes are the tree-local factor scopes the tree
    was built from; only their differentiated variables enter the recurrence.
    """

    def __init__(self, tree, scopes, evaluator, diff_vars, arithmetic=LOG):
        self.tree = tree
        self.scopes = [tuple(s) for s in scopes]
        self.evaluator = evaluator
        self.diff_vars = frozenset(diff_vars)
        self.arithmetic = arithmetic
        self.rows = evaluator.rows
        self.messages = {}
        self.factor_cache = {}
        self._dmask = [tree.mask(i, [v for v in c if v in self.diff_vars]) for i, c in enumerate(tree.cliques)]

    def _vars(self, i, mask):
        clique = self.tree.cliques[i]
        return frozenset(clique[p] for p in range(len(clique)) if mask >> p & 1)

    def factor_value(self, f, diff, at_upper, wrt_param=False):
        if not self.evaluator.discrete:
            at_upper = frozenset()
        key = (f, diff, at_upper, wrt_param)
        if key not in self.factor_cache:
            raw = self.evaluator.factor_term(f, diff, at_upper, wrt_param)
            self.factor_cache[key] = self.arithmetic.convert(raw)
        return self.factor_cache[key]

    def _factor_item(self, i, f, wrt_param=False):
        mask = self.tree.mask(i, [v for v in self.scopes[f] if v in self.diff_vars])

        def evaluate(e, at):
            return self.factor_value(f, self._vars(i, e), self._vars(i, at), wrt_param)

        return _Item(mask, evaluate)

    def _message_item(self, k, i):
        message = self.messages.get((k, i))
        if message is None:
            raise ScheduleViolation(f'message {k}->{i} is needed by clique {i} but has not been computed')
        slots = [(p, self.tree.position(i, v)) for p, v in enumerate(message.sepset)]
        mask = 0
        for _, q in slots:
            mask |= 1 << q

        def to_sepset(local):
            out = 0
            for p, q in slots:
                if local >> q & 1:
                    out |= 1 << p
            return out

        def evaluate(e, at):
            return message.get(to_sepset(e), to_sepset(at))

        return _Item(mask, evaluate)

    def _items(self, i, exclude=ROOT, swap=None):
        items = [self._factor_item(i, f, wrt_param=(f == swap)) for f in self.tree.assignments[i]]
        items += [self._message_item(k, i) for k in self.tree.neighbours(i) if k != exclude]
        return items

    def _product_derivative(self, items, requests):
        """Memoised product-rule recurrence for several (dmask, amask) requests."""
        arith = self.arithmetic
        one, zero = arith.one(self.rows), arith.zero(self.rows)
        covered = [0]
        for item in items:
            covered.append(covered[-1] | item.mask)
        memo = {}
        results = {}
        for dmask, amask in requests:
            top = (len(items), dmask, amask)
            stack = [top]
            while stack:
                key = stack[-1]
                if key in memo:
                    stack.pop()
                    continue
                level, d, a = key
                if level == 0:
                    memo[key] = one if d == 0 else zero
                    stack.pop()
                    continue
                if d & ~covered[level]:
                    memo[key] = zero
                    stack.pop()
                    continue
                item = items[level - 1]
                subsets = list(_submasks(d & item.mask))
                pending = [(level - 1, d & ~e, a) for e in subsets if (level - 1, d & ~e, a) not in memo]
                if pending:
                    stack.extend(pending)
                    continue
                terms = []
                for e in subsets:
                    rest = memo[(level - 1, d & ~e, a)]
                    if arith.is_zero(rest):
                        continue
                    value = item.evaluate(e, ((d & ~e) | a) & item.mask)
                    if arith.is_zero(value):
                        continue
                    terms.append(arith.mul(value, rest))
                memo[key] = arith.total(terms) if terms else zero
                stack.pop()
            results[(dmask, amask)] = memo[top]
        return results

    def root_value(self, i, swap=None):
        """
        Full derivative read at clique i; needs messages from every neighbour.
        swap names a factor assigned to i whose parameter partials replace its
        value partials.
        """
        if swap is not None and swap not in self.tree.assignments[i]:
            raise ScheduleViolation(f'factor {swap} is not assigned to clique {i}')
        items = self._items(i, swap=swap)
        request = (self._dmask[i], 0)
        return self._product_derivative(items, [request])[request]


def dsp_messages(ws, i, j=ROOT):
    """
    Messages from clique i to neighbour j, or the single root value when j is
    ROOT. Every other neighbour's message into i must already be present.
    """
    tree = ws.tree
    if j is ROOT:
        request = (ws._dmask[i], 0)
        value = ws._product_derivative(ws._items(i), [request])[request]
        return MessageSet((), {(0, 0): value})

    if j not in tree.neighbours(i):
        raise ScheduleViolation(f'cliques {i} and {j} are not adjacent')
    sepset = tuple(v for v in tree.sepset(i, j) if v in ws.diff_vars)
    internal = ws._dmask[i] & ~tree.mask(i, sepset)
    embed = [1 << tree.position(i, v) for v in sepset]

    def embedded(sep_mask):
        out = 0
        for p, bit in enumerate(embed):
            if sep_mask >> p & 1:
                out |= bit
        return out

    full = (1 << len(sepset)) - 1
    keys = []
    for d in _submasks(full):
        uppers = _submasks(full & ~d) if ws.evaluator.discrete else (0,)
        for a in uppers:
            keys.append((d, a))
    requests = [(embedded(d) | internal, embedded(a)) for d, a in keys]
    values = ws._product_derivative(ws._items(i, exclude=j), requests)
    table = {key: values[req] for key, req in zip(keys, requests)}
    message = MessageSet(sepset, table)
    ws.messages[(i, j)] = message
    return message


def pass_messages(ws):
    """Upward pass in topological order; forest roots multiplied together."""
    tree = ws.tree
    arith = ws.arithmetic
    result = arith.one(ws.rows)
    for i in tree.topo_order:
        if tree.child[i] != -1:
            dsp_messages(ws, i, tree.child[i])
        else:
            result = arith.mul(result, dsp_messages(ws, i).get(0))
    return arith.to_signed_log(result)


def calibrate(ws):
    """Messages in both directions of every edge; any clique can then be a root."""
    tree = ws.tree
    for i in tree.topo_order:
        if tree.child[i] != -1 and (i, tree.child[i]) not in ws.messages:
            dsp_messages(ws, i, tree.child[i])
    for i in reversed(tree.topo_order):
        for p in tree.parents(i):
            dsp_messages(ws, i, p)
    return ws


def forest_value(ws, swap=None, alpha=None):
    """
    Product over forest components of root values, after calibration.
    With swap, the component holding that factor is read at clique α(swap).
    """
    tree = ws.tree
    arith = ws.arithmetic
    swap_clique = alpha[swap] if swap is not None else None
    graph = tree.graph()
    result = arith.one(ws.rows)
    for root in tree.roots:
        clique = root
        if swap_clique is not None and nx.has_path(graph, root, swap_clique):
            clique = swap_clique
        value = ws.root_value(clique, swap=swap if clique == swap_clique else None)
        result = arith.mul(result, value)
    return arith.to_signed_log(result)


# --- Model-level entry points ---

def copula_derivative(model, v, diff_vars, tree=None, scopes=None, factor_ids=None, arithmetic=LOG):
    """∂^|D| Π C_f / ∂v_D at v (rows, n), over the given (or model) clique tree."""
    if scopes is None:
        scopes = [model.factors[f].scope for f in (factor_ids or range(len(model.factors)))]
    if tree is None:
        tree = build_min_fill(scopes, model.n)
    evaluator = ContinuousPoint(model, v, factor_ids)
    ws = InferenceWorkspace(tree, scopes, evaluator, diff_vars, arithmetic)
    return pass_messages(ws)


def density(model, x, evidence=None, arithmetic=LOG, tree=None):
    """
    ln of the query value at x: ln κ plus the log of the message-passing
    result. Point and Free variables are differentiated, CumulativeBound
    variables are held at their bound and the rest are marginalised, so the
    same call returns CDFs, densities and mixed values.
    """
    reduction = reduce(model, evidence, x)
    transform = reduction.transform
    result = copula_derivative(
        model, transform.v, reduction.diff_vars, tree=tree, arithmetic=arithmetic,
    )
    with np.errstate(divide='ignore'):
        log_value = transform.log_kappa + result.log_abs
    log_value = np.where(result.sign > 0, log_value, -np.inf)
    if np.ndim(transform.log_kappa) == 0:
        return float(np.ravel(log_value)[0])
    return log_value


def query(model, target, given=None, arithmetic=LOG):
    """
    ln P(target | given) as the difference of two passes; with no given
    evidence this is the joint value of the target evidence.
    """
    given = dict(given or {})
    target = dict(target)
    overlap = {model.index(k) for k in target} & {model.index(k) for k in given}
    if overlap:
        names = sorted(model.names[i] for i in overlap)
        raise InvalidSpec(f'variables {names} appear in both the target and the conditioning set')
    joint = {**target, **given}
    numerator = density(model, None, joint, arithmetic)
    if not given:
        return numerator
    return numerator - density(model, None, given, arithmetic)


def discrete_pmf(model, x, arithmetic=LOG, tree=None):
    """P(X = x) for a model with discrete margins, by backward differences."""
    x = np.asarray(x, dtype=float)
    rows = np.atleast_2d(x)
    if rows.shape[1] != model.n:
        raise InvalidSpec(f'point has {rows.shape[1]} coordinates, model has {model.n} variables')
    upper = np.empty(rows.shape)
    lower = np.empty(rows.shape)
    for i, margin in enumerate(model.margins):
        if margin.kind != 'discrete':
            raise InvalidSpec(f'variable {model.names[i]!r} does not have a discrete margin')
        if not np.all(margin.in_support(rows[:, i])):
            raise OutOfSupport(
                f'{model.names[i]}={rows[:, i]!r} outside support {margin.support_min}..{margin.support_max}'
            )
        upper[:, i] = margin.cdf(rows[:, i]) ** model.d[i]
        lower[:, i] = margin.cdf(rows[:, i] - 1) ** model.d[i]

    scopes = model.scopes()
    if tree is None:
        tree = build_min_fill(scopes, model.n)
    diff_vars = range(model.n)
    evaluator = DiscretePoint(model, np.minimum(upper, 1.0), lower, diff_vars)
    ws = InferenceWorkspace(tree, scopes, evaluator, diff_vars, arithmetic)
    value = np.clip(pass_messages(ws).value(), 0.0, 1.0)
    return float(value[0]) if x.ndim == 1 else value

