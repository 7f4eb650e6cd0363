"""
Two-stage parameter learning: margins by maximum likelihood, then copula
parameters by minimising the energy (negative mean copula log-likelihood).

Missing entries (NaN) are marginalised and censored entries are held at
their bound without differentiation, so each row is differentiated only in
its observed, uncensored variables. Rows sharing that pattern are evaluated
as one batch. Gradients come from a calibrated clique tree: component g is
the root value at the clique holding factor g with that factor's parameter
partials swapped in, divided by the density.
"""

import logging
import math

import numpy as np

from . import copulas
from .cliquetree import build_min_fill
from .errors import DidNotConverge, InvalidSpec
from .inference import (
    LOG, ContinuousPoint, InferenceWorkspace, calibrate, forest_value, pass_messages,
)
from .margins import clamped_copula_coord, fit_mle, power_coord
from .optimizers import OptimizerConfig, gradient_descent, lbfgs_barrier, lbfgs_restart
from .piecewise import piecewise_learn

logger = logging.getLogger(__name__)

METHODS = ('gd', 'lbfgs-restart', 'lbfgs-barrier', 'piecewise')


class EnergyEvaluator:
    """
    Energy and gradient of a model's copula parameters on a dataset.

    factors restricts the product to a subset of model factors, diff_vars
    restricts differentiation to a subset of variables and free selects the
    parameters being optimised; the rest are read from `fixed`.
    """

    def __init__(self, model, data, censored=None, factors=None, diff_vars=None, free=None,
                 arithmetic=LOG):
        self.model = model
        self.data = np.atleast_2d(np.asarray(data, dtype=float))
        if self.data.shape[1] != model.n:
            raise InvalidSpec(f'data has {self.data.shape[1]} columns, model has {model.n} variables')
        self.m = self.data.shape[0]
        self.censored = (
            np.zeros(self.data.shape, dtype=bool) if censored is None
            else np.asarray(censored, dtype=bool)
        )
        self.factors = list(range(len(model.factors))) if factors is None else list(factors)
        self.diff_vars = frozenset(range(model.n) if diff_vars is None else diff_vars)
        self.free = list(self.factors) if free is None else list(free)
        self.fixed = model.params()
        self.arithmetic = arithmetic

        observed = ~np.isnan(self.data)
        u = np.ones(self.data.shape)
        for i, margin in enumerate(model.margins):
            rows = observed[:, i]
            u[rows, i] = clamped_copula_coord(margin, self.data[rows, i])
        self.u = u
        self.v = np.column_stack([power_coord(u[:, i], model.d[i]) for i in range(model.n)])

        differentiated = observed & ~self.censored
        differentiated[:, [i for i in range(model.n) if i not in self.diff_vars]] = False
        self.log_chain = np.where(
            differentiated, np.log(model.d) + (model.d - 1.0) * np.log(u), 0.0,
        ).sum(axis=1)

        self.groups = {}
        for r, pattern in enumerate(differentiated):
            key = frozenset(np.flatnonzero(pattern).tolist())
            self.groups.setdefault(key, []).append(r)
        self.groups = {k: np.array(v) for k, v in self.groups.items()}

        self.scopes = [
            tuple(s for s in model.factors[f].scope if s in self.diff_vars) for f in self.factors
        ]
        self.tree = build_min_fill(self.scopes)
        self.alpha = self.tree.clique_of_factor()
        self._local = {f: k for k, f in enumerate(self.factors)}

    def restricted(self, factors, diff_vars, free):
        """Same data and model over a subset of factors, variables and parameters."""
        return EnergyEvaluator(
            self.model, self.data, self.censored, factors, diff_vars, free, self.arithmetic,
        )

    # --- parameters ---

    def params(self, theta):
        """Full parameter vector, or None when theta leaves the domain."""
        full = np.array(self.fixed, dtype=float)
        full[self.free] = np.asarray(theta, dtype=float)
        for f in self.free:
            factor = self.model.factors[f]
            if factor.kind == copulas.CLAYTON:
                if not full[f] > 0 or not math.isfinite(full[f]):
                    return None
                full[f] = max(full[f], copulas.CLAYTON_THETA_FLOOR)
            elif not -1.0 < full[f] < 1.0:
                return None
        return full

    def constraints(self, theta):
        """Per-parameter f_i(θ) < 0 and its derivative."""
        theta = np.asarray(theta, dtype=float)
        f_c = np.empty(len(self.free))
        df_c = np.empty(len(self.free))
        for k, f in enumerate(self.free):
            if self.model.factors[f].kind == copulas.CLAYTON:
                f_c[k], df_c[k] = -theta[k], -1.0
            else:
                f_c[k], df_c[k] = theta[k] ** 2 - 1.0, 2.0 * theta[k]
        return f_c, df_c

    def initial(self, rng):
        return np.array([copulas.draw_param(self.model.factors[f].kind, rng) for f in self.free])

    # --- evaluation ---

    def _workspace(self, model, rows, diff):
        evaluator = ContinuousPoint(model, self.v[rows], self.factors)
        return InferenceWorkspace(self.tree, self.scopes, evaluator, diff, self.arithmetic)

    def grad_loglik(self, theta, rows=None, with_grad=True):
        """
        Per-row log copula density and (optionally) the gradient of each row's
        log density in the free parameters.
        """
        full = self.params(theta)
        rows = np.arange(self.m) if rows is None else np.asarray(rows)
        log_density = np.full(len(rows), -np.inf)
        grads = np.zeros((len(rows), len(self.free)))
        if full is None:
            return log_density, grads
        model = self.model.with_params(full)
        position = {r: k for k, r in enumerate(rows)}

        for diff, members in self.groups.items():
            picked = np.array([r for r in members if r in position], dtype=int)
            if picked.size == 0:
                continue
            out = np.array([position[r] for r in picked])
            ws = self._workspace(model, picked, diff)
            if with_grad:
                calibrate(ws)
                base = forest_value(ws)
            else:
                base = pass_messages(ws)
            positive = base.sign > 0
            log_density[out] = np.where(positive, base.log_abs + self.log_chain[picked], -np.inf)
            if not with_grad:
                continue
            for k, f in enumerate(self.free):
                if f not in self._local:
                    continue
                swapped = forest_value(ws, swap=self._local[f], alpha=self.alpha)
                ratio = (swapped / base).value()
                grads[out, k] = np.where(positive, ratio, 0.0)
        return log_density, grads

    def log_density(self, theta):
        return self.grad_loglik(theta, with_grad=False)[0]

    def energy(self, theta):
        log_density = self.log_density(theta)
        if not np.all(np.isfinite(log_density)):
            return math.inf
        return float(-log_density.mean())

    def value(self, theta):
        return self.energy(theta)

    def value_and_grad(self, theta):
        log_density, grads = self.grad_loglik(theta)
        if not np.all(np.isfinite(log_density)):
            return math.inf, np.zeros(len(self.free))
        return float(-log_density.mean()), -grads.mean(axis=0)


def fit_margins(model, data, censored=None):
    """Stage one: each margin by maximum likelihood on its observed, uncensored entries."""
    data = np.asarray(data, dtype=float)
    usable = ~np.isnan(data)
    if censored is not None:
        usable &= ~np.asarray(censored, dtype=bool)
    margins = [fit_mle(data[usable[:, i], i]) for i in range(model.n)]
    return model.with_margins(margins)


def run_method(method, evaluator, x0, config, rng=None):
    """One optimiser run from x0; DidNotConverge propagates with its report."""
    if method == 'gd':
        return gradient_descent(evaluator, x0, config)
    if method == 'lbfgs-restart':
        return lbfgs_restart(evaluator, x0, config)
    if method == 'lbfgs-barrier':
        return lbfgs_barrier(evaluator, x0, config)
    if method == 'piecewise':
        return piecewise_learn(evaluator, x0, config, rng)
    raise InvalidSpec(f'unknown learning method {method!r}; choose from {", ".join(METHODS)}')


def fit(model, data, method='lbfgs-restart', config=None, censored=None, fit_marginals=True):
    """
    Fit margins, then the copula parameters from config.restarts random
    starts, keeping the lowest-energy run. The returned report carries the
    learned model; DidNotConverge is raised when the best run hit its cap.
    """
    config = config or OptimizerConfig()
    rng = np.random.default_rng(config.seed)
    fitted = fit_margins(model, data, censored) if fit_marginals else model
    evaluator = EnergyEvaluator(fitted, data, censored)

    best = None
    for attempt in range(config.restarts):
        x0 = evaluator.initial(rng)
        try:
            report = run_method(method, evaluator, x0, config, rng)
        except DidNotConverge as exc:
            report = exc.report
        logger.info('%s start %d: energy %.8g, converged=%s', method, attempt + 1, report.energy, report.converged)
        if best is None or report.energy < best.energy:
            best = report

    best.model = fitted.with_params(best.theta_hat)
    if not best.converged:
        raise DidNotConverge(f'{method} did not converge from any of {config.restarts} starts', best)
    return best
