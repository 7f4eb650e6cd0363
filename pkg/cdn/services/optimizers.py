"""
Gradient-based minimisers shared by full, barrier and piecewise learning.

An objective is any object with value(x) -> float and
value_and_grad(x) -> (float, ndarray); value may return +inf outside the
feasible region, which the line search treats as a rejected step.
"""

import logging
import math
from collections import deque

import numpy as np

from .errors import DidNotConverge, InvalidSpec

logger = logging.getLogger(__name__)

MAX_BACKTRACKS = 300
CURVATURE_FLOOR = 1e-10


class OptimizerConfig:
    """Metaparameters for every learning method."""

    def __init__(self, epsilon=1e-8, max_iter=100, alpha=1e-3, beta=0.9, lbfgs_memory=10,
                 barrier_t0=1.0, barrier_mu=10.0, restarts=3, seed=None):
        if not epsilon > 0:
            raise InvalidSpec(f'epsilon must be positive, got {epsilon}')
        if not 0 < alpha < 0.5:
            raise InvalidSpec(f'alpha must be in (0, 0.5), got {alpha}')
        if not 0 < beta < 1:
            raise InvalidSpec(f'beta must be in (0, 1), got {beta}')
        if int(max_iter) < 1 or int(lbfgs_memory) < 1 or int(restarts) < 1:
            raise InvalidSpec('max_iter, lbfgs_memory and restarts must be at least 1')
        if not (barrier_t0 > 0 and barrier_mu > 1):
            raise InvalidSpec(f'barrier needs t0 > 0 and mu > 1, got ({barrier_t0}, {barrier_mu})')
        self.epsilon = float(epsilon)
        self.max_iter = int(max_iter)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.lbfgs_memory = int(lbfgs_memory)
        self.barrier_t0 = float(barrier_t0)
        self.barrier_mu = float(barrier_mu)
        self.restarts = int(restarts)
        self.seed = seed

    def to_dict(self):
        return dict(vars(self))


class LearnReport:
    def __init__(self, method, theta_hat, energy, energy_trace, iterations, restarts, converged,
                 reason, model=None):
        self.method = method
        self.theta_hat = np.asarray(theta_hat, dtype=float)
        self.energy = float(energy)
        self.energy_trace = [float(e) for e in energy_trace]
        self.iterations = int(iterations)
        self.restarts = int(restarts)
        self.converged = bool(converged)
        self.reason = reason
        self.model = model

    def to_dict(self, version=None):
        def finite(value):
            return value if math.isfinite(value) else None

        data = {
            'method': self.method,
            'energy': finite(self.energy),
            'iterations': self.iterations,
            'restarts': self.restarts,
            'converged': self.converged,
            'reason': self.reason,
            'energy_trace': [finite(e) for e in self.energy_trace],
        }
        if version is not None:
            data['version'] = version
        return data

    def __repr__(self):
        return (
            f'LearnReport({self.method!r}, energy={self.energy:.6g}, iterations={self.iterations}, '
            f'converged={self.converged}, reason={self.reason!r})'
        )


def backtracking(objective, x, f, g, direction, config):
    """
    Armijo backtracking from a unit step: shrink by beta until
    f(x + η p) <= f(x) + α η gᵀp. Returns (η, x_new, f_new) or None.
    """
    slope = float(g @ direction)
    eta = 1.0
    for _ in range(MAX_BACKTRACKS):
        x_new = x + eta * direction
        f_new = objective.value(x_new)
        if np.isfinite(f_new) and f_new <= f + config.alpha * eta * slope:
            return eta, x_new, f_new
        eta *= config.beta
    return None


def _termination(f_old, f_new, x_old, x_new, g_new, eps):
    if abs(f_old - f_new) <= eps * max(1.0, abs(f_old)):
        return 'objective'
    if np.linalg.norm(x_new - x_old) <= eps:
        return 'step'
    if np.linalg.norm(g_new) <= eps:
        return 'gradient'
    return None


def _start(objective, x0):
    x = np.array(x0, dtype=float)
    f, g = objective.value_and_grad(x)
    if not np.isfinite(f):
        raise InvalidSpec(f'objective is not finite at the starting point {x.tolist()}')
    return x, f, np.asarray(g, dtype=float)


def gradient_descent(objective, x0, config, method='gd'):
    """Steepest descent with backtracking; stops on the first ε-criterion."""
    x, f, g = _start(objective, x0)
    trace = [f]
    for iteration in range(1, config.max_iter + 1):
        if np.linalg.norm(g) <= config.epsilon:
            return LearnReport(method, x, f, trace, iteration - 1, 0, True, 'gradient')
        step = backtracking(objective, x, f, g, -g, config)
        if step is None:
            report = LearnReport(method, x, f, trace, iteration, 0, False, 'line_search_exhausted')
            raise DidNotConverge(f'gradient descent line search failed at iteration {iteration}', report)
        _, x_new, _ = step
        f_new, g_new = objective.value_and_grad(x_new)
        reason = _termination(f, f_new, x, x_new, g_new, config.epsilon)
        x, f, g = x_new, f_new, np.asarray(g_new, dtype=float)
        trace.append(f)
        logger.debug('gd iteration %d: energy %.10g', iteration, f)
        if reason:
            return LearnReport(method, x, f, trace, iteration, 0, True, reason)
    report = LearnReport(method, x, f, trace, config.max_iter, 0, False, 'max_iter')
    raise DidNotConverge(f'gradient descent did not converge within {config.max_iter} iterations', report)


def two_loop(g, pairs):
    """Approximate inverse-Hessian product H g from (s, y) pairs, oldest first."""
    q = np.array(g, dtype=float)
    saved = []
    for s, y in reversed(pairs):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        q -= a * y
        saved.append((rho, a, s, y))
    if pairs:
        s, y = pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for rho, a, s, y in reversed(saved):
        b = rho * float(y @ q)
        q += s * (a - b)
    return q


def lbfgs_restart(objective, x0, config, method='lbfgs-restart'):
    """
    L-BFGS with backtracking. When the line search fails the curvature
    history is dropped and the run restarts from the current point; a failure
    with an empty history raises DidNotConverge.
    """
    x, f, g = _start(objective, x0)
    pairs = deque(maxlen=config.lbfgs_memory)
    trace = [f]
    restarts = 0
    for iteration in range(1, config.max_iter + 1):
        if np.linalg.norm(g) <= config.epsilon:
            return LearnReport(method, x, f, trace, iteration - 1, restarts, True, 'gradient')
        direction = -two_loop(g, list(pairs))
        if not float(g @ direction) < 0:
            pairs.clear()
            direction = -g
        step = backtracking(objective, x, f, g, direction, config)
        if step is None:
            if pairs:
                pairs.clear()
                restarts += 1
                logger.info('L-BFGS line search failed at iteration %d; restarting (restart %d)', iteration, restarts)
                continue
            report = LearnReport(method, x, f, trace, iteration, restarts, False, 'line_search_exhausted')
            raise DidNotConverge(f'L-BFGS line search failed along the gradient at iteration {iteration}', report)
        _, x_new, _ = step
        f_new, g_new = objective.value_and_grad(x_new)
        g_new = np.asarray(g_new, dtype=float)
        s, y = x_new - x, g_new - g
        if float(s @ y) > CURVATURE_FLOOR:
            pairs.append((s, y))
        reason = _termination(f, f_new, x, x_new, g_new, config.epsilon)
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        logger.debug('lbfgs iteration %d: energy %.10g', iteration, f)
        if reason:
            return LearnReport(method, x, f, trace, iteration, restarts, True, reason)
    report = LearnReport(method, x, f, trace, config.max_iter, restarts, False, 'max_iter')
    raise DidNotConverge(f'L-BFGS did not converge within {config.max_iter} iterations', report)


class BarrierObjective:
    """objective(x) - (1/t) Σ ln(-f_i(x)) for per-parameter constraints f_i(x) < 0."""

    def __init__(self, objective, t):
        self.objective = objective
        self.t = float(t)

    def _barrier(self, x):
        f_c, df_c = self.objective.constraints(x)
        if np.any(f_c >= 0):
            return math.inf, None
        value = -np.sum(np.log(-f_c)) / self.t
        grad = -(df_c / f_c) / self.t
        return value, grad

    def value(self, x):
        barrier, _ = self._barrier(x)
        if not math.isfinite(barrier):
            return math.inf
        return self.objective.value(x) + barrier

    def value_and_grad(self, x):
        barrier, barrier_grad = self._barrier(x)
        if not math.isfinite(barrier):
            return math.inf, np.zeros_like(np.asarray(x, dtype=float))
        f, g = self.objective.value_and_grad(x)
        return f + barrier, np.asarray(g, dtype=float) + barrier_grad


def lbfgs_barrier(objective, x0, config, method='lbfgs-barrier'):
    """
    Warm-started L-BFGS solves of the barrier-augmented objective with
    t <- mu t, until (number of constraints) / t < epsilon.
    """
    x = np.array(x0, dtype=float)
    n_constraints = len(objective.constraints(x)[0])
    t = config.barrier_t0
    trace, iterations, restarts = [], 0, 0
    while True:
        inner = BarrierObjective(objective, t)
        try:
            report = lbfgs_restart(inner, x, config, method)
        except DidNotConverge as exc:
            partial = exc.report
            partial.energy_trace = trace + partial.energy_trace
            partial.iterations += iterations
            partial.restarts += restarts
            partial.energy = objective.value(partial.theta_hat)
            raise DidNotConverge(f'barrier solve at t={t:g} did not converge', partial) from exc
        x = report.theta_hat
        trace.extend(report.energy_trace)
        iterations += report.iterations
        restarts += report.restarts
        logger.debug('barrier t=%g: energy %.10g after %d iterations', t, report.energy, report.iterations)
        if n_constraints / t < config.epsilon:
            break
        t *= config.barrier_mu
    return LearnReport(method, x, objective.value(x), trace, iterations, restarts, True, 'barrier_gap')
