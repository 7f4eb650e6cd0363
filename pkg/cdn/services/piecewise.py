"""
Piecewise composite-likelihood learning over the parameter graph.

Each factor's parameter is learned on its own subproblem: the factor plus
every factor sharing a variable with it, differentiated in the factor's
scope only, with all other parameters held at their current values. One
outer iteration visits every subproblem once in shuffled order and updates
parameters in place.
"""

import logging

import networkx as nx
import numpy as np

from .cliquetree import treewidth
from .errors import DidNotConverge
from .optimizers import LearnReport, lbfgs_restart

logger = logging.getLogger(__name__)


class ParameterGraph:
    """Factors as nodes, joined when their scopes intersect."""

    def __init__(self, model):
        self.model = model
        self.graph = nx.Graph()
        self.graph.add_nodes_from(range(len(model.factors)))
        scopes = [set(f.scope) for f in model.factors]
        for i in range(len(scopes)):
            for j in range(i + 1, len(scopes)):
                if scopes[i] & scopes[j]:
                    self.graph.add_edge(i, j)

    def neighbours(self, i):
        return sorted(self.graph.neighbors(i))

    def subproblem(self, i):
        """(factor ids, differentiated variables) of node i."""
        return [i, *self.neighbours(i)], tuple(self.model.factors[i].scope)


def subproblem_evaluators(evaluator, graph):
    evaluators = {}
    for i in graph.graph.nodes:
        factors, diff_vars = graph.subproblem(i)
        evaluators[i] = evaluator.restricted(factors, diff_vars, [i])
    return evaluators


def subproblem_treewidths(evaluator):
    graph = ParameterGraph(evaluator.model)
    return {i: treewidth(ev.tree) for i, ev in subproblem_evaluators(evaluator, graph).items()}


def piecewise_learn(evaluator, x0, config, rng=None, method='piecewise'):
    """
    Gauss-Seidel sweeps of single-parameter L-BFGS solves. A subproblem is
    settled when its squared parameter change or its local energy change in
    a sweep is below epsilon; the run ends once every subproblem is settled.
    The reported energy is the sum of the local energies.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    graph = ParameterGraph(evaluator.model)
    subproblems = subproblem_evaluators(evaluator, graph)
    theta = np.array(x0, dtype=float)
    local_energy = np.zeros(len(theta))
    trace, restarts = [], 0

    for sweep in range(1, config.max_iter + 1):
        settled = []
        for i in rng.permutation(len(theta)):
            local = subproblems[int(i)]
            local.fixed = theta.copy()
            before = local.energy([theta[i]])
            try:
                report = lbfgs_restart(local, [theta[i]], config, method)
            except DidNotConverge as exc:
                report = exc.report
            restarts += report.restarts
            change = float(report.theta_hat[0] - theta[i])
            theta[i] = report.theta_hat[0]
            local_energy[i] = report.energy
            settled.append(change ** 2 < config.epsilon or abs(report.energy - before) < config.epsilon)
        trace.append(float(local_energy.sum()))
        logger.debug('piecewise sweep %d: local energy sum %.10g, settled %d/%d', sweep, trace[-1], sum(settled), len(settled))
        if all(settled):
            return LearnReport(method, theta, trace[-1], trace, sweep, restarts, True, 'all_settled')

    report = LearnReport(method, theta, trace[-1] if trace else np.inf, trace, config.max_iter, restarts, False, 'max_iter')
    raise DidNotConverge(f'piecewise learning did not settle within {config.max_iter} sweeps', report)
