"""
Clique trees by simulated variable elimination with the min-fill heuristic.

Cliques are sorted variable tuples; a clique-local position is an index into
that tuple and subsets of a clique are bitmasks over positions. Every clique
has at most one child (downstream neighbour); roots have child -1, and a
forest has one root per connected component.
"""

import itertools
import logging

import networkx as nx

from .errors import (
    EmptyModel, FamilyPreservationViolation, RunningIntersectionViolation,
    TopologyViolation, Violation,
)

logger = logging.getLogger(__name__)


class CliqueTree:
    def __init__(self, cliques, assignments, child, topo_order):
        self.cliques = [tuple(sorted(c)) for c in cliques]
        self.assignments = [list(a) for a in assignments]
        self.child = list(child)
        self.topo_order = list(topo_order)
        self._positions = [{v: p for p, v in enumerate(c)} for c in self.cliques]

    def __len__(self):
        return len(self.cliques)

    @property
    def roots(self):
        return [i for i in self.topo_order if self.child[i] == -1]

    def parents(self, i):
        """Upstream neighbours of clique i, in topological order."""
        return [p for p in self.topo_order if self.child[p] == i]

    def neighbours(self, i):
        nbrs = self.parents(i)
        if self.child[i] != -1:
            nbrs.append(self.child[i])
        return nbrs

    def edges(self):
        return [(i, self.child[i]) for i in self.topo_order if self.child[i] != -1]

    def sepset(self, i, j):
        return tuple(sorted(set(self.cliques[i]) & set(self.cliques[j])))

    def clique_of_factor(self):
        """α: factor index to the clique it is assigned to."""
        alpha = {}
        for i, factors in enumerate(self.assignments):
            for f in factors:
                alpha[f] = i
        return alpha

    def position(self, i, variable):
        return self._positions[i][variable]

    def mask(self, i, variables):
        """Bitmask over clique i's positions for the given variables."""
        positions = self._positions[i]
        out = 0
        for v in variables:
            out |= 1 << positions[v]
        return out

    def graph(self):
        g = nx.Graph()
        g.add_nodes_from(range(len(self.cliques)))
        g.add_edges_from(self.edges())
        return g

    def __repr__(self):
        return f'CliqueTree(cliques={self.cliques!r}, child={self.child!r})'


def min_fill_order(graph):
    """
    Elimination order and elimination cliques.

    At each step the vertex whose elimination adds the fewest fill edges goes
    next; ties go to the lowest variable index.
    """
    graph = graph.copy()
    order, cliques = [], []
    while graph.number_of_nodes():
        best, best_fill = None, None
        for v in sorted(graph.nodes):
            nbrs = list(graph.neighbors(v))
            fill = sum(1 for a, b in itertools.combinations(nbrs, 2) if not graph.has_edge(a, b))
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
        nbrs = list(graph.neighbors(best))
        graph.add_edges_from(itertools.combinations(nbrs, 2))
        cliques.append(frozenset([best, *nbrs]))
        order.append(best)
        graph.remove_node(best)
    return order, cliques


def _maximal(cliques):
    kept = []
    for idx, c in enumerate(cliques):
        subsumed = any(
            c < other or (c == other and j < idx)
            for j, other in enumerate(cliques) if j != idx
        )
        if not subsumed:
            kept.append(c)
    return kept


def build_min_fill(scopes, n_vars=None):
    """
    Build a clique tree (or forest) for factors with the given scopes.

    n_vars adds variables 0..n_vars-1 even when no scope mentions them.
    Factor f is assigned to the first clique in topological order whose
    variables include scope f; empty scopes go to the first clique.
    """
    scopes = [tuple(s) for s in scopes]
    interaction = nx.Graph()
    if n_vars is not None:
        interaction.add_nodes_from(range(n_vars))
    for scope in scopes:
        interaction.add_nodes_from(scope)
        interaction.add_edges_from(itertools.combinations(scope, 2))
    if interaction.number_of_nodes() == 0:
        raise EmptyModel('cannot build a clique tree without variables')

    _, elimination_cliques = min_fill_order(interaction)
    cliques = _maximal(elimination_cliques)

    clique_graph = nx.Graph()
    clique_graph.add_nodes_from(range(len(cliques)))
    for i, j in itertools.combinations(range(len(cliques)), 2):
        weight = len(cliques[i] & cliques[j])
        if weight:
            clique_graph.add_edge(i, j, weight=weight)
    forest = nx.maximum_spanning_tree(clique_graph)

    child = [-1] * len(cliques)
    topo_order = []
    for component in sorted(nx.connected_components(forest), key=min):
        root = max(component)
        bfs = [root]
        for node, pred in nx.bfs_predecessors(forest, root):
            child[node] = pred
            bfs.append(node)
        topo_order.extend(reversed(bfs))

    assignments = [[] for _ in cliques]
    for f, scope in enumerate(scopes):
        target = next(i for i in topo_order if set(scope) <= cliques[i])
        assignments[target].append(f)

    tree = CliqueTree(cliques, assignments, child, topo_order)
    logger.debug('Built clique tree with %d cliques, treewidth %d', len(tree), treewidth(tree))
    return tree


def validate_tree(tree, scopes):
    """Family preservation, running intersection and topological consistency."""
    violations = []
    n = len(tree.cliques)

    placed = {}
    for i, factors in enumerate(tree.assignments):
        for f in factors:
            if f in placed:
                violations.append(Violation(
                    FamilyPreservationViolation, f'factor {f} assigned to cliques {placed[f]} and {i}', f,
                ))
            placed[f] = i
    for f, scope in enumerate(scopes):
        if f not in placed:
            violations.append(Violation(FamilyPreservationViolation, f'factor {f} is not assigned', f))
        elif not set(scope) <= set(tree.cliques[placed[f]]):
            violations.append(Violation(
                FamilyPreservationViolation,
                f'factor {f} scope {tuple(scope)} not inside clique {tree.cliques[placed[f]]}',
                (f, placed[f]),
            ))

    if sorted(tree.topo_order) != list(range(n)) or len(tree.child) != n:
        violations.append(Violation(TopologyViolation, 'topological order is not a permutation of the cliques', tree.topo_order))
        return violations
    rank = {c: r for r, c in enumerate(tree.topo_order)}
    for i, c in enumerate(tree.child):
        if c == -1:
            continue
        if not 0 <= c < n:
            violations.append(Violation(TopologyViolation, f'clique {i} has unknown child {c}', i))
        elif rank[i] >= rank[c]:
            violations.append(Violation(TopologyViolation, f'clique {i} is not ordered before its child {c}', (i, c)))
    if any(v.kind is TopologyViolation for v in violations):
        return violations

    graph = tree.graph()
    variables = sorted(set().union(*map(set, tree.cliques))) if tree.cliques else []
    for v in variables:
        holders = [i for i, c in enumerate(tree.cliques) if v in c]
        if not nx.is_connected(graph.subgraph(holders)):
            violations.append(Violation(
                RunningIntersectionViolation, f'variable {v} appears in disconnected cliques {holders}', v,
            ))
    return violations


def treewidth(tree):
    return max((len(c) for c in tree.cliques), default=0) - 1


def tree_to_dict(tree, names=None):
    """JSON-ready dump of cliques, assignments and sepsets."""
    label = (lambda v: names[v]) if names is not None else (lambda v: v)
    return {
        'treewidth': treewidth(tree),
        'topo_order': tree.topo_order,
        'cliques': [
            {
                'index': i,
                'variables': [label(v) for v in c],
                'factors': tree.assignments[i],
                'child': tree.child[i],
                'sepset': [label(v) for v in tree.sepset(i, tree.child[i])] if tree.child[i] != -1 else [],
            }
            for i, c in enumerate(tree.cliques)
        ],
    }
