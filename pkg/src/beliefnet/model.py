"""Network representation: categorical variables, DAG, CPTs, structural queries.

A fitted network couples a DAG over named categorical variables with one
conditional probability table per node; the joint distribution is the product
of the per-node conditionals P(X_i | parents(X_i)).

Parent configurations are indexed mixed-radix over ``parent_order`` with the
first parent most significant: configuration j of parents with cardinalities
(c_1, ..., c_m) decodes to levels (l_1, ..., l_m) via
``j = ((l_1 * c_2 + l_2) * c_3 + ...) + l_m``. Row j of a CPT is the
distribution of the variable given that configuration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CycleDetected,
    IncompleteAssignment,
    UnknownLevel,
    UnknownVariable,
)

# Row sums within EXACT_TOL are accepted as-is; within REPAIR_TOL they are
# renormalized with a warning; anything worse is rejected.
ROW_SUM_EXACT_TOL = 1e-12
ROW_SUM_REPAIR_TOL = 1e-9


def config_index(cards, levels):
    """Mixed-radix index of a parent configuration (first parent most significant)."""
    j = 0
    for card, level in zip(cards, levels):
        j = j * card + level
    return j


def config_levels(cards, j):
    """Inverse of :func:`config_index`."""
    levels = [0] * len(cards)
    for pos in range(len(cards) - 1, -1, -1):
        levels[pos] = j % cards[pos]
        j //= cards[pos]
    return tuple(levels)


@dataclass(frozen=True)
class CategoricalVariable:
    """A named variable with an ordered, finite set of level labels.

    ``ordinal`` is metadata only: ordinal scales are modeled as plain
    categorical variables, so no order-aware parameterization exists anywhere
    in the toolkit.
    """

    name: str
    levels: tuple[str, ...]
    ordinal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if len(self.levels) < 2:
            raise ValueError(f"variable {self.name!r} needs at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"variable {self.name!r} has duplicate levels")

    @property
    def r(self) -> int:
        return len(self.levels)

    def level_index(self, label: str) -> int:
        try:
            return self.levels.index(label)
        except ValueError:
            raise UnknownLevel(self.name, label) from None


@dataclass(frozen=True)
class Dag:
    """A directed acyclic graph over named nodes.

    ``parents`` maps each node to an ordered tuple of parent names; nodes
    absent from the mapping have no parents. Acyclicity is verified at
    construction.
    """

    nodes: tuple[str, ...]
    parents: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node names")
        node_set = set(self.nodes)
        full = {}
        for node, pa in dict(self.parents).items():
            if node not in node_set:
                raise UnknownVariable(node)
            pa = tuple(pa)
            for p in pa:
                if p not in node_set:
                    raise UnknownVariable(p)
                if p == node:
                    raise ValueError(f"self-loop on {node!r}")
            if len(set(pa)) != len(pa):
                raise ValueError(f"duplicate parent for {node!r}")
            full[node] = pa
        for node in self.nodes:
            full.setdefault(node, ())
        object.__setattr__(self, "parents", full)
        topological_order(self)  # raises CycleDetected

    def parent_tuple(self, node: str) -> tuple:
        try:
            return self.parents[node]
        except KeyError:
            raise UnknownVariable(node) from None

    def arcs(self):
        """All (parent, child) pairs, children in node order."""
        return [(p, c) for c in self.nodes for p in self.parents[c]]

    def children_map(self):
        ch = {n: [] for n in self.nodes}
        for p, c in self.arcs():
            ch[p].append(c)
        return ch

    def ancestors(self, node: str) -> set:
        """Strict ancestors of ``node``."""
        self.parent_tuple(node)
        seen = set()
        stack = list(self.parents[node])
        while stack:
            cur = stack.pop()
            if cur not in seen:
                seen.add(cur)
                stack.extend(self.parents[cur])
        return seen


def topological_order(dag: Dag) -> list:
    """Order nodes so every parent precedes its children.

    Raises CycleDetected (naming one offending cycle) instead of returning a
    partial order. Deterministic: among ready nodes, the one listed first in
    ``dag.nodes`` is emitted first.
    """
    parents = {n: set(dag.parents.get(n, ())) for n in dag.nodes}
    order = []
    remaining = list(dag.nodes)
    while remaining:
        ready = [n for n in remaining if not parents[n]]
        if not ready:
            raise CycleDetected(_find_cycle(dag, remaining))
        for n in ready:
            order.append(n)
        done = set(ready)
        remaining = [n for n in remaining if n not in done]
        for n in remaining:
            parents[n] -= done
    return order


def _find_cycle(dag, candidates):
    # every remaining node has a parent among the remaining nodes, so walking
    # parent links must revisit a node
    remaining = set(candidates)
    start = candidates[0]
    trail, seen = [], {}
    cur = start
    while cur not in seen:
        seen[cur] = len(trail)
        trail.append(cur)
        cur = next(p for p in dag.parents[cur] if p in remaining)
    cycle = trail[seen[cur]:]
    cycle.reverse()  # parent links walk backwards; report in arc direction
    return cycle


def d_separated(dag: Dag, x: str, y: str, given=()) -> bool:
    """Decide whether ``given`` blocks every path between ``x`` and ``y``.

    Standard d-separation, computed by active-trail reachability (Bayes-ball):
    a collider admits the trail only if it or one of its descendants is
    observed; chains and forks are blocked by observed nodes.
    """
    node_set = set(dag.nodes)
    given = set(given)
    for name in {x, y} | given:
        if name not in node_set:
            raise UnknownVariable(name)
    if x == y or x in given or y in given:
        raise ValueError("x and y must be distinct and not part of the conditioning set")

    children = dag.children_map()
    # given plus all its ancestors: the set from which a collider can be opened
    anc_given = set(given)
    stack = list(given)
    while stack:
        for p in dag.parents[stack.pop()]:
            if p not in anc_given:
                anc_given.add(p)
                stack.append(p)

    visited = set()
    frontier = [(x, "up")]
    while frontier:
        node, direction = frontier.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node == y:
            return False
        if direction == "up" and node not in given:
            frontier.extend((p, "up") for p in dag.parents[node])
            frontier.extend((c, "down") for c in children[node])
        elif direction == "down":
            if node not in given:
                frontier.extend((c, "down") for c in children[node])
            if node in anc_given:
                frontier.extend((p, "up") for p in dag.parents[node])
    return True


@dataclass(frozen=True)
class TierSpec:
    """Ordered variable groups used to blacklist arcs into earlier tiers.

    ``within_tier_edges[i]`` permits arcs among the members of tier i
    (default True for every tier).
    """

    tiers: tuple
    within_tier_edges: tuple = ()

    def __post_init__(self):
        tiers = tuple(tuple(t) for t in self.tiers)
        if not tiers or any(not t for t in tiers):
            raise ValueError("tiers must be non-empty")
        flat = [v for t in tiers for v in t]
        if len(set(flat)) != len(flat):
            raise ValueError("a variable appears in more than one tier")
        within = tuple(self.within_tier_edges) or (True,) * len(tiers)
        if len(within) != len(tiers):
            raise ValueError("within_tier_edges length must match tiers")
        object.__setattr__(self, "tiers", tiers)
        object.__setattr__(self, "within_tier_edges", within)

    def members(self) -> set:
        return {v for t in self.tiers for v in t}


class Evidence:
    """An assignment of observed levels to a subset of variables."""

    __slots__ = ("assignments",)

    def __init__(self, assignments=None):
        if isinstance(assignments, Evidence):
            assignments = assignments.assignments
        self.assignments = dict(assignments or {})

    def __contains__(self, variable):
        return variable in self.assignments

    def __getitem__(self, variable):
        return self.assignments[variable]

    def __len__(self):
        return len(self.assignments)

    def __eq__(self, other):
        return isinstance(other, Evidence) and self.assignments == other.assignments

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.assignments.items())
        return f"Evidence({inner})"

    def items(self):
        return self.assignments.items()

    def validate(self, net: "FittedNetwork"):
        """Check every variable exists and every level is in its domain."""
        for name, level in self.assignments.items():
            net.variable(name).level_index(level)
        return self


class Cpt:
    """Conditional probability table of one variable.

    ``table`` has shape (q, r): one row per parent configuration (mixed-radix
    over ``parent_order``), one column per variable state. Rows summing to 1
    within 1e-12 are taken as-is; discrepancies up to 1e-9 are renormalized
    with a warning; larger ones are rejected.
    """

    __slots__ = ("variable", "parent_order", "table")

    def __init__(self, variable, parent_order, table):
        self.variable = str(variable)
        self.parent_order = tuple(parent_order)
        table = np.array(table, dtype=float)
        if table.ndim != 2:
            raise ValueError(f"CPT for {variable!r} must be 2-D (q, r)")
        if table.shape[1] < 2:
            raise ValueError(f"CPT for {variable!r} needs at least 2 states")
        if np.any(table < 0) or np.any(table > 1 + ROW_SUM_REPAIR_TOL):
            raise ValueError(f"CPT for {variable!r} has entries outside [0, 1]")
        sums = table.sum(axis=1)
        bad = np.abs(sums - 1.0) > ROW_SUM_REPAIR_TOL
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"CPT for {variable!r}: row {j} sums to {sums[j]!r}, not 1"
            )
        repair = np.abs(sums - 1.0) > ROW_SUM_EXACT_TOL
        if np.any(repair):
            warnings.warn(
                f"CPT for {variable!r}: renormalizing {int(repair.sum())} row(s) "
                "within 1e-9 of 1",
                stacklevel=2,
            )
            table = table / sums[:, None]
        table.flags.writeable = False
        self.table = table

    @property
    def q(self) -> int:
        return self.table.shape[0]

    @property
    def r(self) -> int:
        return self.table.shape[1]

    def row(self, j) -> np.ndarray:
        return self.table[j]

    def __eq__(self, other):
        return (
            isinstance(other, Cpt)
            and self.variable == other.variable
            and self.parent_order == other.parent_order
            and self.table.shape == other.table.shape
            and bool(np.all(self.table == other.table))
        )

    def __repr__(self):
        return f"Cpt({self.variable!r}, parents={list(self.parent_order)}, q={self.q}, r={self.r})"


class FittedNetwork:
    """A DAG plus one CPT per node: a fully parameterized discrete network."""

    __slots__ = ("variables", "dag", "cpts", "metadata", "_index")

    def __init__(self, variables, dag, cpts, metadata=None):
        self.variables = tuple(variables)
        self._index = {v.name: v for v in self.variables}
        if len(self._index) != len(self.variables):
            raise ValueError("duplicate variable names")
        if set(dag.nodes) != set(self._index):
            raise ValueError("DAG nodes and variable names differ")
        self.dag = dag
        if isinstance(cpts, dict):
            cpts = dict(cpts)
        else:
            cpts = {c.variable: c for c in cpts}
        if set(cpts) != set(self._index):
            raise ValueError("need exactly one CPT per node")
        for name, cpt in cpts.items():
            if cpt.variable != name:
                raise ValueError(f"CPT under key {name!r} is for {cpt.variable!r}")
            if cpt.parent_order != dag.parent_tuple(name):
                raise ValueError(
                    f"CPT parent order for {name!r} does not match the DAG"
                )
            var = self._index[name]
            q = 1
            for p in cpt.parent_order:
                q *= self._index[p].r
            if cpt.table.shape != (q, var.r):
                raise ValueError(
                    f"CPT for {name!r} has shape {cpt.table.shape}, expected {(q, var.r)}"
                )
        self.cpts = cpts
        self.metadata = dict(metadata or {})

    def variable(self, name: str) -> CategoricalVariable:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def parent_cards(self, name: str) -> tuple:
        return tuple(self._index[p].r for p in self.dag.parent_tuple(name))

    def with_cpt(self, cpt: Cpt) -> "FittedNetwork":
        """A copy of this network with one CPT replaced (metadata preserved)."""
        cpts = dict(self.cpts)
        cpts[cpt.variable] = cpt
        return FittedNetwork(self.variables, self.dag, cpts, self.metadata)

    def __eq__(self, other):
        return (
            isinstance(other, FittedNetwork)
            and self.variables == other.variables
            and self.dag.nodes == other.dag.nodes
            and self.dag.parents == other.dag.parents
            and self.cpts == other.cpts
            and self.metadata == other.metadata
        )


def parameter_count(dag: Dag, variables) -> int:
    """Number of free parameters d = sum over nodes of q_i * (r_i - 1)."""
    cards = {v.name: v.r for v in variables}
    d = 0
    for node in dag.nodes:
        q = 1
        for p in dag.parent_tuple(node):
            q *= cards[p]
        d += q * (cards[node] - 1)
    return d


def joint_probability(net: FittedNetwork, assignment) -> float:
    """Probability of one complete assignment, read off the CPT product."""
    assignment = Evidence(assignment)
    extra = set(assignment.assignments) - {v.name for v in net.variables}
    if extra:
        raise UnknownVariable(sorted(extra)[0])
    missing = [v.name for v in net.variables if v.name not in assignment]
    if missing:
        raise IncompleteAssignment(missing)
    levels = {
        name: net.variable(name).level_index(lvl) for name, lvl in assignment.items()
    }
    p = 1.0
    for var in net.variables:
        cpt = net.cpts[var.name]
        cards = net.parent_cards(var.name)
        j = config_index(cards, [levels[pa] for pa in cpt.parent_order])
        p *= cpt.table[j, levels[var.name]]
    return p
