"""Structure learning: tabu search, bootstrap arc strengths, consensus network.

The search walks the space of DAGs with add/delete/reverse moves under a
decomposable score, keeping a tabu list of the inverses of recent moves so it
can cross score plateaus and shallow optima. Robustness comes from a
nonparametric bootstrap: each replicate resamples the rows with replacement,
learns a DAG, and the per-edge inclusion frequencies ("strengths") are
averaged into a consensus network at a threshold estimated from the strength
distribution itself.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass

import numpy as np

from .data import DataTable
from .errors import (
    BootstrapError,
    EmptyStrengths,
    UnassignedVariable,
    UnknownVariable,
    UnsatisfiableConstraints,
)
from .model import Dag, TierSpec
from .scores import DecomposableScore, ScoreCache

# score deltas below this are treated as ties, not improvements
SCORE_EPS = 1e-9


@dataclass(frozen=True)
class Move:
    ADD = "add"
    DELETE = "delete"
    REVERSE = "reverse"

    kind: str
    arc: tuple

    def inverse(self) -> "Move":
        if self.kind == Move.ADD:
            return Move(Move.DELETE, self.arc)
        if self.kind == Move.DELETE:
            return Move(Move.ADD, self.arc)
        return Move(Move.REVERSE, (self.arc[1], self.arc[0]))


@dataclass(frozen=True)
class TabuConfig:
    tenure: int = 10
    max_iterations: int = 1000
    stall_limit: int = 100
    restarts: int = 1
    seed: int = 1

    def __post_init__(self):
        for name in ("tenure", "max_iterations", "stall_limit", "restarts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class TabuLog:
    """Filled in by tabu_search when passed as ``log=``."""

    def __init__(self):
        self.best_scores = []  # best-seen score after each accepted move
        self.iterations = 0
        self.restarts = 0
        self.cache_hits = 0
        self.cache_misses = 0


class Constraints:
    """Forbidden and required directed arcs.

    The two sets must be disjoint and the required arcs acyclic; both are
    verified at construction.
    """

    __slots__ = ("forbidden", "required")

    def __init__(self, forbidden=(), required=()):
        self.forbidden = frozenset((str(a), str(b)) for a, b in forbidden)
        self.required = frozenset((str(a), str(b)) for a, b in required)
        clash = self.forbidden & self.required
        if clash:
            raise UnsatisfiableConstraints(
                f"arcs both required and forbidden: {sorted(clash)}"
            )
        if any(a == b for a, b in self.forbidden | self.required):
            raise ValueError("self-loop in constraints")
        _check_acyclic_arcs(self.required)

    def merge(self, other: "Constraints") -> "Constraints":
        return Constraints(
            self.forbidden | other.forbidden, self.required | other.required
        )

    def __eq__(self, other):
        return (
            isinstance(other, Constraints)
            and self.forbidden == other.forbidden
            and self.required == other.required
        )


def _check_acyclic_arcs(arcs):
    children = {}
    for a, b in arcs:
        children.setdefault(a, []).append(b)
    nodes = sorted({n for arc in arcs for n in arc})
    try:
        Dag(nodes, {n: [a for a, b in arcs if b == n] for n in nodes})
    except Exception as exc:
        raise UnsatisfiableConstraints(f"required arcs contain a cycle: {exc}") from exc
    return children


def tiers_to_blacklist(tiers: TierSpec, variables) -> Constraints:
    """Forbid arcs from later tiers into earlier tiers.

    Tiers with within_tier_edges=False additionally forbid arcs among their
    own members. Every variable must belong to exactly one tier.
    """
    variables = list(variables)
    members = tiers.members()
    for v in variables:
        if v not in members:
            raise UnassignedVariable(v)
    known = set(variables)
    for v in members:
        if v not in known:
            raise UnknownVariable(v)
    forbidden = set()
    for i, tier in enumerate(tiers.tiers):
        for earlier in tiers.tiers[:i]:
            forbidden.update((a, b) for a in tier for b in earlier)
        if not tiers.within_tier_edges[i]:
            forbidden.update((a, b) for a in tier for b in tier if a != b)
    return Constraints(forbidden=forbidden)


class _SearchState:
    """Mutable DAG state with fast ancestry queries for move legality."""

    def __init__(self, nodes, required_arcs=()):
        self.nodes = list(nodes)
        self.parents = {n: set() for n in self.nodes}
        self.children = {n: set() for n in self.nodes}
        for a, b in required_arcs:
            self.parents[b].add(a)
            self.children[a].add(b)

    def has_arc(self, a, b):
        return a in self.parents[b]

    def reaches(self, start, goal, skip_arc=None):
        """True when a directed path start -> ... -> goal exists."""
        if start == goal:
            return True
        stack = [start]
        seen = {start}
        while stack:
            cur = stack.pop()
            for nxt in self.children[cur]:
                if skip_arc is not None and (cur, nxt) == skip_arc:
                    continue
                if nxt == goal:
                    return True
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return False

    def apply(self, move: Move):
        a, b = move.arc
        if move.kind == Move.ADD:
            self.parents[b].add(a)
            self.children[a].add(b)
        elif move.kind == Move.DELETE:
            self.parents[b].discard(a)
            self.children[a].discard(b)
        else:
            self.parents[b].discard(a)
            self.children[a].discard(b)
            self.parents[a].add(b)
            self.children[b].add(a)

    def snapshot(self):
        return {n: frozenset(ps) for n, ps in self.parents.items()}

    def restore(self, snap):
        self.parents = {n: set(ps) for n, ps in snap.items()}
        self.children = {n: set() for n in self.nodes}
        for n, ps in self.parents.items():
            for p in ps:
                self.children[p].add(n)


def tabu_search(
    data: DataTable,
    score: str = "AIC",
    constraints: Constraints | None = None,
    config: TabuConfig | None = None,
    log: TabuLog | None = None,
) -> Dag:
    """Learn a DAG by tabu search over add/delete/reverse moves.

    Returns the best-seen DAG, which is also locally optimal: after the tabu
    phase a plain greedy pass runs from the best snapshot until no legal
    single move improves the score. Deterministic given the config seed; with
    restarts > 1 the extra starts perturb the incumbent with seeded random
    moves.
    """
    config = config or TabuConfig()
    constraints = constraints or Constraints()
    nodes = [v.name for v in data.variables]
    node_set = set(nodes)
    for a, b in constraints.forbidden | constraints.required:
        if a not in node_set or b not in node_set:
            raise UnknownVariable(a if a not in node_set else b)
    for a, b in constraints.required:
        if (a, b) in constraints.forbidden:  # unreachable; Constraints checks
            raise UnsatisfiableConstraints(f"required arc {a}->{b} is forbidden")

    scorer = DecomposableScore(data, score, cache=ScoreCache())
    state = _SearchState(nodes, constraints.required)
    local = {n: scorer.local(n, state.parents[n]) for n in nodes}
    total = sum(local.values())

    best_snap = state.snapshot()
    best_total = total
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))

    for restart in range(config.restarts):
        if restart > 0:
            state.restore(best_snap)
            _perturb(state, constraints, rng, len(nodes))
            local = {n: scorer.local(n, state.parents[n]) for n in nodes}
            total = sum(local.values())
        total, snap, s_total = _tabu_phase(
            state, scorer, constraints, config, local, total, best_total, log
        )
        if s_total > best_total + SCORE_EPS:
            best_total, best_snap = s_total, snap
        if log is not None:
            log.restarts += 1

    # greedy polish: guarantee no legal single move improves the best DAG
    state.restore(best_snap)
    local = {n: scorer.local(n, state.parents[n]) for n in nodes}
    total = sum(local.values())
    while True:
        move, delta = _best_move(state, scorer, constraints, tabu=None, it=0,
                                 aspiration=None)
        if move is None or delta <= SCORE_EPS:
            break
        _apply_scored(state, move, scorer, local)
        total += delta
        if log is not None:
            log.best_scores.append(total)
    best_snap = state.snapshot()

    if log is not None and scorer.cache is not None:
        log.cache_hits = scorer.cache.hits
        log.cache_misses = scorer.cache.misses

    col = {n: i for i, n in enumerate(nodes)}
    parents = {
        n: tuple(sorted(best_snap[n], key=col.__getitem__)) for n in nodes
    }
    return Dag(tuple(nodes), parents)


def _tabu_phase(state, scorer, constraints, config, local, total, global_best, log):
    tabu = {}
    best_total = total
    best_snap = state.snapshot()
    stall = 0
    for it in range(config.max_iterations):
        move, delta = _best_move(
            state, scorer, constraints, tabu, it, aspiration=best_total
        )
        if move is None:
            break
        _apply_scored(state, move, scorer, local)
        total += delta
        tabu[move.inverse()] = it + config.tenure
        if total > best_total + SCORE_EPS:
            best_total = total
            best_snap = state.snapshot()
            stall = 0
        else:
            stall += 1
        if log is not None:
            log.iterations += 1
            log.best_scores.append(best_total)
        if stall > config.stall_limit:
            break
    return total, best_snap, best_total


def _apply_scored(state, move, scorer, local):
    state.apply(move)
    a, b = move.arc
    local[b] = scorer.local(b, state.parents[b])
    if move.kind == Move.REVERSE:
        local[a] = scorer.local(a, state.parents[a])


def _best_move(state, scorer, constraints, tabu, it, aspiration):
    """Highest-delta legal move; ties go to the first in enumeration order.

    With ``tabu`` set, tabu moves are skipped unless they would beat the
    best-seen score (aspiration). With ``tabu=None`` only improving moves
    matter (greedy polish); the caller filters on delta.
    """
    best = None
    best_delta = -math.inf
    nodes = state.nodes
    cur_local = {n: scorer.local(n, state.parents[n]) for n in nodes}
    total = sum(cur_local.values())
    for a in nodes:
        for b in nodes:
            if a == b:
                continue
            has = state.has_arc(a, b)
            candidates = []
            if not has:
                if (a, b) not in constraints.forbidden and not state.reaches(b, a):
                    delta = (
                        scorer.local(b, state.parents[b] | {a}) - cur_local[b]
                    )
                    candidates.append((Move(Move.ADD, (a, b)), delta))
            else:
                if (a, b) not in constraints.required:
                    delta = (
                        scorer.local(b, state.parents[b] - {a}) - cur_local[b]
                    )
                    candidates.append((Move(Move.DELETE, (a, b)), delta))
                    if (b, a) not in constraints.forbidden and not state.reaches(
                        a, b, skip_arc=(a, b)
                    ):
                        d = (
                            scorer.local(b, state.parents[b] - {a})
                            - cur_local[b]
                            + scorer.local(a, state.parents[a] | {b})
                            - cur_local[a]
                        )
                        candidates.append((Move(Move.REVERSE, (a, b)), d))
            for move, delta in candidates:
                if tabu is not None and tabu.get(move, -1) > it:
                    if aspiration is None or total + delta <= aspiration + SCORE_EPS:
                        continue
                if delta > best_delta + SCORE_EPS:
                    best, best_delta = move, delta
    return best, best_delta


def _perturb(state, constraints, rng, n_moves):
    """Random legal add/delete moves used to diversify restarts."""
    nodes = state.nodes
    for _ in range(n_moves):
        a, b = (nodes[i] for i in rng.integers(0, len(nodes), 2))
        if a == b:
            continue
        if state.has_arc(a, b):
            if (a, b) not in constraints.required:
                state.apply(Move(Move.DELETE, (a, b)))
        elif (a, b) not in constraints.forbidden and not state.reaches(b, a):
            state.apply(Move(Move.ADD, (a, b)))


class ArcStrengthTable:
    """Bootstrap edge frequencies and direction probabilities.

    strength(a, b): fraction of replicate DAGs containing a-b in either
    direction (symmetric). direction(a, b): among those, the fraction
    oriented a->b, so direction(a, b) + direction(b, a) = 1 whenever the
    strength is positive. arc_frequency(a, b): fraction of all replicates
    containing the directed arc a->b.
    """

    __slots__ = ("variables", "b", "dir_counts")

    def __init__(self, variables, b, dir_counts):
        self.variables = tuple(variables)
        self.b = int(b)
        if self.b < 1:
            raise ValueError("need at least one replicate")
        self.dir_counts = {k: int(v) for k, v in dir_counts.items() if v}
        known = set(self.variables)
        for a, c in self.dir_counts:
            if a not in known or c not in known:
                raise UnknownVariable(a if a not in known else c)

    def _pair_count(self, a, b):
        return self.dir_counts.get((a, b), 0) + self.dir_counts.get((b, a), 0)

    def strength(self, a, b) -> float:
        return self._pair_count(a, b) / self.b

    def direction(self, a, b) -> float:
        pair = self._pair_count(a, b)
        if pair == 0:
            return 0.0
        return self.dir_counts.get((a, b), 0) / pair

    def arc_frequency(self, a, b) -> float:
        return self.dir_counts.get((a, b), 0) / self.b

    def pairs(self):
        """Unordered pairs with positive strength, lexicographically sorted."""
        seen = {tuple(sorted(k)) for k in self.dir_counts}
        return sorted(seen)

    def all_pair_strengths(self):
        """Strengths of every unordered variable pair, zeros included."""
        names = self.variables
        return [
            self.strength(names[i], names[j])
            for i in range(len(names))
            for j in range(i + 1, len(names))
        ]


_BOOT = {}


def _boot_init(codes, variables, source, score, constraints, config):
    _BOOT["data"] = DataTable(variables, codes, source)
    _BOOT["score"] = score
    _BOOT["constraints"] = constraints
    _BOOT["config"] = config


def _boot_one(args):
    replicate, seed = args
    data = _BOOT["data"]
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))
    idx = rng.integers(0, data.n_rows, data.n_rows)
    dag = tabu_search(
        data.take(idx),
        score=_BOOT["score"],
        constraints=_BOOT["constraints"],
        config=_BOOT["config"],
    )
    return replicate, tuple(dag.arcs())


def bootstrap_strengths(
    data: DataTable,
    b: int = 2000,
    score: str = "AIC",
    constraints: Constraints | None = None,
    config: TabuConfig | None = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> ArcStrengthTable:
    """Nonparametric bootstrap of the structure search.

    Each replicate resamples n_rows rows with replacement using a sub-seed
    derived from (seed, replicate index), learns a DAG, and the arc tallies
    are merged. Replicates are independent, so the result is identical for
    any n_jobs and any execution order.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    constraints = constraints or Constraints()
    config = config or TabuConfig()
    tally = {}
    jobs = [(rep, seed) for rep in range(b)]
    if n_jobs == 1:
        _boot_init(data.codes, data.variables, data.source, score, constraints, config)
        results = map(_boot_one, jobs)
        for rep, arcs in _collect(results):
            for arc in arcs:
                tally[arc] = tally.get(arc, 0) + 1
    else:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=n_jobs,
            initializer=_boot_init,
            initargs=(data.codes, data.variables, data.source, score, constraints, config),
        ) as pool:
            chunk = max(1, b // (4 * n_jobs))
            for rep, arcs in _collect(pool.map(_boot_one, jobs, chunksize=chunk)):
                for arc in arcs:
                    tally[arc] = tally.get(arc, 0) + 1
    return ArcStrengthTable([v.name for v in data.variables], b, tally)


def _collect(results):
    it = iter(results)
    rep = -1
    while True:
        try:
            rep, arcs = next(it)
        except StopIteration:
            return
        except Exception as exc:  # noqa: BLE001 - annotate with replicate index
            raise BootstrapError(rep + 1, exc) from exc
        yield rep, arcs


def l1_threshold(strengths) -> float:
    """Significance threshold minimizing the L1 gap to an ideal 0/1 strength law.

    For a candidate t, arcs with strength >= t are declared significant; the
    ideal distribution then puts mass pi(t) at 1 and the rest at 0. The
    returned t minimizes the L1 distance between the empirical strength CDF
    and that two-point CDF, evaluated at midpoints between consecutive
    distinct strengths; ties break toward the smaller t (inclusive).
    """
    values = sorted(float(s) for s in strengths)
    m = len(values)
    if m == 0 or values[-1] <= 0.0:
        raise EmptyStrengths()
    distinct = sorted(set(values))
    candidates = []
    positive = [v for v in distinct if v > 0.0]
    for v in positive:
        below = [w for w in distinct if w < v]
        prev = below[-1] if below else 0.0
        candidates.append((prev + v) / 2.0)
    if distinct[-1] < 1.0:
        candidates.append((distinct[-1] + 1.0) / 2.0)

    # segment decomposition of the empirical CDF on [0, 1]
    cuts = [0.0] + [v for v in distinct if 0.0 < v < 1.0] + [1.0]
    heights = []
    for left in cuts[:-1]:
        heights.append(sum(1 for v in values if v <= left) / m)

    best_t, best_obj = None, math.inf
    for t in candidates:
        pi = sum(1 for v in values if v >= t) / m
        c = 1.0 - pi
        obj = sum(
            abs(h - c) * (right - left)
            for left, right, h in zip(cuts[:-1], cuts[1:], heights)
        )
        if obj < best_obj - 1e-12 or (abs(obj - best_obj) <= 1e-12 and t < best_t):
            best_t, best_obj = t, obj
    return best_t


def optimal_threshold(strengths: ArcStrengthTable) -> float:
    """L1-optimal inclusion threshold over all pair strengths (zeros included)."""
    return l1_threshold(strengths.all_pair_strengths())


def averaged_network(
    strengths: ArcStrengthTable,
    threshold: float,
    variables=None,
    constraints: Constraints | None = None,
    skipped: list | None = None,
) -> Dag:
    """Consensus DAG: edges with strength >= threshold, majority orientation.

    Edges are inserted in decreasing strength order (ties lexicographic);
    an insertion that would create a cycle or hit a forbidden arc is skipped
    and recorded in ``skipped`` as (from, to, strength, reason). The result
    is always acyclic and constraint-valid.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    constraints = constraints or Constraints()
    variables = tuple(variables if variables is not None else strengths.variables)
    order = {n: i for i, n in enumerate(variables)}

    edges = []
    for a, b in strengths.pairs():
        s = strengths.strength(a, b)
        if s >= threshold:
            edges.append((s, a, b))
    edges.sort(key=lambda e: (-e[0], e[1], e[2]))

    state = _SearchState(list(variables))
    for s, a, b in edges:
        d_ab = strengths.direction(a, b)
        if d_ab > 0.5 or (d_ab == 0.5 and a < b):
            frm, to = a, b
        else:
            frm, to = b, a
        if (frm, to) in constraints.forbidden:
            if skipped is not None:
                skipped.append((frm, to, s, "forbidden"))
            continue
        if state.reaches(to, frm):
            if skipped is not None:
                skipped.append((frm, to, s, "cycle"))
            continue
        state.apply(Move(Move.ADD, (frm, to)))
    parents = {
        n: tuple(sorted(state.parents[n], key=order.__getitem__)) for n in variables
    }
    return Dag(variables, parents)
