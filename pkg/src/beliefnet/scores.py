"""Decomposable network scores over complete-case categorical data.

The log-likelihood of a graph decomposes into per-node terms
sum_j sum_k N_ijk * log(N_ijk / N_ij), with 0*log(0) = 0 and empty parent
configurations (N_ij = 0) contributing nothing. Scores penalize that fit by
the number of free parameters: AIC subtracts d, BIC subtracts (d/2)*log(N).
Changing one node's parents changes only that node's local term.
"""

from __future__ import annotations

import math

from scipy.special import xlogy

from .data import CountTable, DataTable, counts

SCORE_KINDS = ("AIC", "BIC", "LOGLIK")


def local_loglik(count_table: CountTable) -> float:
    """Maximized multinomial log-likelihood contribution of one family."""
    n = count_table.counts
    n_ij = count_table.n_ij
    return float(xlogy(n, n).sum() - xlogy(n_ij, n_ij).sum())


class ScoreCache:
    """Memo of local scores keyed by (variable, frozenset(parents)).

    Values are plain function results, so a cached score equals an uncached
    recomputation bit for bit.
    """

    __slots__ = ("store", "hits", "misses")

    def __init__(self):
        self.store = {}
        self.hits = 0
        self.misses = 0


class DecomposableScore:
    """Local-score evaluator bound to one data table and score kind."""

    def __init__(self, data: DataTable, kind: str = "AIC", cache: ScoreCache | None = None):
        kind = kind.upper()
        if kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {kind!r}")
        if data.missing_mask().any():
            raise ValueError("scores require complete-case data")
        self.data = data
        self.kind = kind
        self.cache = cache
        self._log_n = math.log(data.n_rows) if data.n_rows else 0.0
        self._col = {v.name: i for i, v in enumerate(data.variables)}
        self._r = {v.name: v.r for v in data.variables}

    def local(self, variable: str, parents) -> float:
        """Penalized local score of one family.

        Parents are canonicalized to data column order before counting, so the
        value does not depend on the order the caller lists them in.
        """
        parents = tuple(sorted(parents, key=self._col.__getitem__))
        key = (variable, frozenset(parents))
        if self.cache is not None:
            cached = self.cache.store.get(key)
            if cached is not None:
                self.cache.hits += 1
                return cached
            self.cache.misses += 1
        value = local_loglik(counts(self.data, variable, parents))
        if self.kind != "LOGLIK":
            q = 1
            for p in parents:
                q *= self._r[p]
            d = q * (self._r[variable] - 1)
            value -= d if self.kind == "AIC" else 0.5 * d * self._log_n
        if self.cache is not None:
            self.cache.store[key] = value
        return value

    def total(self, parents_map) -> float:
        return sum(self.local(v.name, parents_map.get(v.name, ())) for v in self.data.variables)


def local_score(data: DataTable, variable: str, parents=(), kind: str = "AIC",
                cache: ScoreCache | None = None) -> float:
    return DecomposableScore(data, kind, cache).local(variable, parents)


def score(dag, data: DataTable, kind: str = "AIC", cache: ScoreCache | None = None) -> float:
    """Network score: sum of penalized local terms over the DAG's families."""
    evaluator = DecomposableScore(data, kind, cache)
    return sum(evaluator.local(node, dag.parent_tuple(node)) for node in dag.nodes)
