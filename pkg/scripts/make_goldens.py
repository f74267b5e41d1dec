#!/usr/bin/env python3
"""Regenerate the golden model files in fixtures/ (deterministic)."""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from beliefnet.model import CategoricalVariable, Cpt, Dag, FittedNetwork
from beliefnet.modelio import save

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def mini_net():
    """Textbook sprinkler net: small, hand-set, easy to eyeball in the file."""
    variables = (
        CategoricalVariable("Rain", ("no", "yes")),
        CategoricalVariable("Sprinkler", ("off", "on")),
        CategoricalVariable("WetGrass", ("dry", "wet")),
    )
    dag = Dag(
        ("Rain", "Sprinkler", "WetGrass"),
        {"Sprinkler": ("Rain",), "WetGrass": ("Rain", "Sprinkler")},
    )
    cpts = {
        "Rain": Cpt("Rain", (), [[0.8, 0.2]]),
        "Sprinkler": Cpt("Sprinkler", ("Rain",), [[0.6, 0.4], [0.99, 0.01]]),
        "WetGrass": Cpt(
            "WetGrass",
            ("Rain", "Sprinkler"),
            [[1.0, 0.0], [0.1, 0.9], [0.2, 0.8], [0.01, 0.99]],
        ),
    }
    return FittedNetwork(
        variables, dag, cpts, metadata={"score": "hand-built", "seed": "0"}
    )


def chain6_net():
    """Six-node chain with strong links; the structure-recovery generator.

    Four-level nodes keep the AIC penalty for a spurious extra parent high
    (36 free parameters), so recovery is stable at the 20k-row test scale.
    """
    cards = [4, 4, 4, 4, 4, 4]
    names = [f"N{i}" for i in range(6)]
    variables = tuple(
        CategoricalVariable(n, tuple(f"s{k}" for k in range(c)))
        for n, c in zip(names, cards)
    )
    dag = Dag(tuple(names), {names[i]: (names[i - 1],) for i in range(1, 6)})
    rng = np.random.default_rng(606)
    cpts = {names[0]: Cpt(names[0], (), [[0.4, 0.3, 0.2, 0.1]])}
    for i in range(1, 6):
        q, r = cards[i - 1], cards[i]
        rows = np.full((q, r), 0.2 / (r - 1))
        for j in range(q):
            rows[j, j % r] = 0.8
        # nudge rows apart so no two parent levels are interchangeable
        rows = rows + rng.dirichlet([1] * r, size=q) * 0.08
        rows = rows / rows.sum(axis=1, keepdims=True)
        cpts[names[i]] = Cpt(names[i], (names[i - 1],), rows)
    return FittedNetwork(
        variables, dag, cpts, metadata={"score": "hand-built", "seed": "606"}
    )


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    save(mini_net(), os.path.join(FIXTURES, "mini.bn.yaml"))
    save(chain6_net(), os.path.join(FIXTURES, "chain6.bn.yaml"))
    print("wrote fixtures/mini.bn.yaml and fixtures/chain6.bn.yaml")


if __name__ == "__main__":
    main()
