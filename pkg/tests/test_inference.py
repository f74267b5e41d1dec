"""Exact inference, parameter fitting, and sampling."""

import numpy as np
import pytest

import oracles
from netgen import random_evidence, random_net
from beliefnet.data import DataTable, counts
from beliefnet.errors import InvalidQuery, ZeroProbabilityEvidence
from beliefnet.inference import (
    Factor,
    conditional_table,
    fit_bayes,
    fit_mle,
    posterior,
    sample,
)
from beliefnet.model import CategoricalVariable, Cpt, Dag, FittedNetwork


def chain_ab(p_a=0.3, p_b_given=((0.9, 0.1), (0.2, 0.8))):
    variables = (
        CategoricalVariable("A", ("a0", "a1")),
        CategoricalVariable("B", ("b0", "b1")),
    )
    dag = Dag(("A", "B"), {"B": ("A",)})
    cpts = {
        "A": Cpt("A", (), [[1 - p_a, p_a]]),
        "B": Cpt("B", ("A",), p_b_given),
    }
    return FittedNetwork(variables, dag, cpts)


class TestFactor:
    def test_multiply_aligns_scopes(self):
        f = Factor(("A", "B"), (2, 3), np.arange(6).reshape(2, 3))
        g = Factor(("B", "C"), (3, 2), np.ones((3, 2)))
        prod = f.multiply(g)
        assert prod.scope == ("A", "B", "C")
        assert prod.values[1, 2, 0] == 5

    def test_sum_out(self):
        f = Factor(("A", "B"), (2, 2), np.array([[1.0, 2.0], [3.0, 4.0]]))
        out = f.sum_out("A")
        assert out.scope == ("B",)
        assert out.values.tolist() == [4.0, 6.0]

    def test_reduce(self):
        f = Factor(("A", "B"), (2, 2), np.array([[1.0, 2.0], [3.0, 4.0]]))
        out = f.reduce({"A": 1})
        assert out.scope == ("B",)
        assert out.values.tolist() == [3.0, 4.0]


class TestPosterior:
    def test_root_prior_returned(self):
        net = chain_ab()
        res = posterior(net, "A")
        assert np.allclose(res.distribution, [0.7, 0.3])
        assert res.evidence_probability == pytest.approx(1.0)

    def test_bayes_rule_by_hand(self):
        net = chain_ab()
        # P(A=a1 | B=b1) = 0.3*0.8 / (0.7*0.1 + 0.3*0.8)
        res = posterior(net, "A", {"B": "b1"})
        expected = 0.24 / 0.31
        assert res["a1"] == pytest.approx(expected, abs=1e-12)
        assert res.evidence_probability == pytest.approx(0.31, abs=1e-12)

    def test_target_in_evidence(self):
        net = chain_ab()
        with pytest.raises(InvalidQuery):
            posterior(net, "A", {"A": "a0"})

    def test_zero_probability_evidence(self):
        net = chain_ab(p_b_given=((1.0, 0.0), (1.0, 0.0)))
        with pytest.raises(ZeroProbabilityEvidence):
            posterior(net, "A", {"B": "b1"})

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(101)
        for _ in range(60):
            net = random_net(rng, int(rng.integers(3, 9)))
            target = net.variables[int(rng.integers(len(net.variables)))].name
            ev = random_evidence(rng, net, max_vars=3, exclude=(target,))
            got = posterior(net, target, ev)
            want_dist, want_pe = oracles.posterior(net, target, ev)
            assert np.abs(got.distribution - want_dist).max() < 1e-9
            assert got.evidence_probability == pytest.approx(want_pe, abs=1e-9)
            assert got.distribution.sum() == pytest.approx(1.0, abs=1e-9)

    def test_elimination_order_independence(self):
        rng = np.random.default_rng(103)
        import itertools

        net = random_net(rng, 5, p_arc=0.5)
        target = net.variables[0].name
        ev_var = net.variables[-1].name
        ev = {ev_var: net.variables[-1].levels[0]} if ev_var != target else {}
        base = posterior(net, target, ev)
        hidden = [
            v.name for v in net.variables if v.name != target and v.name not in ev
        ]
        for perm in itertools.islice(itertools.permutations(hidden), 12):
            res = posterior(net, target, ev, order=perm)
            assert np.abs(res.distribution - base.distribution).max() < 1e-12

    def test_order_must_cover_hidden(self):
        variables = (
            CategoricalVariable("A", ("a0", "a1")),
            CategoricalVariable("B", ("b0", "b1")),
            CategoricalVariable("C", ("c0", "c1")),
        )
        net = FittedNetwork(
            variables,
            Dag(("A", "B", "C"), {"B": ("A",), "C": ("B",)}),
            {
                "A": Cpt("A", (), [[0.5, 0.5]]),
                "B": Cpt("B", ("A",), [[0.9, 0.1], [0.2, 0.8]]),
                "C": Cpt("C", ("B",), [[0.7, 0.3], [0.4, 0.6]]),
            },
        )
        with pytest.raises(InvalidQuery):
            posterior(net, "C", order=("A",))  # misses hidden B

    def test_long_chain_tiny_evidence_probability(self):
        # 60-node binary chain with rare emissions observed at every other
        # node: P(evidence) ~ 1e-80. Checked against an independent log-space
        # forward recursion, so the per-elimination rescaling must carry the
        # magnitude exactly.
        n = 60
        p_stay, p_emit = 0.995, 0.005
        variables = tuple(
            CategoricalVariable(f"X{i}", ("n", "y")) for i in range(n)
        )
        parents = {f"X{i}": (f"X{i-1}",) for i in range(1, n)}
        cpts = {"X0": Cpt("X0", (), [[0.5, 0.5]])}
        for i in range(1, n):
            cpts[f"X{i}"] = Cpt(
                f"X{i}",
                (f"X{i-1}",),
                [[p_stay, 1 - p_stay], [1 - p_emit, p_emit]],
            )
        net = FittedNetwork(variables, Dag(tuple(v.name for v in variables), parents), cpts)
        evidence = {f"X{i}": "y" for i in range(1, n, 2)}

        # independent oracle: forward pass over log P(X_i, evidence so far)
        log_alpha = np.log([0.5, 0.5])
        trans = np.array([[p_stay, 1 - p_stay], [1 - p_emit, p_emit]])
        for i in range(1, n):
            log_col = np.logaddexp(
                log_alpha[0] + np.log(trans[0]), log_alpha[1] + np.log(trans[1])
            )
            if f"X{i}" in evidence:
                log_col[0] = -np.inf
            log_alpha = log_col
        want_log_pe = float(np.logaddexp(log_alpha[0], log_alpha[1]))

        res = posterior(net, "X0", evidence)
        assert want_log_pe < -120  # many orders below any single CPT entry
        assert np.log(res.evidence_probability) == pytest.approx(want_log_pe, abs=1e-9)
        assert res.distribution.sum() == pytest.approx(1.0, abs=1e-12)

    def test_chain_rule_evidence_probability(self):
        rng = np.random.default_rng(107)
        for _ in range(10):
            net = random_net(rng, 5)
            ev = random_evidence(rng, net, max_vars=2)
            target = next(
                v.name for v in net.variables if v.name not in ev
            )
            got = posterior(net, target, ev)
            joint = oracles.full_joint(net)
            index = [slice(None)] * joint.ndim
            for name, level in ev.items():
                pos = [v.name for v in net.variables].index(name)
                index[pos] = net.variable(name).level_index(level)
            assert got.evidence_probability == pytest.approx(
                float(joint[tuple(index)].sum()), abs=1e-9
            )


class TestConditionalTable:
    def test_baseline_first_then_levels(self):
        net = chain_ab()
        rows = conditional_table(net, "B", "A")
        assert len(rows) == 3
        assert len(rows[0].evidence) == 0
        assert rows[1].evidence["A"] == "a0"
        assert rows[2].evidence["A"] == "a1"

    def test_sweep_independent_of_target(self):
        variables = (
            CategoricalVariable("A", ("a0", "a1")),
            CategoricalVariable("B", ("b0", "b1")),
        )
        net = FittedNetwork(
            variables,
            Dag(("A", "B")),
            {"A": Cpt("A", (), [[0.6, 0.4]]), "B": Cpt("B", (), [[0.3, 0.7]])},
        )
        rows = conditional_table(net, "B", "A")
        for row in rows[1:]:
            assert np.abs(row.distribution - rows[0].distribution).max() < 1e-9

    def test_same_variable_rejected(self):
        net = chain_ab()
        with pytest.raises(InvalidQuery):
            conditional_table(net, "A", "A")

    def test_matches_oracle(self):
        rng = np.random.default_rng(109)
        net = random_net(rng, 4)
        target, sweep = net.variables[0].name, net.variables[-1].name
        rows = conditional_table(net, target, sweep)
        base, _ = oracles.posterior(net, target)
        assert np.abs(rows[0].distribution - base).max() < 1e-9
        for row, level in zip(rows[1:], net.variables[-1].levels):
            want, _ = oracles.posterior(net, target, {sweep: level})
            assert np.abs(row.distribution - want).max() < 1e-9


class TestFitBayes:
    def test_prior_only_row(self):
        data = DataTable(
            (
                CategoricalVariable("A", ("a0", "a1")),
                CategoricalVariable("B", ("b0", "b1")),
            ),
            np.array([[0, 0], [0, 1]], dtype=np.int32),
        )
        net = fit_bayes(Dag(("A", "B"), {"B": ("A",)}), data, alpha=1)
        # parent config A=a1 never observed: row is the flat prior
        assert np.allclose(net.cpts["B"].table[1], [0.5, 0.5])

    def test_closed_form_example(self):
        # N_ijk = 3, N_ij = 9, r = 4, alpha = 1 -> 4/13
        v = CategoricalVariable("X", ("a", "b", "c", "d"))
        codes = np.array([0] * 3 + [1] * 2 + [2] * 2 + [3] * 2, dtype=np.int32)
        data = DataTable((v,), codes[:, None])
        net = fit_bayes(Dag(("X",)), data, alpha=1)
        assert net.cpts["X"].table[0, 0] == pytest.approx(4 / 13, abs=1e-15)

    def test_matches_closed_form_on_random_tables(self):
        rng = np.random.default_rng(211)
        for _ in range(50):
            n_levels = int(rng.integers(2, 5))
            p_levels = int(rng.integers(2, 4))
            x = CategoricalVariable("X", tuple(f"x{k}" for k in range(n_levels)))
            p = CategoricalVariable("P", tuple(f"p{k}" for k in range(p_levels)))
            n = int(rng.integers(1, 200))
            codes = np.stack(
                [rng.integers(0, n_levels, n), rng.integers(0, p_levels, n)], axis=1
            ).astype(np.int32)
            data = DataTable((x, p), codes)
            alpha = float(rng.uniform(0.2, 3.0))
            net = fit_bayes(Dag(("X", "P"), {"X": ("P",)}), data, alpha=alpha)
            ct = counts(data, "X", ["P"])
            expected = (ct.counts + alpha) / (
                ct.n_ij[:, None] + n_levels * alpha
            )
            assert np.abs(net.cpts["X"].table - expected).max() <= 1e-15

    def test_strictly_positive(self):
        rng = np.random.default_rng(223)
        codes = rng.integers(0, 2, size=(30, 2)).astype(np.int32)
        data = DataTable(
            (
                CategoricalVariable("A", ("a0", "a1")),
                CategoricalVariable("B", ("b0", "b1")),
            ),
            codes,
        )
        net = fit_bayes(Dag(("A", "B"), {"B": ("A",)}), data)
        for cpt in net.cpts.values():
            assert np.all(cpt.table > 0)
            assert np.all(cpt.table < 1)

    def test_requires_complete_cases(self):
        v = CategoricalVariable("A", ("a", "b"))
        data = DataTable((v,), np.array([[0], [-1]], dtype=np.int32))
        with pytest.raises(ValueError):
            fit_bayes(Dag(("A",)), data)

    def test_alpha_must_be_positive(self):
        v = CategoricalVariable("A", ("a", "b"))
        data = DataTable((v,), np.array([[0]], dtype=np.int32))
        with pytest.raises(ValueError):
            fit_bayes(Dag(("A",)), data, alpha=0)


class TestFitMle:
    def test_simple_ratio(self):
        v = CategoricalVariable("X", ("a", "b"))
        data = DataTable((v,), np.array([[0]] * 3 + [[1]], dtype=np.int32))
        net = fit_mle(Dag(("X",)), data)
        assert np.allclose(net.cpts["X"].table, [[0.75, 0.25]])

    def test_unseen_row_uniform_with_warning(self):
        data = DataTable(
            (
                CategoricalVariable("A", ("a0", "a1")),
                CategoricalVariable("B", ("b0", "b1")),
            ),
            np.array([[0, 0], [0, 1]], dtype=np.int32),
        )
        with pytest.warns(UserWarning):
            net = fit_mle(Dag(("A", "B"), {"B": ("A",)}), data)
        assert np.allclose(net.cpts["B"].table[1], [0.5, 0.5])

    def test_alpha_to_zero_limit_matches(self):
        rng = np.random.default_rng(227)
        codes = rng.integers(0, 2, size=(200, 2)).astype(np.int32)
        data = DataTable(
            (
                CategoricalVariable("A", ("a0", "a1")),
                CategoricalVariable("B", ("b0", "b1")),
            ),
            codes,
        )
        dag = Dag(("A", "B"), {"B": ("A",)})
        near_zero = fit_bayes(dag, data, alpha=1e-9)
        mle = fit_mle(dag, data)
        for name in ("A", "B"):
            assert np.abs(
                near_zero.cpts[name].table - mle.cpts[name].table
            ).max() < 1e-9


class TestSample:
    def test_zero_rows(self):
        net = chain_ab()
        t = sample(net, 0, seed=1)
        assert t.n_rows == 0

    def test_deterministic_cpts_identical_rows(self):
        net = chain_ab(p_a=0.0, p_b_given=((1.0, 0.0), (0.0, 1.0)))
        t = sample(net, 50, seed=2)
        assert np.all(t.codes == 0)

    def test_seed_determinism(self):
        net = chain_ab()
        assert sample(net, 100, seed=3) == sample(net, 100, seed=3)
        assert sample(net, 100, seed=3) != sample(net, 100, seed=4)

    def test_marginals_converge(self):
        rng = np.random.default_rng(233)
        net = random_net(rng, 3)
        t = sample(net, 100_000, seed=5)
        for v in net.variables:
            want = posterior(net, v.name).distribution
            got = np.bincount(t.column(v.name), minlength=v.r) / t.n_rows
            assert np.abs(got - want).max() < 0.01
