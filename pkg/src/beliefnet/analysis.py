"""Variable-influence analysis on a fitted network.

Three instruments:

* First-order Sobol decomposition: the share of a target's variance explained
  by one input, S = Var_X(E[Y|X]) / Var(Y). Categorical targets are encoded
  per state as indicators Y_k = 1[Y = k]; the aggregate index is the
  variance-weighted combination sum_k Var_X(E[Y_k|X]) / sum_k Var(Y_k).
  Expectations condition observationally (evidence propagation), so the index
  captures both direct and mediated influence.
* Scenario reasoning: posteriors of target variables under named
  multi-variable evidence profiles.
* One-way CPT sensitivity under proportional co-variation: perturbing one
  CPT entry theta scales the rest of its row by (1 - theta') / (1 - theta).
  For an evidence-free target event, P(event) is linear in theta, so the
  derivative is exact from two evaluations; tornado bars record the P-shift
  at theta +/- delta for every parameter of a node set.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTarget,
    InvalidQuery,
    SaturatedParameter,
    ZeroProbabilityEvidence,
)
from .model import Cpt, Evidence, FittedNetwork, config_levels, d_separated
from .inference import posterior


@dataclass(frozen=True)
class SobolResult:
    target: str
    input: str
    target_levels: tuple
    per_state: np.ndarray  # S_i^(k), one per target state
    aggregate: float


def _marginal(net, name):
    return posterior(net, name).distribution


def sobol_first_order(net: FittedNetwork, target: str, input_var: str) -> SobolResult:
    """First-order Sobol index of ``input_var`` on ``target``.

    Target states with zero marginal variance contribute to neither the
    numerator nor the denominator; input levels with zero marginal
    probability carry no weight. Inputs d-separated from the target given
    nothing yield exactly zero.
    """
    if target == input_var:
        raise InvalidQuery("input must differ from the target")
    t_var = net.variable(target)
    net.variable(input_var)

    p = _marginal(net, target)
    var_k = p * (1.0 - p)
    if not np.any(var_k > 0.0):
        raise DegenerateTarget(target)

    if d_separated(net.dag, input_var, target, ()):
        zeros = np.zeros(t_var.r)
        return SobolResult(target, input_var, t_var.levels, zeros, 0.0)

    x_var = net.variable(input_var)
    weights = _marginal(net, input_var)
    expectations = np.zeros((x_var.r, t_var.r))
    for i, level in enumerate(x_var.levels):
        if weights[i] > 0.0:
            expectations[i] = posterior(net, target, {input_var: level}).distribution

    mean_k = weights @ expectations
    cond_var_k = weights @ (expectations - mean_k) ** 2

    per_state = np.where(var_k > 0.0, cond_var_k / np.where(var_k > 0.0, var_k, 1.0), 0.0)
    active = var_k > 0.0
    aggregate = float(cond_var_k[active].sum() / var_k[active].sum())
    return SobolResult(target, input_var, t_var.levels, per_state, aggregate)


@dataclass(frozen=True)
class SobolMatrix:
    """Aggregate indices in percent; None marks an input excluded as the target."""

    inputs: tuple
    targets: tuple
    cells: dict

    def value(self, input_var, target):
        return self.cells[(input_var, target)]


_MATRIX_NET = {}


def _matrix_init(net):
    _MATRIX_NET["net"] = net


def _matrix_cell(pair):
    input_var, target = pair
    net = _MATRIX_NET["net"]
    return pair, sobol_first_order(net, target, input_var).aggregate * 100.0


def sobol_matrix(net: FittedNetwork, targets, inputs, n_jobs: int = 1) -> SobolMatrix:
    """Aggregate Sobol indices for every input/target pair, in percent.

    Inputs are sorted by the first target's column, descending, with each
    target excluded from its own inputs (None cell). Cells fan out to worker
    processes when n_jobs > 1; the merge is by cell index, so the result does
    not depend on scheduling.
    """
    targets = tuple(targets)
    inputs = tuple(inputs)
    for name in targets + inputs:
        net.variable(name)
    jobs = [(i, t) for i in inputs for t in targets if i != t]
    cells = {(i, t): None for i in inputs for t in targets}
    if n_jobs == 1:
        _matrix_init(net)
        results = map(_matrix_cell, jobs)
        for pair, value in results:
            cells[pair] = value
    else:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=n_jobs, initializer=_matrix_init, initargs=(net,)
        ) as pool:
            for pair, value in pool.map(_matrix_cell, jobs):
                cells[pair] = value

    first = targets[0]

    def sort_key(name):
        v = cells[(name, first)]
        return -(v if v is not None else -np.inf), name

    ordered = tuple(sorted(inputs, key=sort_key))
    return SobolMatrix(ordered, targets, cells)


@dataclass(frozen=True)
class ScenarioDef:
    """A named multi-variable evidence profile."""

    name: str
    evidence: Evidence

    def __post_init__(self):
        object.__setattr__(self, "evidence", Evidence(self.evidence))


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    evidence: Evidence
    evidence_probability: float
    posteriors: dict  # target -> QueryResult


def scenario_posteriors(net: FittedNetwork, scenarios, targets) -> list:
    """One posterior per (scenario, target), preserving scenario order."""
    targets = tuple(targets)
    results = []
    for scen in scenarios:
        scen.evidence.validate(net)
        for t in targets:
            if t in scen.evidence:
                raise InvalidQuery(
                    f"scenario {scen.name!r} fixes the target {t!r}"
                )
        queries = {}
        for t in targets:
            try:
                queries[t] = posterior(net, t, scen.evidence)
            except ZeroProbabilityEvidence as exc:
                raise ZeroProbabilityEvidence(
                    scen.evidence, exc.probability, scenario=scen.name
                ) from exc
        p_ev = queries[targets[0]].evidence_probability if targets else 1.0
        results.append(ScenarioResult(scen.name, scen.evidence, p_ev, queries))
    return results


@dataclass(frozen=True, order=True)
class CptParameterId:
    """One CPT entry: (variable, parent configuration j, state k), 0-based."""

    variable: str
    config: int
    state: int


def _check_param(net, param: CptParameterId) -> Cpt:
    cpt = net.cpts.get(param.variable)
    if cpt is None:
        raise InvalidQuery(f"no CPT for {param.variable!r}")
    if not (0 <= param.config < cpt.q and 0 <= param.state < cpt.r):
        raise InvalidQuery(f"parameter {param} out of bounds for {cpt!r}")
    return cpt


def perturb_parameter(net: FittedNetwork, param: CptParameterId, value: float) -> FittedNetwork:
    """Set one CPT entry to ``value``, co-varying the rest of its row.

    The remaining entries scale by (1 - value) / (1 - theta), preserving the
    row sum exactly up to float rounding.
    """
    cpt = _check_param(net, param)
    theta = float(cpt.table[param.config, param.state])
    if 1.0 - theta == 0.0:
        raise SaturatedParameter(param)
    if not 0.0 <= value <= 1.0:
        raise ValueError("perturbed value must lie in [0, 1]")
    table = np.array(cpt.table)
    row = table[param.config] * ((1.0 - value) / (1.0 - theta))
    row[param.state] = value
    table[param.config] = row
    return net.with_cpt(Cpt(param.variable, cpt.parent_order, table))


def _event_probability(net, event, evidence=None):
    variable, level = event
    return posterior(net, variable, evidence)[level]


def sensitivity_slope(
    net: FittedNetwork, event, param: CptParameterId, evidence=None
) -> float:
    """d P(event) / d theta under proportional co-variation.

    Without evidence, P(event) is linear in theta, so the slope comes exactly
    from two evaluations. With evidence, P is a ratio of linear functions and
    the slope is a central finite difference at the current value.
    """
    cpt = _check_param(net, param)
    if cpt.r < 2:
        raise InvalidQuery("parameter row needs at least 2 states")
    variable, level = event
    net.variable(variable).level_index(level)
    theta = float(cpt.table[param.config, param.state])
    if 1.0 - theta == 0.0:
        raise SaturatedParameter(param)
    evidence = Evidence(evidence) if evidence is not None else None

    if evidence is None or len(evidence) == 0:
        other = (theta + 1.0) / 2.0 if theta <= 0.5 else theta / 2.0
        p0 = _event_probability(net, event)
        p1 = _event_probability(perturb_parameter(net, param, other), event)
        return (p1 - p0) / (other - theta)

    eps = min(1e-4, (1.0 - theta) / 2.0, theta / 2.0 if theta > 0.0 else np.inf)
    if theta == 0.0:
        eps = min(1e-4, (1.0 - theta) / 2.0)
        p0 = _event_probability(net, event, evidence)
        p1 = _event_probability(perturb_parameter(net, param, eps), event, evidence)
        return (p1 - p0) / eps
    lo = _event_probability(perturb_parameter(net, param, theta - eps), event, evidence)
    hi = _event_probability(perturb_parameter(net, param, theta + eps), event, evidence)
    return (hi - lo) / (2.0 * eps)


@dataclass(frozen=True)
class DirectedShift:
    """Effect of moving one parameter in one direction."""

    direction: str  # "increase" or "decrease"
    delta: float  # magnitude actually applied after clipping to [0, 1]
    shift: float  # signed change in P(event)


@dataclass(frozen=True)
class TornadoBar:
    param: CptParameterId
    label: str
    increase: DirectedShift
    decrease: DirectedShift

    @property
    def magnitude(self) -> float:
        return max(abs(self.increase.shift), abs(self.decrease.shift))


def _param_label(net, param: CptParameterId) -> str:
    var = net.variable(param.variable)
    cpt = net.cpts[param.variable]
    cards = net.parent_cards(param.variable)
    state = var.levels[param.state]
    if not cpt.parent_order:
        return f"P({param.variable}={state})"
    levels = config_levels(cards, param.config)
    given = ", ".join(
        f"{p}={net.variable(p).levels[l]}" for p, l in zip(cpt.parent_order, levels)
    )
    return f"P({param.variable}={state} | {given})"


def _node_params(net, name):
    cpt = net.cpts[name]
    for j in range(cpt.q):
        for k in range(cpt.r):
            yield CptParameterId(name, j, k)


_TORNADO = {}


def _tornado_init(net, event, delta):
    _TORNADO.update(net=net, event=event, delta=delta)


def _tornado_bar(param):
    net, event, delta = _TORNADO["net"], _TORNADO["event"], _TORNADO["delta"]
    return _make_bar(net, event, param, delta)


def _make_bar(net, event, param, delta):
    cpt = net.cpts[param.variable]
    theta = float(cpt.table[param.config, param.state])
    p0 = _event_probability(net, event)
    if 1.0 - theta == 0.0:
        # saturated row: co-variation undefined, recorded as a zero bar
        up = DirectedShift("increase", 0.0, 0.0)
        down = DirectedShift("decrease", 0.0, 0.0)
        return TornadoBar(param, _param_label(net, param), up, down)
    d_up = min(delta, 1.0 - theta)
    d_down = min(delta, theta)
    shift_up = (
        _event_probability(perturb_parameter(net, param, theta + d_up), event) - p0
        if d_up > 0.0
        else 0.0
    )
    shift_down = (
        _event_probability(perturb_parameter(net, param, theta - d_down), event) - p0
        if d_down > 0.0
        else 0.0
    )
    return TornadoBar(
        param,
        _param_label(net, param),
        DirectedShift("increase", d_up, shift_up),
        DirectedShift("decrease", d_down, shift_down),
    )


def tornado(
    net: FittedNetwork, event, nodes=None, delta: float = 0.1, n_jobs: int = 1
) -> list:
    """One-way perturbation bars for every CPT parameter of ``nodes``.

    ``nodes`` defaults to the ancestors of the event variable. Each bar holds
    the P(event) shift at theta + delta and theta - delta (deltas clipped so
    the entry stays in [0, 1]); bars sort by max absolute shift, descending,
    ties by parameter id.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    variable, level = event
    net.variable(variable).level_index(level)
    if nodes is None:
        nodes = [n for n in net.dag.nodes if n in net.dag.ancestors(variable)]
    params = [p for name in nodes for p in _node_params(net, name)]
    if n_jobs == 1:
        _tornado_init(net, event, delta)
        bars = [_tornado_bar(p) for p in params]
    else:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=n_jobs, initializer=_tornado_init, initargs=(net, event, delta)
        ) as pool:
            bars = list(pool.map(_tornado_bar, params))
    bars.sort(key=lambda bar: (-bar.magnitude, bar.param))
    return bars


def node_influence(net: FittedNetwork, event) -> dict:
    """Max |slope| over each node's parameters; exact zeros off the ancestry.

    The event's own variable and every non-ancestor report exactly 0; the map
    feeds the DOT exporter's fill-color scale.
    """
    variable, level = event
    net.variable(variable).level_index(level)
    ancestors = net.dag.ancestors(variable)
    influence = {}
    for name in net.dag.nodes:
        if name == variable or name not in ancestors:
            influence[name] = 0.0
            continue
        best = 0.0
        for param in _node_params(net, name):
            cpt = net.cpts[name]
            if 1.0 - float(cpt.table[param.config, param.state]) == 0.0:
                continue  # saturated: no defined slope
            best = max(best, abs(sensitivity_slope(net, event, param)))
        influence[name] = best
    return influence


def influence_colors(influence: dict) -> dict:
    """Linear white-to-red shade per node, scaled by the maximum influence."""
    top = max(influence.values(), default=0.0)
    colors = {}
    for name, value in influence.items():
        frac = 0.0 if top == 0.0 else value / top
        channel = int(round(255 * (1.0 - frac)))
        colors[name] = f"#ff{channel:02x}{channel:02x}"
    return colors
