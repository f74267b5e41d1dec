"""Config file loading: one YAML schema family, documented in docs/formats.md.

Every config carries ``format`` and ``version`` headers. Validation failures
raise MalformedFile with the file path and a dotted key position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .data import RecodeSpec, ThemeSpec, VariableRecode
from .errors import MalformedFile, VersionMismatch
from .learn import Constraints, TabuConfig
from .model import Evidence, TierSpec
from .analysis import ScenarioDef

SUPPORTED_VERSION = 1


def _load_doc(path, expected_format):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        pos = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "(unknown)"
        raise MalformedFile(path, pos, getattr(exc, "problem", str(exc))) from exc
    if not isinstance(doc, dict):
        raise MalformedFile(path, "(root)", "expected a mapping")
    if doc.get("format") != expected_format:
        raise MalformedFile(
            path, "format", f"expected {expected_format!r}, got {doc.get('format')!r}"
        )
    if doc.get("version") != SUPPORTED_VERSION:
        raise VersionMismatch(path, doc.get("version"), SUPPORTED_VERSION)
    return doc


def _need(doc, key, path, where=""):
    if key not in doc:
        raise MalformedFile(path, f"{where}{key}", "missing field")
    return doc[key]


@dataclass(frozen=True)
class PrepConfig:
    recode: RecodeSpec
    missing_threshold: int
    framing: str
    models: dict  # table name -> variable list; may be empty


def load_prep_config(path) -> PrepConfig:
    doc = _load_doc(path, "beliefnet-prep")
    entries = []
    for i, entry in enumerate(_need(doc, "variables", path)):
        where = f"variables[{i}]."
        name = str(_need(entry, "name", path, where))
        levels = tuple(str(x) for x in _need(entry, "levels", path, where))
        mapping = {}
        for token, label in _need(entry, "map", path, where).items():
            mapping[str(token)] = None if label is None else str(label)
        try:
            entries.append(
                VariableRecode(
                    name,
                    levels,
                    mapping,
                    source=str(entry.get("source", "") or ""),
                    ordinal=bool(entry.get("ordinal", False)),
                    unmapped=str(entry.get("unmapped", "strict")),
                )
            )
        except ValueError as exc:
            raise MalformedFile(path, f"variables[{i}]", str(exc)) from exc
    models = {}
    for table, names in (doc.get("models") or {}).items():
        models[str(table)] = [str(n) for n in names]
    try:
        spec = RecodeSpec(entries)
    except ValueError as exc:
        raise MalformedFile(path, "variables", str(exc)) from exc
    return PrepConfig(
        recode=spec,
        missing_threshold=int(doc.get("missing_threshold", 50)),
        framing=str(doc.get("framing", "DevelopAI")),
        models=models,
    )


@dataclass(frozen=True)
class ThemeGroup:
    spec: ThemeSpec
    population: str  # "risk" | "opportunity" | "all"


def load_theme_config(path) -> list:
    doc = _load_doc(path, "beliefnet-themes")
    groups = []
    for i, entry in enumerate(_need(doc, "themes", path)):
        where = f"themes[{i}]."
        name = str(_need(entry, "name", path, where))
        members = tuple(str(m) for m in _need(entry, "members", path, where))
        population = str(entry.get("population", "all"))
        if population not in ("risk", "opportunity", "all"):
            raise MalformedFile(
                path, f"{where}population", f"unknown population {population!r}"
            )
        try:
            groups.append(ThemeGroup(ThemeSpec(name, members), population))
        except ValueError as exc:
            raise MalformedFile(path, f"themes[{i}]", str(exc)) from exc
    return groups


def load_tier_config(path) -> TierSpec:
    doc = _load_doc(path, "beliefnet-tiers")
    tiers = []
    flags = []
    for i, entry in enumerate(_need(doc, "tiers", path)):
        where = f"tiers[{i}]."
        tiers.append(tuple(str(v) for v in _need(entry, "variables", path, where)))
        flags.append(bool(entry.get("within_tier_edges", True)))
    try:
        return TierSpec(tuple(tiers), tuple(flags))
    except ValueError as exc:
        raise MalformedFile(path, "tiers", str(exc)) from exc


@dataclass(frozen=True)
class LearnConfig:
    score: str = "AIC"
    alpha: float = 1.0
    bootstrap: int = 2000
    threshold: float | None = None  # None = estimate from strengths
    tabu: TabuConfig = field(default_factory=TabuConfig)
    whitelist: tuple = ()
    blacklist: tuple = ()

    def constraints(self) -> Constraints:
        return Constraints(forbidden=self.blacklist, required=self.whitelist)


def load_learn_config(path) -> LearnConfig:
    doc = _load_doc(path, "beliefnet-learn")
    tabu_doc = doc.get("tabu") or {}
    try:
        tabu = TabuConfig(
            tenure=int(tabu_doc.get("tenure", 10)),
            max_iterations=int(tabu_doc.get("max_iterations", 1000)),
            stall_limit=int(tabu_doc.get("stall_limit", 100)),
            restarts=int(tabu_doc.get("restarts", 1)),
        )
    except ValueError as exc:
        raise MalformedFile(path, "tabu", str(exc)) from exc
    threshold = doc.get("threshold", "auto")
    if threshold in ("auto", None):
        threshold = None
    else:
        threshold = float(threshold)
        if not 0.0 < threshold <= 1.0:
            raise MalformedFile(path, "threshold", "must be in (0, 1] or 'auto'")
    score = str(doc.get("score", "AIC")).upper()
    if score not in ("AIC", "BIC", "LOGLIK"):
        raise MalformedFile(path, "score", f"unknown score {score!r}")
    alpha = float(doc.get("alpha", 1.0))
    if not alpha > 0:
        raise MalformedFile(path, "alpha", "must be > 0")
    return LearnConfig(
        score=score,
        alpha=alpha,
        bootstrap=int(doc.get("bootstrap", 2000)),
        threshold=threshold,
        tabu=tabu,
        whitelist=tuple((str(a), str(b)) for a, b in doc.get("whitelist") or ()),
        blacklist=tuple((str(a), str(b)) for a, b in doc.get("blacklist") or ()),
    )


@dataclass(frozen=True)
class QueryConfig:
    tables: tuple  # (target, evidence variable list) pairs


def load_query_config(path) -> QueryConfig:
    doc = _load_doc(path, "beliefnet-query")
    tables = []
    for i, entry in enumerate(_need(doc, "tables", path)):
        where = f"tables[{i}]."
        target = str(_need(entry, "target", path, where))
        sweeps = tuple(str(v) for v in _need(entry, "evidence_variables", path, where))
        tables.append((target, sweeps))
    return QueryConfig(tuple(tables))


@dataclass(frozen=True)
class SobolConfig:
    targets: tuple
    inputs: tuple


def load_sobol_config(path) -> SobolConfig:
    doc = _load_doc(path, "beliefnet-sobol")
    return SobolConfig(
        targets=tuple(str(t) for t in _need(doc, "targets", path)),
        inputs=tuple(str(i) for i in _need(doc, "inputs", path)),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    targets: tuple
    scenarios: tuple


def load_scenario_config(path) -> ScenarioConfig:
    doc = _load_doc(path, "beliefnet-scenarios")
    scenarios = []
    for i, entry in enumerate(_need(doc, "scenarios", path)):
        where = f"scenarios[{i}]."
        name = str(_need(entry, "name", path, where))
        ev = {
            str(k): str(v) for k, v in (entry.get("evidence") or {}).items()
        }
        scenarios.append(ScenarioDef(name, Evidence(ev)))
    return ScenarioConfig(
        targets=tuple(str(t) for t in _need(doc, "targets", path)),
        scenarios=tuple(scenarios),
    )


@dataclass(frozen=True)
class SensitivityConfig:
    target_variable: str
    target_state: str
    nodes: tuple | None  # None = ancestors of the target
    delta: float


def load_sensitivity_config(path) -> SensitivityConfig:
    doc = _load_doc(path, "beliefnet-sensitivity")
    target = _need(doc, "target", path)
    variable = str(_need(target, "variable", path, "target."))
    state = str(_need(target, "state", path, "target."))
    nodes = doc.get("nodes", "auto")
    if nodes in ("auto", None):
        nodes = None
    else:
        nodes = tuple(str(n) for n in nodes)
    delta = float(doc.get("delta", 0.1))
    if not delta > 0:
        raise MalformedFile(path, "delta", "must be > 0")
    return SensitivityConfig(variable, state, nodes, delta)
