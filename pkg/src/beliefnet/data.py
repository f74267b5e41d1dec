"""Survey data pipeline: recoding, missing-data handling, themes, splits, counts.

All stages are pure: the same input table and spec produce identical output.
Encoded tables store level indices (int32, -1 for missing); sufficient
statistics index parent configurations mixed-radix over the parent order, as
documented in :mod:`beliefnet.model`.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    MissingColumn,
    NonBinaryMember,
    RaggedRow,
    UnknownLevel,
    UnknownVariable,
    UnmappedToken,
)
from .model import CategoricalVariable

MISSING = -1
MENTIONED = "Mentioned"
NOT_MENTIONED = "Not mentioned"

# retain a level when it occurs at least this often; rarer levels become missing
DEFAULT_MIN_LEVEL_COUNT = 50


class RawTable:
    """A rectangular table of verbatim string cells with a content fingerprint."""

    __slots__ = ("columns", "rows", "fingerprint")

    def __init__(self, columns, rows):
        self.columns = tuple(columns)
        width = len(self.columns)
        self.rows = []
        for i, row in enumerate(rows, start=1):
            row = tuple(row)
            if len(row) != width:
                raise RaggedRow(i, width, len(row))
            self.rows.append(row)
        digest = hashlib.sha256()
        digest.update("\x1f".join(self.columns).encode("utf-8"))
        for row in self.rows:
            digest.update(b"\x1e")
            digest.update("\x1f".join(row).encode("utf-8"))
        self.fingerprint = digest.hexdigest()

    @property
    def n_rows(self):
        return len(self.rows)

    def column(self, name):
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise MissingColumn(name) from None
        return [row[idx] for row in self.rows]


def load_csv(path, required_columns=None) -> RawTable:
    """Read a UTF-8 CSV with a header row, preserving cell text verbatim."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn("(empty file: no header row)") from None
        rows = list(reader)
    table = RawTable(header, rows)
    for name in required_columns or ():
        if name not in table.columns:
            raise MissingColumn(name)
    return table


@dataclass(frozen=True)
class VariableRecode:
    """Recoding rule for one variable.

    ``mapping`` sends raw tokens to level labels; a None target marks the
    token as missing. ``unmapped`` is "strict" (error on unseen tokens) or
    "missing".
    """

    name: str
    levels: tuple
    mapping: dict
    source: str = ""
    ordinal: bool = False
    unmapped: str = "strict"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "source", self.source or self.name)
        if self.unmapped not in ("strict", "missing"):
            raise ValueError(f"unmapped policy {self.unmapped!r}")
        level_set = set(self.levels)
        for token, label in self.mapping.items():
            if label is not None and label not in level_set:
                raise ValueError(
                    f"variable {self.name!r}: token {token!r} maps to "
                    f"undeclared level {label!r}"
                )

    def variable(self) -> CategoricalVariable:
        return CategoricalVariable(self.name, self.levels, self.ordinal)


@dataclass(frozen=True)
class RecodeSpec:
    variables: tuple

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names in recode spec")

    def names(self):
        return [v.name for v in self.variables]


@dataclass(frozen=True)
class ThemeSpec:
    """A theme column defined as the OR of binary Mentioned indicators."""

    name: str
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError(f"theme {self.name!r} has no members")


class DataTable:
    """Encoded observations: one int32 code column per variable, -1 = missing."""

    __slots__ = ("variables", "codes", "source", "_index")

    def __init__(self, variables, codes, source=""):
        self.variables = tuple(variables)
        self._index = {v.name: i for i, v in enumerate(self.variables)}
        if len(self._index) != len(self.variables):
            raise ValueError("duplicate variable names")
        codes = np.asarray(codes, dtype=np.int32)
        if codes.ndim != 2 or codes.shape[1] != len(self.variables):
            raise ValueError("codes must be (n_rows, n_variables)")
        for i, v in enumerate(self.variables):
            col = codes[:, i]
            if col.size and (col.min() < MISSING or col.max() >= v.r):
                raise ValueError(f"column {v.name!r} has out-of-range codes")
        codes = codes.copy()
        codes.flags.writeable = False
        self.codes = codes
        self.source = source

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    def var_index(self, name) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def variable(self, name) -> CategoricalVariable:
        return self.variables[self.var_index(name)]

    def column(self, name) -> np.ndarray:
        return self.codes[:, self.var_index(name)]

    def missing_mask(self) -> np.ndarray:
        return self.codes == MISSING

    def select(self, names) -> "DataTable":
        idx = [self.var_index(n) for n in names]
        return DataTable(
            [self.variables[i] for i in idx], self.codes[:, idx], self.source
        )

    def filter_rows(self, mask) -> "DataTable":
        return DataTable(self.variables, self.codes[np.asarray(mask, bool)], self.source)

    def take(self, indices) -> "DataTable":
        """Row subset/resample by integer index (used by the bootstrap)."""
        return DataTable(self.variables, self.codes[np.asarray(indices)], self.source)

    def __eq__(self, other):
        return (
            isinstance(other, DataTable)
            and self.variables == other.variables
            and self.codes.shape == other.codes.shape
            and bool(np.all(self.codes == other.codes))
        )


class CountTable:
    """Sufficient statistics N_ijk for one variable given an ordered parent set."""

    __slots__ = ("variable", "parents", "counts")

    def __init__(self, variable, parents, counts):
        self.variable = variable
        self.parents = tuple(parents)
        counts = np.asarray(counts, dtype=np.int64)
        q = 1
        for p in self.parents:
            q *= p.r
        if counts.shape != (q, variable.r):
            raise ValueError(f"counts must be {(q, variable.r)}, got {counts.shape}")
        if counts.min(initial=0) < 0:
            raise ValueError("negative counts")
        counts.flags.writeable = False
        self.counts = counts

    @property
    def n_ij(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def counts(table: DataTable, variable, parents=()) -> CountTable:
    """Tally N_ijk over the rows complete in the variable and its parents.

    Rows missing any involved variable are skipped; configurations never
    observed keep an explicit zero row.
    """
    var = table.variable(variable)
    parent_vars = tuple(table.variable(p) for p in parents)
    child = table.column(variable)
    complete = child >= 0
    j = np.zeros(table.n_rows, dtype=np.int64)
    for p in parent_vars:
        col = table.column(p.name)
        complete &= col >= 0
        j = j * p.r + col
    q = 1
    for p in parent_vars:
        q *= p.r
    flat = (j[complete] * var.r + child[complete]).astype(np.int64)
    tallied = np.bincount(flat, minlength=q * var.r).reshape(q, var.r)
    return CountTable(var, parent_vars, tallied)


def recode(raw: RawTable, spec: RecodeSpec) -> DataTable:
    """Map raw tokens to level indices; unmapped tokens error or become missing."""
    columns = []
    variables = []
    for vr in spec.variables:
        tokens = raw.column(vr.source)
        lookup = {}
        for token, label in vr.mapping.items():
            lookup[token] = MISSING if label is None else vr.levels.index(label)
        col = np.empty(len(tokens), dtype=np.int32)
        for i, token in enumerate(tokens):
            if token in lookup:
                col[i] = lookup[token]
            elif vr.unmapped == "missing":
                col[i] = MISSING
            else:
                raise UnmappedToken(vr.name, token)
        columns.append(col)
        variables.append(vr.variable())
    codes = (
        np.stack(columns, axis=1)
        if columns
        else np.empty((raw.n_rows, 0), dtype=np.int32)
    )
    return DataTable(variables, codes, source=raw.fingerprint)


def collapse_rare(
    table: DataTable, variable, min_count: int = DEFAULT_MIN_LEVEL_COUNT
) -> DataTable:
    """Drop levels observed fewer than ``min_count`` times, marking cells missing.

    Counts are taken on the table as given, i.e. before any row filtering. An
    empty table passes through unchanged: with no observations there is no
    basis for collapsing a domain.
    """
    if table.n_rows == 0:
        return table
    vi = table.var_index(variable)
    var = table.variables[vi]
    col = table.codes[:, vi]
    observed = np.bincount(col[col >= 0], minlength=var.r)
    keep = observed >= min_count
    if np.all(keep):
        return table
    if keep.sum() < 2:
        raise ValueError(
            f"collapsing rare levels of {variable!r} would leave "
            f"{int(keep.sum())} level(s)"
        )
    new_levels = tuple(lvl for lvl, k in zip(var.levels, keep) if k)
    remap = np.full(var.r + 1, MISSING, dtype=np.int32)  # slot -1 aliases to last
    remap[np.flatnonzero(keep)] = np.arange(int(keep.sum()), dtype=np.int32)
    new_col = remap[col]
    codes = np.array(table.codes)
    codes[:, vi] = new_col
    variables = list(table.variables)
    variables[vi] = CategoricalVariable(var.name, new_levels, var.ordinal)
    return DataTable(variables, codes, table.source)


def drop_incomplete(table: DataTable, variables=None) -> DataTable:
    """Keep exactly the rows with no missing value among the listed variables."""
    names = list(variables) if variables is not None else [v.name for v in table.variables]
    if not names:
        return table
    mask = np.ones(table.n_rows, dtype=bool)
    for name in names:
        mask &= table.column(name) >= 0
    return table.filter_rows(mask)


def group_themes(table: DataTable, specs) -> DataTable:
    """Replace binary indicator columns with one OR-aggregated column per theme.

    A theme is Mentioned when at least one member is Mentioned, Not mentioned
    when all members are Not mentioned, and missing when the observed members
    are all Not mentioned but some member is missing.
    """
    member_names = set()
    theme_cols = []
    theme_vars = []
    for spec in specs:
        mentioned = np.zeros(table.n_rows, dtype=bool)
        unknown = np.zeros(table.n_rows, dtype=bool)
        for member in spec.members:
            var = table.variable(member)
            if set(var.levels) != {MENTIONED, NOT_MENTIONED}:
                raise NonBinaryMember(spec.name, member, var.levels)
            code_mentioned = var.level_index(MENTIONED)
            col = table.column(member)
            mentioned |= col == code_mentioned
            unknown |= col == MISSING
            member_names.add(member)
        theme_var = CategoricalVariable(spec.name, (MENTIONED, NOT_MENTIONED))
        col = np.where(
            mentioned,
            theme_var.level_index(MENTIONED),
            np.where(unknown, MISSING, theme_var.level_index(NOT_MENTIONED)),
        ).astype(np.int32)
        theme_vars.append(theme_var)
        theme_cols.append(col)
    kept = [v for v in table.variables if v.name not in member_names]
    kept_codes = table.codes[:, [table.var_index(v.name) for v in kept]]
    all_cols = (
        np.concatenate([kept_codes, np.stack(theme_cols, axis=1)], axis=1)
        if theme_cols
        else kept_codes
    )
    return DataTable(list(kept) + theme_vars, all_cols, table.source)


def split_population(table: DataTable, framing="DevelopAI"):
    """Split rows by AI framing; "Both" respondents appear in both outputs.

    Returns (risk_table, opportunity_table): rows whose framing level is in
    {Risk, Both} and {Opportunity, Both} respectively.
    """
    var = table.variable(framing)
    for needed in ("Risk", "Opportunity", "Both"):
        if needed not in var.levels:
            raise UnknownLevel(framing, needed)
    col = table.column(framing)
    risk = table.filter_rows(
        (col == var.level_index("Risk")) | (col == var.level_index("Both"))
    )
    opportunity = table.filter_rows(
        (col == var.level_index("Opportunity")) | (col == var.level_index("Both"))
    )
    return risk, opportunity


def save_datatable(table: DataTable, csv_path, dict_path) -> None:
    """Write the table as a label CSV plus a YAML variable dictionary."""
    import yaml

    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([v.name for v in table.variables])
        for row in table.codes:
            writer.writerow(
                [
                    "" if code == MISSING else var.levels[code]
                    for var, code in zip(table.variables, row)
                ]
            )
    doc = {
        "format": "beliefnet-dict",
        "version": 1,
        "n_rows": int(table.n_rows),
        "source": table.source,
        "variables": [
            {"name": v.name, "levels": list(v.levels), "ordinal": v.ordinal}
            for v in table.variables
        ],
    }
    with open(dict_path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False, default_flow_style=None)


def load_datatable(csv_path, dict_path) -> DataTable:
    import yaml

    from .errors import MalformedFile, VersionMismatch

    with open(dict_path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or doc.get("format") != "beliefnet-dict":
        raise MalformedFile(dict_path, "format", "expected beliefnet-dict")
    if doc.get("version") != 1:
        raise VersionMismatch(dict_path, doc.get("version"), 1)
    variables = [
        CategoricalVariable(e["name"], tuple(e["levels"]), bool(e.get("ordinal", False)))
        for e in doc["variables"]
    ]
    raw = load_csv(csv_path, required_columns=[v.name for v in variables])
    order = [raw.columns.index(v.name) for v in variables]
    codes = np.empty((raw.n_rows, len(variables)), dtype=np.int32)
    for out_col, (var, src_col) in enumerate(zip(variables, order)):
        lookup = {label: i for i, label in enumerate(var.levels)}
        for i, row in enumerate(raw.rows):
            cell = row[src_col]
            if cell == "":
                codes[i, out_col] = MISSING
            else:
                try:
                    codes[i, out_col] = lookup[cell]
                except KeyError:
                    raise UnknownLevel(var.name, cell) from None
    return DataTable(variables, codes, source=doc.get("source", ""))
