"""Model file serialization and Graphviz export.

The native model file is a versioned YAML document holding variables, arcs,
CPT rows, and metadata (see docs/formats.md). Floats are written with
shortest round-trip repr, so serialize/deserialize is the identity on every
field, bit for bit.
"""

from __future__ import annotations

import yaml

from .errors import MalformedFile, VersionMismatch
from .model import CategoricalVariable, Cpt, Dag, FittedNetwork

FORMAT_NAME = "beliefnet-model"
FORMAT_VERSION = 1


def serialize(net: FittedNetwork) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "variables": [
            {"name": v.name, "levels": list(v.levels), "ordinal": v.ordinal}
            for v in net.variables
        ],
        "arcs": [[p, c] for (p, c) in net.dag.arcs()],
        "cpts": [
            {
                "variable": v.name,
                "parents": list(net.cpts[v.name].parent_order),
                "rows": [[float(x) for x in row] for row in net.cpts[v.name].table],
            }
            for v in net.variables
        ],
        "metadata": dict(net.metadata),
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100000)


def save(net: FittedNetwork, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(net))


def deserialize(text: str, source="<string>") -> FittedNetwork:
    doc = _load_yaml(text, source)
    if not isinstance(doc, dict):
        raise MalformedFile(source, "(root)", "expected a mapping")
    if doc.get("format") != FORMAT_NAME:
        raise MalformedFile(source, "format", f"expected {FORMAT_NAME!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionMismatch(source, doc.get("version"), FORMAT_VERSION)
    try:
        variables = tuple(
            CategoricalVariable(
                name=str(entry["name"]),
                levels=tuple(str(x) for x in entry["levels"]),
                ordinal=bool(entry.get("ordinal", False)),
            )
            for entry in _req(doc, "variables", source)
        )
        cpt_entries = {str(e["variable"]): e for e in _req(doc, "cpts", source)}
        parents = {name: tuple(str(p) for p in e["parents"]) for name, e in cpt_entries.items()}
        dag = Dag(tuple(v.name for v in variables), parents)
        arcs = {(str(a), str(b)) for a, b in _req(doc, "arcs", source)}
        if arcs != set(dag.arcs()):
            raise MalformedFile(source, "arcs", "arc list disagrees with CPT parents")
        cpts = {
            name: Cpt(name, parents[name], e["rows"]) for name, e in cpt_entries.items()
        }
        metadata = doc.get("metadata") or {}
        return FittedNetwork(variables, dag, cpts, metadata)
    except (MalformedFile, VersionMismatch):
        raise
    except KeyError as exc:
        raise MalformedFile(source, str(exc.args[0]), "missing field") from exc
    except Exception as exc:
        raise MalformedFile(source, "(document)", str(exc)) from exc


def load(path) -> FittedNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return deserialize(fh.read(), source=str(path))


def _load_yaml(text, source):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            position = f"line {mark.line + 1}, column {mark.column + 1}"
        else:
            position = "(unknown)"
        raise MalformedFile(source, position, getattr(exc, "problem", str(exc))) from exc


def _req(doc, key, source):
    if key not in doc:
        raise MalformedFile(source, key, "missing field")
    return doc[key]


def _dot_quote(name: str) -> str:
    return '"' + str(name).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(dag: Dag, node_colors=None, graph_name="beliefnet") -> str:
    """Graphviz DOT text listing every node and arc exactly once.

    ``node_colors`` maps node name -> fill color (any Graphviz color string);
    colored nodes are rendered with style=filled.
    """
    node_colors = node_colors or {}
    lines = [f"digraph {_dot_quote(graph_name)} {{"]
    for node in dag.nodes:
        color = node_colors.get(node)
        if color is not None:
            lines.append(
                f"  {_dot_quote(node)} [style=filled, fillcolor={_dot_quote(color)}];"
            )
        else:
            lines.append(f"  {_dot_quote(node)};")
    for parent, child in dag.arcs():
        lines.append(f"  {_dot_quote(parent)} -> {_dot_quote(child)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
