"""beliefnet command line: prep, learn, fit, query, sobol, scenario, sensitivity, export.

Every artifact-producing command runs inside a workspace (data/, models/,
strengths/, reports/), takes an exclusive lock file, refuses to overwrite
outputs without --force, and writes one manifest next to its primary output.
Exit codes: 0 success, 1 usage error, 2 data/model error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import os
import secrets
import sys
import time

import yaml

from . import __version__, analysis, configio, charts, reports
from .data import (
    collapse_rare,
    drop_incomplete,
    group_themes,
    load_csv,
    load_datatable,
    recode,
    save_datatable,
    split_population,
)
from .errors import BeliefnetError, MalformedFile, WorkspaceError
from .inference import conditional_table, fit_bayes, fit_mle, posterior
from .learn import (
    averaged_network,
    bootstrap_strengths,
    optimal_threshold,
    tabu_search,
    tiers_to_blacklist,
)
from .model import FittedNetwork
from .modelio import export_dot, load as load_model, save as save_model

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
WORKSPACE_ENV = "BELIEFNET_WORKSPACE"
LOCK_NAME = ".beliefnet.lock"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


class Workspace:
    DIRS = ("data", "models", "strengths", "reports")

    def __init__(self, root):
        self.root = os.path.abspath(root)

    def prepare(self):
        os.makedirs(self.root, exist_ok=True)
        for d in self.DIRS:
            os.makedirs(os.path.join(self.root, d), exist_ok=True)

    def path(self, *parts) -> str:
        return os.path.join(self.root, *parts)

    def guard(self, path, force):
        if os.path.exists(path) and not force:
            raise WorkspaceError(
                f"refusing to overwrite {path} (pass --force to allow)"
            )
        return path

    def __enter__(self):
        self.prepare()
        self._lock = os.path.join(self.root, LOCK_NAME)
        try:
            fd = os.open(self._lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceError(
                f"workspace {self.root} is locked by another command "
                f"(remove {self._lock} if that command is gone)"
            ) from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            os.unlink(self._lock)
        except FileNotFoundError:
            pass
        return False


def _fingerprint(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return secrets.randbits(31)


def _write_manifest(path, command, args, seed, inputs, outputs, started, extra=None):
    doc = {
        "format": "beliefnet-manifest",
        "version": 1,
        "command": command,
        "tool_version": __version__,
        "seed": seed,
        "workers": getattr(args, "workers", 1),
        "config": {
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("func",) and isinstance(v, (str, int, float, bool, type(None)))
        },
        "inputs": {str(p): _fingerprint(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "extra": extra or {},
        "timing": {
            "started_utc": started,
            "elapsed_seconds": round(time.time() - _STARTED_MONO[0], 3),
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False, default_flow_style=None)


_STARTED_MONO = [0.0]


def _begin():
    _STARTED_MONO[0] = time.time()
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _timestamp(args):
    if args.no_timestamp:
        return None
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _default_models(table, groups):
    member_cols = {m for g in groups for m in g.spec.members}
    theme_pop = {g.spec.name: g.population for g in groups}
    plain = [
        v.name
        for v in table.variables
        if v.name not in member_cols and v.name not in theme_pop
    ]
    models = {"full": plain}
    for pop in ("risk", "opportunity"):
        models[pop] = plain + [
            n for n, p in theme_pop.items() if p in (pop, "all")
        ]
    return models


def cmd_prep(args, ws: Workspace) -> int:
    started = _begin()
    cfg = configio.load_prep_config(args.recode)
    groups = configio.load_theme_config(args.themes) if args.themes else []
    raw = load_csv(args.raw, required_columns=[v.source for v in cfg.recode.variables])
    table = recode(raw, cfg.recode)
    audit = {"raw_rows": raw.n_rows, "recoded_rows": table.n_rows}

    collapsed = {}
    for var in list(table.variables):
        before = table.variable(var.name).levels
        table = collapse_rare(table, var.name, cfg.missing_threshold)
        after = table.variable(var.name).levels
        gone = [lvl for lvl in before if lvl not in after]
        if gone:
            collapsed[var.name] = gone
    audit["collapsed_levels"] = collapsed

    if groups:
        table = group_themes(table, [g.spec for g in groups])

    models = dict(cfg.models) if cfg.models else _default_models(table, groups)
    tables = {"full": table}
    if args.split:
        risk, opportunity = split_population(table, cfg.framing)
        tables["risk"] = risk
        tables["opportunity"] = opportunity

    outputs = []
    audit["tables"] = {}
    for kind, t in tables.items():
        wanted = models.get(kind)
        if wanted is None:
            continue
        missing = [n for n in wanted if n not in {v.name for v in t.variables}]
        if missing:
            raise MalformedFile(args.recode, f"models.{kind}", f"unknown variables {missing}")
        selected = t.select(wanted)
        final = drop_incomplete(selected)
        csv_path = ws.guard(ws.path("data", f"{args.name}_{kind}.csv"), args.force)
        dict_path = ws.path("data", f"{args.name}_{kind}.dict.yaml")
        save_datatable(final, csv_path, dict_path)
        outputs += [csv_path, dict_path]
        audit["tables"][kind] = {
            "rows_before_drop": t.n_rows,
            "rows": final.n_rows,
            "variables": len(final.variables),
        }

    audit_path = ws.path("data", f"{args.name}.audit.yaml")
    with open(audit_path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(
            {"format": "beliefnet-audit", "version": 1, **audit},
            fh,
            sort_keys=False,
            default_flow_style=None,
        )
    outputs.append(audit_path)
    inputs = [args.raw, args.recode] + ([args.themes] if args.themes else [])
    _write_manifest(
        ws.path("data", f"{args.name}.manifest.yaml"),
        "prep", args, None, inputs, outputs, started,
    )
    for kind, stats in audit["tables"].items():
        print(f"{kind}: {stats['rows']} rows x {stats['variables']} variables")
    return EXIT_OK


def cmd_learn(args, ws: Workspace) -> int:
    started = _begin()
    data = load_datatable(args.data, args.dict)
    cfg = configio.load_learn_config(args.config) if args.config else configio.LearnConfig()
    seed = _resolve_seed(args)
    b = cfg.bootstrap if args.bootstrap is None else args.bootstrap
    if b < 0:
        raise ValueError("--bootstrap must be >= 0")
    constraints = cfg.constraints()
    if args.tiers:
        tiers = configio.load_tier_config(args.tiers)
        constraints = tiers_to_blacklist(
            tiers, [v.name for v in data.variables]
        ).merge(constraints)
    tabu_cfg = configio.TabuConfig(
        tenure=cfg.tabu.tenure,
        max_iterations=cfg.tabu.max_iterations,
        stall_limit=cfg.tabu.stall_limit,
        restarts=cfg.tabu.restarts,
        seed=seed,
    )

    extra = {"bootstrap": b, "score": cfg.score, "alpha": cfg.alpha}
    outputs = []
    skipped = []
    if b == 0:
        dag = tabu_search(data, score=cfg.score, constraints=constraints, config=tabu_cfg)
        threshold = None
    else:
        strengths = bootstrap_strengths(
            data,
            b=b,
            score=cfg.score,
            constraints=constraints,
            config=tabu_cfg,
            seed=seed,
            n_jobs=args.workers,
        )
        threshold = cfg.threshold
        if threshold is None:
            threshold = optimal_threshold(strengths)
        dag = averaged_network(
            strengths,
            threshold,
            [v.name for v in data.variables],
            constraints,
            skipped=skipped,
        )
        strengths_path = ws.guard(
            ws.path("strengths", f"{args.name}_strengths.csv"), args.force
        )
        reports.write_strengths_csv(strengths_path, strengths)
        outputs.append(strengths_path)
    extra["threshold"] = threshold
    extra["skipped_edges"] = [list(s) for s in skipped]

    net = fit_bayes(dag, data, alpha=cfg.alpha)
    metadata = dict(net.metadata)
    metadata.update(
        {
            "seed": seed,
            "score": cfg.score,
            "bootstrap": b,
            "threshold": "none" if threshold is None else float(threshold),
            "tool_version": __version__,
        }
    )
    net = FittedNetwork(net.variables, net.dag, net.cpts, metadata)
    model_path = ws.guard(ws.path("models", f"{args.name}.bn.yaml"), args.force)
    save_model(net, model_path)
    outputs.insert(0, model_path)
    _write_manifest(
        ws.path("models", f"{args.name}.manifest.yaml"),
        "learn", args, seed, [args.data, args.dict] +
        ([args.tiers] if args.tiers else []) + ([args.config] if args.config else []),
        outputs, started, extra,
    )
    print(f"learned {len(dag.arcs())} arcs (B={b}, threshold={threshold})")
    return EXIT_OK


def cmd_fit(args, ws: Workspace) -> int:
    started = _begin()
    base = load_model(args.model)
    data = load_datatable(args.data, args.dict)
    if args.method == "mle":
        net = fit_mle(base.dag, data)
    else:
        net = fit_bayes(base.dag, data, alpha=args.alpha)
    metadata = dict(net.metadata)
    metadata["tool_version"] = __version__
    net = FittedNetwork(net.variables, net.dag, net.cpts, metadata)
    model_path = ws.guard(ws.path("models", f"{args.name}.bn.yaml"), args.force)
    save_model(net, model_path)
    _write_manifest(
        ws.path("models", f"{args.name}.manifest.yaml"),
        "fit", args, None, [args.model, args.data, args.dict], [model_path], started,
    )
    print(f"refitted parameters onto {len(base.dag.arcs())} arcs")
    return EXIT_OK


def cmd_query(args, ws: Workspace) -> int:
    started = _begin()
    net = load_model(args.model)
    cfg = configio.load_query_config(args.config)
    outputs = []
    for target, sweeps in cfg.tables:
        baseline = posterior(net, target)
        blocks = []
        for sweep in sweeps:
            rows = conditional_table(net, target, sweep)[1:]
            blocks.append((sweep, rows))
        path = ws.guard(
            ws.path("reports", f"{args.name}_query_{target}.csv"), args.force
        )
        reports.write_query_csv(path, target, net.variable(target).levels, baseline, blocks)
        outputs.append(path)
    _write_manifest(
        ws.path("reports", f"{args.name}_query.manifest.yaml"),
        "query", args, None, [args.model, args.config], outputs, started,
    )
    print(f"wrote {len(outputs)} conditional table(s)")
    return EXIT_OK


def cmd_sobol(args, ws: Workspace) -> int:
    started = _begin()
    net = load_model(args.model)
    cfg = configio.load_sobol_config(args.config)
    matrix = analysis.sobol_matrix(net, cfg.targets, cfg.inputs, n_jobs=args.workers)
    csv_path = ws.guard(ws.path("reports", f"{args.name}_sobol.csv"), args.force)
    reports.write_sobol_csv(csv_path, matrix)
    rows = [
        [name]
        + [
            reports.DASH if matrix.value(name, t) is None else float(matrix.value(name, t))
            for t in matrix.targets
        ]
        for name in matrix.inputs
    ]
    txt_path = ws.path("reports", f"{args.name}_sobol.txt")
    reports.write_text(
        txt_path,
        reports.text_table(
            "First-order Sobol indices (% of output variance)",
            ["input", *matrix.targets],
            rows,
        ),
    )
    _write_manifest(
        ws.path("reports", f"{args.name}_sobol.manifest.yaml"),
        "sobol", args, None, [args.model, args.config], [csv_path, txt_path], started,
    )
    print(f"wrote sobol matrix: {len(matrix.inputs)} inputs x {len(matrix.targets)} targets")
    return EXIT_OK


def cmd_scenario(args, ws: Workspace) -> int:
    started = _begin()
    net = load_model(args.model)
    cfg = configio.load_scenario_config(args.config)
    results = analysis.scenario_posteriors(net, cfg.scenarios, cfg.targets)
    outputs = []
    # all CSVs land before any SVG is attempted
    for target in cfg.targets:
        path = ws.guard(
            ws.path("reports", f"{args.name}_scenario_{target}.csv"), args.force
        )
        reports.write_scenario_csv(path, target, net.variable(target).levels, results)
        outputs.append(path)
    txt_path = ws.path("reports", f"{args.name}_scenario.txt")
    sections = []
    for target in cfg.targets:
        levels = net.variable(target).levels
        rows = [
            [r.name, float(r.evidence_probability)]
            + [float(p) for p in r.posteriors[target].distribution]
            for r in results
        ]
        sections.append(
            reports.text_table(
                f"Scenario posteriors for {target}",
                ["scenario", "P(evidence)", *levels],
                rows,
            )
        )
    reports.write_text(txt_path, "\n".join(sections))
    outputs.append(txt_path)
    stamp = _timestamp(args)
    for target in cfg.targets:
        svg = charts.scenario_bars_svg(
            target,
            net.variable(target).levels,
            [r.name for r in results],
            [r.posteriors[target].distribution for r in results],
            timestamp=stamp,
        )
        path = ws.path("reports", f"{args.name}_scenario_{target}.svg")
        reports.write_text(path, svg)
        outputs.append(path)
    _write_manifest(
        ws.path("reports", f"{args.name}_scenario.manifest.yaml"),
        "scenario", args, None, [args.model, args.config], outputs, started,
    )
    print(f"wrote {len(cfg.scenarios)} scenarios x {len(cfg.targets)} targets")
    return EXIT_OK


def cmd_sensitivity(args, ws: Workspace) -> int:
    started = _begin()
    net = load_model(args.model)
    cfg = configio.load_sensitivity_config(args.config)
    event = (cfg.target_variable, cfg.target_state)
    bars = analysis.tornado(
        net, event, nodes=cfg.nodes, delta=cfg.delta, n_jobs=args.workers
    )
    csv_path = ws.guard(ws.path("reports", f"{args.name}_tornado.csv"), args.force)
    reports.write_tornado_csv(csv_path, bars, event, cfg.delta)
    txt_path = ws.path("reports", f"{args.name}_tornado.txt")
    reports.write_text(
        txt_path,
        reports.text_table(
            f"Tornado for {cfg.target_variable}={cfg.target_state} (delta={cfg.delta:g})",
            ["parameter", "up_shift", "down_shift", "magnitude"],
            [
                [b.label, float(b.increase.shift), float(b.decrease.shift), float(b.magnitude)]
                for b in bars
            ],
        ),
    )
    influence = analysis.node_influence(net, event)
    dot_path = ws.path("reports", f"{args.name}_influence.dot")
    reports.write_text(
        dot_path, export_dot(net.dag, analysis.influence_colors(influence))
    )
    svg = charts.tornado_svg(
        bars,
        f"{cfg.target_variable}={cfg.target_state}",
        cfg.delta,
        timestamp=_timestamp(args),
    )
    svg_path = ws.path("reports", f"{args.name}_tornado.svg")
    reports.write_text(svg_path, svg)
    _write_manifest(
        ws.path("reports", f"{args.name}_sensitivity.manifest.yaml"),
        "sensitivity", args, None, [args.model, args.config],
        [csv_path, txt_path, dot_path, svg_path], started,
        extra={"delta": cfg.delta},
    )
    print(f"wrote {len(bars)} tornado bars")
    return EXIT_OK


def cmd_export(args, ws: Workspace) -> int:
    started = _begin()
    net = load_model(args.model)
    colors = None
    if args.influence:
        variable, _, state = args.influence.partition("=")
        if not state:
            raise MalformedFile("<cli>", "--influence", "expected VARIABLE=STATE")
        colors = analysis.influence_colors(
            analysis.node_influence(net, (variable, state))
        )
    elif args.colors:
        with open(args.colors, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        colors = {str(k): str(v) for k, v in (doc or {}).items()}
    dot_path = ws.guard(ws.path("reports", f"{args.name}.dot"), args.force)
    reports.write_text(dot_path, export_dot(net.dag, colors))
    _write_manifest(
        ws.path("reports", f"{args.name}_export.manifest.yaml"),
        "export", args, None,
        [args.model] + ([args.colors] if args.colors else []), [dot_path], started,
    )
    print(f"wrote {dot_path}")
    return EXIT_OK


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _add_common(sub, name_default):
    sub.add_argument(
        "--workspace",
        default=os.environ.get(WORKSPACE_ENV, "workspace"),
        help=f"workspace directory (default: ${WORKSPACE_ENV} or ./workspace)",
    )
    sub.add_argument("--name", default=name_default, help="output name stem")
    sub.add_argument("--force", action="store_true", help="allow overwriting outputs")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--workers", type=_positive_int, default=1)
    sub.add_argument(
        "--no-timestamp", action="store_true", help="omit the timestamp comment in SVGs"
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="beliefnet", description=__doc__)
    parser.add_argument("--version", action="version", version=f"beliefnet {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("prep", help="recode and split a raw survey CSV")
    p.add_argument("--raw", required=True)
    p.add_argument("--recode", required=True, help="beliefnet-prep config")
    p.add_argument("--themes", default=None, help="beliefnet-themes config")
    p.add_argument("--split", action=argparse.BooleanOptionalAction, default=True,
                   help="emit risk/opportunity subpopulation tables")
    _add_common(p, "survey")
    p.set_defaults(func=cmd_prep)

    p = commands.add_parser("learn", help="bootstrapped structure learning + fit")
    p.add_argument("--data", required=True, help="encoded table CSV")
    p.add_argument("--dict", required=True, help="variable dictionary YAML")
    p.add_argument("--tiers", default=None, help="beliefnet-tiers config")
    p.add_argument("--config", default=None, help="beliefnet-learn config")
    p.add_argument("--bootstrap", type=int, default=None,
                   help="replicates (0 = single search; overrides config)")
    _add_common(p, "model")
    p.set_defaults(func=cmd_learn)

    p = commands.add_parser("fit", help="refit CPTs on an existing structure")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--method", choices=("bayes", "mle"), default="bayes")
    _add_common(p, "refit")
    p.set_defaults(func=cmd_fit)

    p = commands.add_parser("query", help="conditional probability tables")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True, help="beliefnet-query config")
    _add_common(p, "report")
    p.set_defaults(func=cmd_query)

    p = commands.add_parser("sobol", help="first-order Sobol index matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True, help="beliefnet-sobol config")
    _add_common(p, "report")
    p.set_defaults(func=cmd_sobol)

    p = commands.add_parser("scenario", help="multi-evidence scenario posteriors")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True, help="beliefnet-scenarios config")
    _add_common(p, "report")
    p.set_defaults(func=cmd_scenario)

    p = commands.add_parser("sensitivity", help="CPT perturbation tornado + influence")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True, help="beliefnet-sensitivity config")
    _add_common(p, "report")
    p.set_defaults(func=cmd_sensitivity)

    p = commands.add_parser("export", help="Graphviz DOT export")
    p.add_argument("--model", required=True)
    shading = p.add_mutually_exclusive_group()
    shading.add_argument("--colors", default=None, help="YAML map node -> fill color")
    shading.add_argument("--influence", default=None, metavar="VARIABLE=STATE",
                         help="shade nodes by sensitivity to this event")
    _add_common(p, "graph")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with Workspace(args.workspace) as ws:
            return args.func(args, ws)
    except (BeliefnetError, OSError, ValueError) as exc:
        sys.stderr.write(f"beliefnet: error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
