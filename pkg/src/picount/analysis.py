"""Batch analysis front end: run the product analysis, evaluate queries,
cross-check against bounded concrete exploration, render reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import numdom
from .concrete import enabled_steps, initial_config, step_units
from .contents import CUMap, describe_unit, unit_vector
from .engine import Analysis, FixpointResult, fix_components
from .envdom import EnvMap, atom_admits
from .partition import (
    FULL_NAME,
    MARKER_ONLY,
    TRIVIAL_UNIT,
    GetVar,
    getvar_channel,
    getvar_marker,
    load_partition_spec,
)
from .syntax import Label, SourceError, SystemIndex, fmt_label, load_system


@dataclass
class Query:
    """Bounded linear form over one abstract unit's counters."""

    unit_var: str
    terms: tuple[tuple[int, str, object], ...]  # (coeff, kind 'x'|'y'|'z', ref)
    bound: int
    text: str
    mutex: bool = False


def parse_query(text: str, index: SystemIndex) -> Query:
    """`mutex unit <var> over {l,...}` or
    `unit <var>: <k>*x@<label> (+ <k>*x@<label>)* <= <bound>`."""

    def resolve_label(tok: str) -> Label:
        lab: Label = int(tok) if tok.isdigit() else tok
        if lab not in set(index.labels):
            raise SourceError(f"query names unknown label {tok}")
        return lab

    s = text.strip()
    if s.startswith("mutex"):
        rest = s[len("mutex"):].strip()
        if not rest.startswith("unit "):
            raise SourceError(f"malformed query {text!r}")
        rest = rest[len("unit "):]
        var, _, labels_part = rest.partition(" over ")
        var = var.strip()
        labels_part = labels_part.strip()
        if not (labels_part.startswith("{") and labels_part.endswith("}")):
            raise SourceError(f"malformed mutex query {text!r}")
        labels = [resolve_label(t.strip()) for t in labels_part[1:-1].split(",") if t.strip()]
        terms = tuple((1, "x", l) for l in labels)
        return Query(var, terms, 1, text, mutex=True)
    if not s.startswith("unit "):
        raise SourceError(f"malformed query {text!r}")
    rest = s[len("unit "):]
    var, colon, expr = rest.partition(":")
    if not colon:
        raise SourceError(f"malformed query {text!r}")
    lhs, le, bound_part = expr.partition("<=")
    if not le:
        raise SourceError(f"query must bound the form with <= : {text!r}")
    terms = []
    for piece in lhs.split("+"):
        piece = piece.strip()
        if not piece:
            raise SourceError(f"empty term in query {text!r}")
        coeff_part, star, var_part = piece.partition("*")
        if star:
            coeff = int(coeff_part.strip())
        else:
            coeff, var_part = 1, piece
        var_part = var_part.strip()
        if var_part.startswith("x@"):
            terms.append((coeff, "x", resolve_label(var_part[2:])))
        elif var_part.startswith(("y@(", "z@(")) and var_part.endswith(")"):
            kind = var_part[0]
            inner = var_part[3:-1]
            lq, comma, le_ = inner.partition(",")
            if not comma:
                raise SourceError(f"malformed pair in query {text!r}")
            terms.append((coeff, kind, (resolve_label(lq.strip()), resolve_label(le_.strip()))))
        else:
            raise SourceError(f"unknown query variable {var_part!r}")
    return Query(var.strip(), tuple(terms), int(bound_part.strip()), text)


def query_unit(gv: GetVar, query: Query) -> tuple:
    """Abstract unit a query addresses: every key bound to the named variable."""
    if gv.mode == MARKER_ONLY:
        return TRIVIAL_UNIT
    return tuple(query.unit_var for _ in gv.keys)


def query_expr(layout, query: Query) -> dict[int, int]:
    expr: dict[int, int] = {}
    for coeff, kind, ref in query.terms:
        if kind == "x":
            i = layout.x(ref)
        elif kind == "y":
            i = layout.y(ref)
        else:
            i = layout.z(ref)
        expr[i] = expr.get(i, 0) + coeff
    return expr


# --- Configuration and reports ------------------------------------------------


@dataclass
class AnalysisConfig:
    path: str
    partition: str = "chan"  # 'chan' | 'marker' | path to a JSON spec
    abstraction: str = "product"  # 'product' | 'env' | 'contents'
    max_iter: int = 1000
    queries: tuple[str, ...] = ()
    max_configs: int = 5000
    max_depth: int = 1 << 30
    report_format: str = "text"
    trace: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise SourceError("max iterations must be at least 1")


def _resolve_partition(spec: str, index: SystemIndex) -> GetVar:
    if spec == "chan":
        return getvar_channel(index)
    if spec == "marker":
        return getvar_marker(index)
    return load_partition_spec(spec, index)


@dataclass
class Report:
    path: str
    partition: str
    abstraction: str
    iterations: int
    stabilized: bool
    warnings: list[str]
    units: list[dict]
    env: list[dict]
    queries: list[dict]
    trace: list[dict] = field(default_factory=list)

    @property
    def all_proved(self) -> bool:
        return all(q["result"] == "proved" for q in self.queries)

    def to_json(self) -> str:
        payload = {
            "input": self.path,
            "partition": self.partition,
            "abstraction": self.abstraction,
            "iterations": self.iterations,
            "stabilized": self.stabilized,
            "warnings": self.warnings,
            "units": self.units,
            "env": self.env,
            "queries": self.queries,
        }
        if self.trace:
            payload["trace"] = self.trace
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [
            f"system      {self.path}",
            f"partition   {self.partition}",
            f"abstraction {self.abstraction}",
            f"iterations  {self.iterations} ({'stabilized' if self.stabilized else 'NOT stabilized'})",
        ]
        for w in self.warnings:
            lines.append(f"warning: {w}")
        if self.units:
            lines.append("")
            lines.append("computation units:")
            for u in self.units:
                lines.append(f"  {u['unit']}:")
                for c in u["constraints"]:
                    lines.append(f"    {c}")
        if self.env:
            lines.append("")
            lines.append("environments:")
            for e in self.env:
                lines.append(f"  {e['label']}: {e['summary']}")
        if self.queries:
            lines.append("")
            lines.append("queries:")
            for q in self.queries:
                lines.append(f"  [{q['result']:>7}] {q['query']}")
        return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    report: Report
    analysis: Analysis
    fix: FixpointResult
    env_fix: EnvMap | None
    con_fix: CUMap | None
    exit_code: int


def _env_entry(label, a) -> dict:
    if a.is_bottom:
        return {"label": fmt_label(label), "reachable": False, "summary": "unreachable"}
    bindings = {v: sorted(map(str, a.labels[v])) for v in a.vars}
    constraints = [f"{x} = {y}" for x, y in sorted(a.eqs)] + [
        f"{x} != {y}" for x, y in sorted(a.neqs)
    ]
    parts = [f"{v}:{{{','.join(bindings[v])}}}" for v in a.vars]
    cons = [c.replace(" ", "") for c in constraints]
    return {
        "label": fmt_label(label),
        "reachable": True,
        "bindings": bindings,
        "constraints": constraints,
        "summary": " ".join(parts + cons) if (parts or cons) else "{}",
    }


def run(config: AnalysisConfig) -> RunResult:
    """Parse, analyze, prove: exit code 0 all proved, 1 some unknown, 2 bad input."""
    try:
        with open(config.path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SourceError(f"cannot read {config.path}: {exc}") from exc
    index = load_system(text)
    gv = _resolve_partition(config.partition, index)
    queries = [parse_query(q, index) for q in config.queries]
    for q in queries:
        if gv.mode == FULL_NAME and q.unit_var not in index.name_universe:
            raise SourceError(f"query unit {q.unit_var} is not a restriction variable")

    analysis = Analysis.build(index, gv)
    fix = analysis.run(config.abstraction, config.max_iter, keep_trace=config.trace)
    env_fix, con_fix = fix_components(config.abstraction, fix.element)

    units_report = []
    if con_fix is not None:
        shown = set(con_fix.units()) | {query_unit(gv, q) for q in queries}
        for unit in sorted(shown, key=repr):
            units_report.append(
                {
                    "unit": describe_unit(gv, unit),
                    "constraints": numdom.pretty_constraints(
                        con_fix.accum(unit, analysis.layout)
                    )
                    or ["all counters = 0"],
                }
            )
        units_report.append(
            {
                "unit": "(untouched)",
                "constraints": numdom.pretty_constraints(con_fix.default)
                or ["all counters = 0"],
            }
        )
    env_report = []
    if env_fix is not None:
        for l in index.labels:
            env_report.append(_env_entry(l, env_fix.get(l)))

    query_report = []
    for q in queries:
        if con_fix is None:
            result = "unknown"
        else:
            unit = query_unit(gv, q)
            proved = analysis.con_dom.query(
                con_fix, unit, query_expr(analysis.layout, q), q.bound
            )
            result = "proved" if proved else "unknown"
        query_report.append({"query": q.text, "result": result})

    report = Report(
        path=config.path,
        partition=config.partition,
        abstraction=config.abstraction,
        iterations=fix.iterations,
        stabilized=fix.stabilized,
        warnings=list(index.warnings),
        units=units_report,
        env=env_report,
        queries=query_report,
        trace=fix.trace,
    )
    exit_code = 0 if report.all_proved else 1
    return RunResult(report, analysis, fix, env_fix, con_fix, exit_code)


# --- Soundness harness ---------------------------------------------------------


@dataclass
class OracleReport:
    configs_visited: int
    states_visited: int
    truncated: bool
    violations: list[str]

    def to_text(self) -> str:
        lines = [
            f"configurations {self.configs_visited} "
            f"({'truncated' if self.truncated else 'exhaustive'})",
            f"instrumented states {self.states_visited}",
            f"violations {len(self.violations)}",
        ]
        lines.extend(f"  {v}" for v in self.violations[:50])
        return "\n".join(lines) + "\n"


def verify_configs(
    analysis: Analysis,
    env_fix: EnvMap | None,
    con_fix: CUMap | None,
    max_configs: int,
    max_depth: int,
    max_violations: int = 100,
) -> OracleReport:
    """Walk the concrete state space; flag any thread environment or per-unit
    count vector outside the corresponding fixpoint component.

    Contents checking is trace-sensitive (step counters accumulate along
    paths), so the walk is over (configuration, per-unit counters) states.
    """
    index, gv, layout = analysis.index, analysis.gv, analysis.layout
    violations: list[str] = []
    checked_env: set = set()
    checked_vec: set = set()
    parents: dict = {}  # state -> (parent state, step pair), for counterexamples

    def trace_of(state) -> str:
        pairs = []
        while state in parents:
            state, pair = parents[state]
            pairs.append(f"({fmt_label(pair[0])},{fmt_label(pair[1])})")
        return " -> ".join(reversed(pairs)) if pairs else "(initial configuration)"

    def check_env(config, state):
        if env_fix is None:
            return
        for t in config:
            if t in checked_env:
                continue
            checked_env.add(t)
            if not atom_admits(env_fix.get(t.label), t.env):
                violations.append(
                    f"env: thread {t!r} outside abstraction of point "
                    f"{fmt_label(t.label)}; trace {trace_of(state)}"
                )

    def check_units(config, counters, state):
        if con_fix is None:
            return
        units_here: dict[tuple, dict] = {}
        for t in config:
            u = gv.concrete_unit(t.label, t.env)
            units_here.setdefault(u, {})[t.label] = units_here.get(u, {}).get(t.label, 0) + 1
        for u in counters:
            units_here.setdefault(u, {})
        for u, counts in units_here.items():
            vec = unit_vector(layout, counts, counters.get(u, {}))
            abs_unit = gv.alpha_unit(u)
            key = (abs_unit, tuple(sorted(vec.items())))
            if key in checked_vec:
                continue
            checked_vec.add(key)
            if not analysis.con_dom.admits_vector(con_fix, abs_unit, vec):
                violations.append(
                    f"contents: unit {abs_unit} vector "
                    f"{ {layout.pretty(i): v for i, v in sorted(vec.items())} } rejected; "
                    f"trace {trace_of(state)}"
                )

    init = initial_config(index)
    init_state = (init, ())
    visited = {init_state}
    frontier = [init_state]
    configs_seen = {init}
    check_env(init, init_state)
    check_units(init, {}, init_state)
    truncated = False
    depth = 0
    while frontier and depth < max_depth and len(violations) < max_violations:
        depth += 1
        nxt = []
        for source_state in frontier:
            config, counter_key = source_state
            counters = {u: dict(pairs) for u, pairs in counter_key}
            for step in enabled_steps(index, config):
                new_counters = {u: dict(d) for u, d in counters.items()}
                for u in set(step_units(step, gv).values()):
                    per = new_counters.setdefault(u, {})
                    per[step.pair] = per.get(step.pair, 0) + 1
                state = (
                    step.target,
                    tuple(
                        sorted(
                            (
                                (u, tuple(sorted(d.items(), key=repr)))
                                for u, d in new_counters.items()
                            ),
                            key=repr,
                        )
                    ),
                )
                if state in visited:
                    continue
                if len(visited) >= max_configs:
                    truncated = True
                    continue
                visited.add(state)
                parents[state] = (source_state, step.pair)
                configs_seen.add(step.target)
                check_env(step.target, state)
                check_units(step.target, new_counters, state)
                nxt.append(state)
        frontier = nxt
    if frontier:
        truncated = True
    return OracleReport(
        configs_visited=len(configs_seen),
        states_visited=len(visited),
        truncated=truncated,
        violations=violations,
    )


def check_soundness(config: AnalysisConfig) -> tuple[OracleReport, RunResult]:
    result = run(config)
    report = verify_configs(
        result.analysis,
        result.env_fix,
        result.con_fix,
        max_configs=config.max_configs,
        max_depth=config.max_depth,
    )
    return report, result
