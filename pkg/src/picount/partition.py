"""Thread partitioning and local trace partitioning.

A partitioning strategy maps every program point to a tuple of key variables;
a thread's computation unit is the tuple of channel names (or, in marker-only
mode, just their markers) bound to those variables.  Abstract units erase
markers, giving finitely many classes.

Every synchronization involves the two interacting threads plus all threads
they launch; `enumerate_contexts` splits such a transition into sub-cases
(an equivalence relation over that roster plus an abstract unit per class).
The enumeration is pruned in two semantics-preserving ways:

* members whose key variables are identical once communication equalities are
  applied always share a unit, so they are never separated;
* a class whose members admit no common name label under the supplied
  control-flow hint can only produce a bottom transfer, so it is dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .syntax import (
    FETCH,
    INPUT,
    OUTPUT,
    Label,
    SourceError,
    SystemIndex,
    Var,
    fmt_label,
    label_key,
)

FULL_NAME = "full-name"
MARKER_ONLY = "marker-only"

Member = tuple[Label, str]  # (label, '?' or '!')

TRIVIAL_UNIT: tuple = ("*",)


def member_key(m: Member):
    return (0 if m[1] == "?" else 1, label_key(m[0]))


def fmt_member(m: Member) -> str:
    return f"({fmt_label(m[0])},{m[1]})"


@dataclass(frozen=True)
class GetVar:
    """Partitioning strategy: per-label key variables plus the stable key set."""

    keys: tuple[str, ...]
    table: dict[Label, dict[str, Var]]
    stable: frozenset[str]
    mode: str = FULL_NAME

    def __post_init__(self):
        if self.mode not in (FULL_NAME, MARKER_ONLY):
            raise ValueError(f"unknown partition mode {self.mode}")
        if not self.stable <= set(self.keys):
            raise ValueError("stable keys must be a subset of the key set")

    def keyvar(self, label: Label, key: str) -> Var:
        return self.table[label][key]

    def concrete_unit(self, label: Label, env: dict) -> tuple:
        names = tuple(env[self.table[label][k]] for k in self.keys)
        if self.mode == MARKER_ONLY:
            return tuple(n[1] for n in names)
        return names

    def alpha_unit(self, unit: tuple) -> tuple:
        if self.mode == MARKER_ONLY:
            return TRIVIAL_UNIT
        return tuple(name[0] for name in unit)

    def abstract_unit_of_vars(self, by_key: dict[str, Var]) -> tuple:
        if self.mode == MARKER_ONLY:
            return TRIVIAL_UNIT
        return tuple(by_key[k] for k in self.keys)


def _validated(index: SystemIndex, gv: GetVar) -> GetVar:
    for l in index.labels:
        for k in gv.keys:
            v = gv.table.get(l, {}).get(k)
            if v is None:
                raise SourceError(f"partition map misses key {k} at label {fmt_label(l)}")
            if v not in index.iface[l]:
                raise SourceError(
                    f"partition key {k} at label {fmt_label(l)} names {v}, "
                    f"which is not free there"
                )
    return gv


def getvar_channel(index: SystemIndex) -> GetVar:
    """Single-key strategy grouping threads by the channel they operate on."""
    table = {l: {"b": index.chan[l]} for l in index.labels}
    return _validated(index, GetVar(("b",), table, frozenset({"b"}), FULL_NAME))


def getvar_marker(index: SystemIndex) -> GetVar:
    """Group threads by the marker of the declaring instance of their channel."""
    table = {l: {"b": index.chan[l]} for l in index.labels}
    return _validated(index, GetVar(("b",), table, frozenset({"b"}), MARKER_ONLY))


def load_partition_spec(path: str, index: SystemIndex) -> GetVar:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    keys = tuple(raw["keys"])
    stable = frozenset(raw.get("stable", list(keys)))
    mode = raw.get("mode", FULL_NAME)
    table: dict[Label, dict[str, Var]] = {}
    by_text = {fmt_label(l): l for l in index.labels}
    for text, assignment in raw["map"].items():
        if text not in by_text:
            raise SourceError(f"partition spec names unknown label {text}")
        table[by_text[text]] = dict(assignment)
    return _validated(index, GetVar(keys, table, stable, mode))


def alpha_unit(gv: GetVar, unit: tuple) -> tuple:
    return gv.alpha_unit(unit)


# --- Step rosters and partition cases -------------------------------------


def step_roster(index: SystemIndex, lq: Label, le: Label) -> tuple[Member, ...]:
    """The 2 + n? + n! threads taking part in a (lq, le) synchronization."""
    recv = [(lq, "?")] + [(l, "?") for l in index.sorted_beta_cont(lq)]
    send = [(le, "!")] + [(l, "!") for l in index.sorted_beta_cont(le)]
    return tuple(recv + send)


@dataclass(frozen=True)
class PartitionCase:
    """Equivalence classes over a step roster, each tagged with its abstract unit."""

    classes: tuple[frozenset, ...]
    assign: tuple[tuple, ...]

    @staticmethod
    def make(classes, assign) -> "PartitionCase":
        order = sorted(range(len(classes)), key=lambda i: min(member_key(m) for m in classes[i]))
        return PartitionCase(
            tuple(classes[i] for i in order), tuple(assign[i] for i in order)
        )

    def __hash__(self):
        return hash((self.classes, self.assign))

    def class_of(self, member: Member) -> frozenset:
        for c in self.classes:
            if member in c:
                return c
        raise KeyError(member)

    def unit_of(self, member: Member) -> tuple:
        for c, a in zip(self.classes, self.assign):
            if member in c:
                return a
        raise KeyError(member)

    def items(self):
        return zip(self.classes, self.assign)

    def related(self, m1: Member, m2: Member) -> bool:
        return self.class_of(m1) is self.class_of(m2)

    def describe(self) -> str:
        parts = []
        for c, a in self.items():
            members = " ".join(fmt_member(m) for m in sorted(c, key=member_key))
            unit = "*" if a == TRIVIAL_UNIT else ",".join(a)
            parts.append(f"{{{members}}}->{unit}")
        return " ".join(parts)


class TopHint:
    """No control-flow information: any restriction name fits anywhere."""

    def __init__(self, universe):
        self.universe = frozenset(universe)

    def labels_of(self, label: Label, var: Var):
        return self.universe


class _UF:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        while p != x:
            self.parent[x] = p = self.parent.setdefault(p, p)
            x, p = p, self.parent[p]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _com_classes(index: SystemIndex, lq: Label, le: Label) -> _UF:
    """Formal variables identified by the synchronization itself."""
    uf = _UF()
    uf.union((index.chan[lq], "?"), (index.chan[le], "!"))
    for y, x in zip(index.arg[lq], index.arg[le]):
        uf.union((y, "?"), (x, "!"))
    return uf


def _candidates(index, gv, hint, lq: Label, le: Label, member: Member, key: str):
    """Name labels the hint allows for this member's key variable; None in
    marker-only mode (units carry no label information)."""
    if gv.mode == MARKER_ONLY:
        return None
    l, role = member
    parent = lq if role == "?" else le
    v = gv.keyvar(l, key)
    if l == parent:
        return hint.labels_of(parent, v)
    if v in index.fresh[parent]:
        return frozenset({v})
    if role == "?" and v in index.arg[lq]:
        x = index.arg[le][index.arg[lq].index(v)]
        return hint.labels_of(le, x)
    if v in index.iface[parent]:
        return hint.labels_of(parent, v)
    raise AssertionError(f"key variable {v} of {fmt_member(member)} has no source")


def _forced_groups(index, gv, lq, le, roster):
    """Pre-merge roster members that provably share a unit, and record pairs of
    groups that provably differ (marker-only mode, replicated receivers)."""
    uf = _com_classes(index, lq, le)

    def signature(m: Member):
        l, role = m
        return tuple(uf.find((gv.keyvar(l, k), role)) for k in gv.keys)

    groups: dict[tuple, list[Member]] = {}
    for m in roster:
        groups.setdefault(signature(m), []).append(m)
    group_list = [tuple(ms) for _, ms in sorted(groups.items(), key=lambda kv: str(kv[0]))]

    forced_apart: set[tuple[int, int]] = set()
    if gv.mode == MARKER_ONLY:
        # Names restricted inside a continuation all carry that launch's marker,
        # so members keyed by them collapse; a replicated receiver mints a marker
        # longer than any live one, so its fresh group differs from every group
        # keyed by pre-existing names.
        def freshness(ms):
            kinds = set()
            for (l, role) in ms:
                parent = lq if role == "?" else le
                for k in gv.keys:
                    kinds.add(role if gv.keyvar(l, k) in index.fresh[parent] else "old")
            return kinds

        merged = _UF()
        fresh_kind = [freshness(ms) for ms in group_list]
        for i, ki in enumerate(fresh_kind):
            for j in range(i + 1, len(group_list)):
                if ki == {"?"} and fresh_kind[j] == {"?"}:
                    merged.union(i, j)
                if ki == {"!"} and fresh_kind[j] == {"!"}:
                    merged.union(i, j)
        regroup: dict[int, list[Member]] = {}
        for i, ms in enumerate(group_list):
            regroup.setdefault(merged.find(i), []).extend(ms)
        group_list = [tuple(ms) for _, ms in sorted(regroup.items())]
        fresh_kind = [freshness(ms) for ms in group_list]
        fetching = index.type[lq] == FETCH
        for i, ki in enumerate(fresh_kind):
            for j in range(i + 1, len(group_list)):
                kj = fresh_kind[j]
                if not fetching:
                    continue
                if (ki == {"?"} and "?" not in kj) or (kj == {"?"} and "?" not in ki):
                    forced_apart.add((i, j))
    return group_list, forced_apart


def enumerate_contexts(index: SystemIndex, gv: GetVar, lq: Label, le: Label, hint):
    """Yield the partition cases of the (lq, le) transition that the hint does
    not trivially contradict, deterministically."""
    if index.type[lq] not in (INPUT, FETCH) or index.type[le] != OUTPUT:
        raise ValueError(f"({fmt_label(lq)},{fmt_label(le)}) is not a receiver/sender pair")
    if len(index.arg[lq]) != len(index.arg[le]):
        raise ValueError("arity mismatch")
    roster = step_roster(index, lq, le)
    groups, forced_apart = _forced_groups(index, gv, lq, le, roster)

    if gv.mode == FULL_NAME:
        cand = []
        for ms in groups:
            per_key = []
            for k in gv.keys:
                cs = None
                for m in ms:
                    c = _candidates(index, gv, hint, lq, le, m, k)
                    cs = c if cs is None else cs & c
                per_key.append(cs)
            if any(not c for c in per_key):
                return  # a mandatory class has no admissible unit: every case is bottom
            cand.append(per_key)
    else:
        cand = [None] * len(groups)

    n = len(groups)

    def merged_cand(block):
        if gv.mode == MARKER_ONLY:
            return None
        per_key = []
        for ki in range(len(gv.keys)):
            cs = None
            for g in block:
                c = cand[g][ki]
                cs = c if cs is None else cs & c
            if not cs:
                return None
            per_key.append(cs)
        return per_key

    # Restricted-growth enumeration of partitions of the forced groups.
    def build(i, blocks):
        if i == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            if any((min(g, i), max(g, i)) in forced_apart for g in b):
                continue
            b.append(i)
            if gv.mode == MARKER_ONLY or merged_cand(b) is not None:
                yield from build(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from build(i + 1, blocks)
        blocks.pop()

    for blocks in build(0, []):
        classes = tuple(
            frozenset(m for g in block for m in groups[g]) for block in blocks
        )
        if gv.mode == MARKER_ONLY:
            yield PartitionCase.make(classes, tuple(TRIVIAL_UNIT for _ in classes))
            continue
        options = [merged_cand(block) for block in blocks]
        # every admissible label choice per class and key, in sorted order
        def assignments(ci):
            if ci == len(classes):
                yield []
                return
            per_key = options[ci]
            def keys_choice(ki):
                if ki == len(gv.keys):
                    yield []
                    return
                for v in sorted(per_key[ki]):
                    for rest in keys_choice(ki + 1):
                        yield [v] + rest
            for unit in keys_choice(0):
                for rest in assignments(ci + 1):
                    yield [tuple(unit)] + rest

        for assign in assignments(0):
            yield PartitionCase.make(classes, tuple(assign))
