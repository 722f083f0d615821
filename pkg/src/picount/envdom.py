"""Control-flow (environment) analysis.

Each program point gets an abstraction of the environments its threads may
carry: per-variable sets of admissible name labels (a name's label is the
restriction variable that created it) plus equality and disequality
constraints between variables.  Elements are kept in normal form: equalities
are a closed relation, equal variables share the intersected label set,
disequalities are lifted across equality classes and include every pair with
disjoint label sets, and any contradiction collapses to bottom.  Normal form
makes the emptiness test a lookup, which is what lets unsatisfiable transition
sub-cases annihilate in the coalesced product.

The transfer function of a synchronization builds a two-sided "molecule" over
tagged variables (v,?)/(v,!), constrains it with the communication equalities
and the partition-case constraints, and projects the result onto each
launched thread's interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .partition import FULL_NAME, GetVar, PartitionCase, TopHint
from .syntax import FETCH, Label, SystemIndex, Var, label_key

RECV = "?"
SEND = "!"


def _canon_pair(a, b):
    return (a, b) if repr(a) <= repr(b) else (b, a)


class AtomEnv:
    """Label sets plus =/!= constraints over a fixed variable set, in normal form.

    Variables are plain strings at program points and (name, role) pairs
    inside molecules; both sort and compare uniformly via repr.
    """

    __slots__ = ("vars", "is_bottom", "labels", "eqs", "neqs", "_hash")

    def __init__(self, vars, is_bottom, labels, eqs, neqs):
        self.vars = tuple(sorted(vars, key=repr))
        self.is_bottom = is_bottom
        self.labels = labels  # var -> frozenset of name labels
        self.eqs = eqs  # frozenset of canonical pairs, transitively closed
        self.neqs = neqs  # frozenset of canonical pairs, class-lifted
        if is_bottom:
            key = (self.vars, True)
        else:
            key = (
                self.vars,
                False,
                tuple(sorted((v, tuple(sorted(labels[v]))) for v in self.vars)),
                tuple(sorted(eqs)),
                tuple(sorted(neqs)),
            )
        self._hash = hash(key)

    # -- construction -----------------------------------------------------

    @staticmethod
    def bottom(vars) -> "AtomEnv":
        return AtomEnv(vars, True, {}, frozenset(), frozenset())

    @staticmethod
    def make(vars, labels, eqs, neqs) -> "AtomEnv":
        """Normalize an arbitrary description (the closure `rho`)."""
        vars = tuple(sorted(vars, key=repr))
        parent = {v: v for v in vars}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in eqs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb

        classes: dict = {}
        for v in vars:
            classes.setdefault(find(v), []).append(v)

        class_labels = {}
        for rep, members in classes.items():
            s = frozenset(labels[members[0]])
            for m in members[1:]:
                s &= labels[m]
            if not s:
                return AtomEnv.bottom(vars)
            class_labels[rep] = s

        class_neq = set()
        for a, b in neqs:
            ra, rb = find(a), find(b)
            if ra == rb:
                return AtomEnv.bottom(vars)
            class_neq.add(_canon_pair(ra, rb))
        reps = sorted(classes, key=repr)
        for ra, rb in combinations(reps, 2):
            if not (class_labels[ra] & class_labels[rb]):
                class_neq.add(_canon_pair(ra, rb))

        out_labels = {v: class_labels[find(v)] for v in vars}
        out_eqs = set()
        for members in classes.values():
            for a, b in combinations(sorted(members, key=repr), 2):
                out_eqs.add(_canon_pair(a, b))
        out_neqs = set()
        for ra, rb in class_neq:
            for a in classes[ra]:
                for b in classes[rb]:
                    out_neqs.add(_canon_pair(a, b))
        return AtomEnv(vars, False, out_labels, frozenset(out_eqs), frozenset(out_neqs))

    @staticmethod
    def empty() -> "AtomEnv":
        return AtomEnv((), False, {}, frozenset(), frozenset())

    # -- basics -------------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, AtomEnv):
            return NotImplemented
        if self.vars != other.vars:
            return False
        if self.is_bottom or other.is_bottom:
            return self.is_bottom == other.is_bottom
        return (
            self.labels == other.labels
            and self.eqs == other.eqs
            and self.neqs == other.neqs
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if self.is_bottom:
            return f"AtomEnv.bottom({list(self.vars)})"
        ls = ", ".join(f"{v}:{{{','.join(sorted(map(str, self.labels[v])))}}}" for v in self.vars)
        cons = [f"{a}={b}" for a, b in sorted(self.eqs)] + [f"{a}!={b}" for a, b in sorted(self.neqs)]
        return f"AtomEnv([{ls}] {' '.join(cons)})"

    def leq(self, other: "AtomEnv") -> bool:
        if self.is_bottom:
            return True
        if other.is_bottom:
            return False
        return (
            all(self.labels[v] <= other.labels[v] for v in self.vars)
            and other.eqs <= self.eqs
            and other.neqs <= self.neqs
        )

    # -- lattice ------------------------------------------------------------

    @staticmethod
    def join_all(elems) -> "AtomEnv":
        elems = [e for e in elems if not e.is_bottom]
        if not elems:
            raise ValueError("join of bottoms needs an explicit variable set")
        first = elems[0]
        if any(e.vars != first.vars for e in elems):
            raise ValueError("join across different variable sets")
        if len(elems) == 1:
            return first
        labels = {
            v: frozenset().union(*(e.labels[v] for e in elems)) for v in first.vars
        }
        eqs = frozenset.intersection(*(e.eqs for e in elems))
        neqs = frozenset.intersection(*(e.neqs for e in elems))
        # pointwise union / intersection of normal forms is normal
        return AtomEnv(first.vars, False, labels, eqs, neqs)

    def join(self, other: "AtomEnv") -> "AtomEnv":
        if self.is_bottom:
            return other
        if other.is_bottom:
            return self
        return AtomEnv.join_all([self, other])


def normalize(a: AtomEnv) -> AtomEnv:
    """Re-close an element; idempotent on normal forms."""
    if a.is_bottom:
        return a
    return AtomEnv.make(a.vars, a.labels, a.eqs, a.neqs)


# --- Primitives ------------------------------------------------------------


def declare(x, a: AtomEnv) -> AtomEnv:
    """Bind a new restriction variable: label set {x}, distinct from everything."""
    if a.is_bottom:
        return AtomEnv.bottom(a.vars + (x,))
    assert x not in a.labels
    labels = dict(a.labels)
    labels[x] = frozenset({x})
    neqs = set(a.neqs)
    for v in a.vars:
        neqs.add(_canon_pair(x, v))
    return AtomEnv.make(a.vars + (x,), labels, a.eqs, neqs)


def extend(x, a: AtomEnv, universe) -> AtomEnv:
    """Bind a communicated variable about which nothing is known yet."""
    if a.is_bottom:
        return AtomEnv.bottom(a.vars + (x,))
    assert x not in a.labels
    labels = dict(a.labels)
    labels[x] = frozenset(universe)
    return AtomEnv.make(a.vars + (x,), labels, a.eqs, a.neqs)


def fetch_marker(l: Label, a: AtomEnv) -> AtomEnv:
    """Marker allocation is invisible to this domain."""
    return a


def gc(keep, a: AtomEnv) -> AtomEnv:
    """Project onto a variable subset."""
    keep = frozenset(keep)
    assert keep <= set(a.vars), (keep, a.vars)
    if a.is_bottom:
        return AtomEnv.bottom(keep)
    labels = {v: a.labels[v] for v in keep}
    eqs = {p for p in a.eqs if p[0] in keep and p[1] in keep}
    neqs = {p for p in a.neqs if p[0] in keep and p[1] in keep}
    return AtomEnv.make(keep, labels, eqs, neqs)


def pair(a_recv: AtomEnv, a_send: AtomEnv) -> AtomEnv:
    """Tag both sides and merge into one element over (v,?) / (v,!) variables."""
    if a_recv.is_bottom or a_send.is_bottom:
        return AtomEnv.bottom(
            tuple((v, RECV) for v in a_recv.vars) + tuple((v, SEND) for v in a_send.vars)
        )
    labels = {(v, RECV): a_recv.labels[v] for v in a_recv.vars}
    labels.update({(v, SEND): a_send.labels[v] for v in a_send.vars})
    eqs = {_canon_pair((p[0], RECV), (p[1], RECV)) for p in a_recv.eqs}
    eqs |= {_canon_pair((p[0], SEND), (p[1], SEND)) for p in a_send.eqs}
    neqs = {_canon_pair((p[0], RECV), (p[1], RECV)) for p in a_recv.neqs}
    neqs |= {_canon_pair((p[0], SEND), (p[1], SEND)) for p in a_send.neqs}
    return AtomEnv.make(tuple(labels), labels, eqs, neqs)


def _project_role(m: AtomEnv, role: str) -> AtomEnv:
    base = [v for v in m.vars if v[1] == role]
    if m.is_bottom:
        return AtomEnv.bottom(tuple(v[0] for v in base))
    labels = {v[0]: m.labels[v] for v in base}
    eqs = {_canon_pair(p[0][0], p[1][0]) for p in m.eqs if p[0][1] == role and p[1][1] == role}
    neqs = {_canon_pair(p[0][0], p[1][0]) for p in m.neqs if p[0][1] == role and p[1][1] == role}
    return AtomEnv.make(tuple(labels), labels, eqs, neqs)


def fst(m: AtomEnv) -> AtomEnv:
    return _project_role(m, RECV)


def snd(m: AtomEnv) -> AtomEnv:
    return _project_role(m, SEND)


def split(m: AtomEnv) -> tuple[AtomEnv, AtomEnv]:
    return fst(m), snd(m)


EQ = "eq"
NEQ = "neq"
LBL = "lbl"


def sync(cons, m: AtomEnv) -> AtomEnv:
    """Enforce eq/neq/label constraints, then re-normalize."""
    if m.is_bottom:
        return m
    labels = dict(m.labels)
    eqs = set(m.eqs)
    neqs = set(m.neqs)
    for c in cons:
        tag = c[0]
        if tag == EQ:
            eqs.add(_canon_pair(c[1], c[2]))
        elif tag == NEQ:
            if c[1] == c[2]:
                return AtomEnv.bottom(m.vars)
            neqs.add(_canon_pair(c[1], c[2]))
        elif tag == LBL:
            labels[c[1]] = labels[c[1]] & {c[2]}
        else:
            raise ValueError(f"unknown constraint {c!r}")
    return AtomEnv.make(m.vars, labels, eqs, neqs)


# --- Per-program-point map ---------------------------------------------------


@dataclass(frozen=True)
class EnvMap:
    """One AtomEnv over I(l) per program point l."""

    table: tuple[tuple[Label, AtomEnv], ...]

    def __post_init__(self):
        object.__setattr__(self, "_map", dict(self.table))

    @staticmethod
    def of(entries: dict[Label, AtomEnv]) -> "EnvMap":
        return EnvMap(tuple(sorted(entries.items(), key=lambda kv: label_key(kv[0]))))

    def as_dict(self) -> dict[Label, AtomEnv]:
        return dict(self.table)

    def get(self, l: Label) -> AtomEnv:
        return self._map[l]

    def labels_of(self, l: Label, var: Var) -> frozenset:
        a = self.get(l)
        if a.is_bottom:
            return frozenset()
        return a.labels[var]

    def is_bottom(self) -> bool:
        # a map over no program points admits the empty configuration
        return bool(self.table) and all(a.is_bottom for _, a in self.table)


class EnvDomain:
    """Environment abstraction of one system under one partitioning."""

    def __init__(self, index: SystemIndex, gv: GetVar):
        self.index = index
        self.gv = gv
        self.universe = index.name_universe
        self.top_hint = TopHint(self.universe)
        self._cache: dict = {}

    # -- lattice packaging -------------------------------------------------

    def bottom(self) -> EnvMap:
        return EnvMap.of({l: AtomEnv.bottom(sorted(self.index.iface[l])) for l in self.index.labels})

    def init(self) -> EnvMap:
        entries = {}
        for l in self.index.labels:
            if l in self.index.root_labels:
                a = AtomEnv.empty()
                for x in sorted(self.index.iface[l]):
                    a = declare(x, a)
                entries[l] = a
            else:
                entries[l] = AtomEnv.bottom(sorted(self.index.iface[l]))
        return EnvMap.of(entries)

    def join(self, maps) -> EnvMap:
        maps = list(maps)
        if not maps:
            return self.bottom()
        entries = {}
        for l in self.index.labels:
            entries[l] = maps[0].get(l)
            for m in maps[1:]:
                entries[l] = entries[l].join(m.get(l))
        return EnvMap.of(entries)

    def widen(self, a: EnvMap, b: EnvMap) -> EnvMap:
        # each per-label lattice is finite, so join is a widening
        return self.join([a, b])

    def leq(self, a: EnvMap, b: EnvMap) -> bool:
        return all(a.get(l).leq(b.get(l)) for l in self.index.labels)

    # -- transfer -----------------------------------------------------------

    def constraints(self, lq: Label, le: Label, case: PartitionCase):
        index, gv = self.index, self.gv
        cons = [(EQ, (index.chan[lq], RECV), (index.chan[le], SEND))]
        for y, x in zip(index.arg[lq], index.arg[le]):
            cons.append((EQ, (y, RECV), (x, SEND)))

        def formal(member, key):
            return (gv.keyvar(member[0], key), member[1])

        if gv.mode == FULL_NAME:
            for c in case.classes:
                members = sorted(c, key=repr)
                for m1, m2 in zip(members, members[1:]):
                    for k in gv.keys:
                        cons.append((EQ, formal(m1, k), formal(m2, k)))
            if len(gv.stable) == 1:
                (k,) = tuple(gv.stable)
                for c1, c2 in combinations(case.classes, 2):
                    for m1 in c1:
                        for m2 in c2:
                            cons.append((NEQ, formal(m1, k), formal(m2, k)))
            for c, unit in case.items():
                for m in c:
                    for ki, k in enumerate(gv.keys):
                        cons.append((LBL, formal(m, k), unit[ki]))
        else:
            # units carry no label data; only identical key variables forced
            # into distinct classes are contradictory
            for c1, c2 in combinations(case.classes, 2):
                for m1 in c1:
                    for m2 in c2:
                        for k in gv.keys:
                            f1, f2 = formal(m1, k), formal(m2, k)
                            if f1 == f2:
                                cons.append((NEQ, f1, f2))
        return cons

    def post(self, env: EnvMap, lq: Label, le: Label, case: PartitionCase) -> EnvMap:
        delta = self.post_delta(env.get(lq), env.get(le), lq, le, case)
        if delta is None:
            return self.bottom()
        entries = env.as_dict()
        for l, a in delta.items():
            entries[l] = entries[l].join(a)
        return EnvMap.of(entries)

    def post_delta(
        self, input0: AtomEnv, output0: AtomEnv, lq: Label, le: Label, case: PartitionCase
    ) -> dict[Label, AtomEnv] | None:
        """Environments of the launched threads, or None when the sub-case is
        unsatisfiable."""
        index = self.index
        if input0.is_bottom or output0.is_bottom:
            return None
        cons = self.constraints(lq, le, case)
        key = (lq, le, frozenset(cons), input0, output0)
        if key in self._cache:
            return self._cache[key]
        result = self._post_delta(input0, output0, lq, le, cons)
        self._cache[key] = result
        return result

    def _post_delta(self, input0, output0, lq, le, cons):
        index = self.index
        input1 = fetch_marker(le, input0) if index.type[lq] == FETCH else input0
        a_recv = input1
        for y in index.arg[lq]:
            a_recv = extend(y, a_recv, self.universe)
        for u in sorted(index.fresh[lq]):
            a_recv = declare(u, a_recv)
        a_send = output0
        for v in sorted(index.fresh[le]):
            a_send = declare(v, a_send)
        mol = pair(a_recv, a_send)
        mol = sync(cons, mol)
        if mol.is_bottom:
            return None
        mol_recv, mol_send = split(mol)
        delta = {}
        for l in index.beta_cont(lq):
            delta[l] = gc(index.iface[l], mol_recv)
        for l in index.beta_cont(le):
            delta[l] = gc(index.iface[l], mol_send)
        return delta

    # -- concretization checks (oracle + tests) -----------------------------

    def thread_ok(self, env: EnvMap, thread) -> bool:
        a = env.get(thread.label)
        return atom_admits(a, thread.env)


def atom_admits(a: AtomEnv, env: dict) -> bool:
    """Does a concrete environment satisfy an atom's labels and constraints?"""
    if a.is_bottom:
        return False
    for v in a.vars:
        if env[v][0] not in a.labels[v]:
            return False
    for x, y in a.eqs:
        if env[x] != env[y]:
            return False
    for x, y in a.neqs:
        if env[x] == env[y]:
            return False
    return True
