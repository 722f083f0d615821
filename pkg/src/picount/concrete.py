"""Instrumented concrete semantics.

Threads carry a replication marker and an explicit environment, so recursive
instances stay distinguishable without alpha-conversion: a channel name is the
pair (restriction variable, marker of the declaring thread).  A synchronization
consumes the output thread, consumes the input thread unless it is replicated,
and launches one thread per parallel component of each continuation; threads
launched by a replicated input are tagged with the sender's label prepended to
the sender's marker.

`explore` gives a deterministic bounded breadth-first enumeration of reachable
configurations, used as the ground-truth oracle by the soundness harness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .syntax import (
    FETCH,
    INPUT,
    OUTPUT,
    Label,
    Process,
    SystemIndex,
    Var,
    beta,
    fmt_label,
    label_key,
)

Marker = tuple[Label, ...]
Name = tuple[Var, Marker]  # (restriction variable, marker of declaring thread)

EPSILON: Marker = ()


class InternalError(AssertionError):
    """A semantic invariant (marker unambiguity, env totality) was violated."""


class Thread:
    """One running prefix: (label, marker, environment over its interface)."""

    __slots__ = ("label", "marker", "env", "_key", "_hash")

    def __init__(self, label: Label, marker: Marker, env: dict[Var, Name]):
        self.label = label
        self.marker = marker
        self.env = env
        self._key = (label, marker, tuple(sorted(env.items())))
        self._hash = hash(self._key)

    def __eq__(self, other):
        return isinstance(other, Thread) and self._key == other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        env = ", ".join(f"{v}->{n[0]}@{list(n[1])}" for v, n in sorted(self.env.items()))
        return f"Thread({fmt_label(self.label)}, {list(self.marker)}, [{env}])"

    def sort_key(self):
        return (label_key(self.label), _marker_key(self.marker), self._key[2])


def _marker_key(m: Marker):
    return tuple(label_key(l) for l in m)


Configuration = frozenset  # of Thread


def make_config(threads) -> Configuration:
    threads = frozenset(threads)
    seen = set()
    for t in threads:
        k = (t.label, t.marker)
        if k in seen:
            raise InternalError(f"two threads share (label, marker) {k}")
        seen.add(k)
    return threads


def launch(index: SystemIndex, p: Process, marker: Marker, env: dict[Var, Name]) -> set[Thread]:
    """Threads spawned when `p` starts under `marker`: inherited bindings come
    from `env`, every other interface variable is a restriction bound here and
    gets the name (var, marker)."""
    out = set()
    for l in beta(p):
        e = {}
        for v in index.iface[l]:
            e[v] = env[v] if v in env else (v, marker)
        out.add(Thread(l, marker, e))
    return out


def initial_config(index: SystemIndex) -> Configuration:
    return make_config(launch(index, index.root, EPSILON, {}))


@dataclass(frozen=True)
class ConcreteStep:
    source: Configuration
    receiver: Thread
    sender: Thread
    target: Configuration
    pair: tuple[Label, Label]
    launched_recv: tuple[Thread, ...]
    launched_send: tuple[Thread, ...]

    def sort_key(self):
        return (
            label_key(self.pair[0]),
            label_key(self.pair[1]),
            _marker_key(self.receiver.marker),
            _marker_key(self.sender.marker),
        )


def _apply(index: SystemIndex, config: Configuration, recv: Thread, send: Thread) -> ConcreteStep:
    lq, le = recv.label, send.label
    ys, xs = index.arg[lq], index.arg[le]
    passed = {y: send.env[x] for y, x in zip(ys, xs)}
    recv_env = dict(recv.env)
    recv_env.update(passed)
    if index.type[lq] == FETCH:
        new_marker: Marker = (le,) + send.marker
        kept = config - {send}
    else:
        new_marker = recv.marker
        kept = config - {recv, send}
    ct_recv = launch(index, index.cont[lq], new_marker, recv_env)
    ct_send = launch(index, index.cont[le], send.marker, dict(send.env))
    target = make_config(kept | ct_recv | ct_send)
    return ConcreteStep(
        source=config,
        receiver=recv,
        sender=send,
        target=target,
        pair=(lq, le),
        launched_recv=tuple(sorted(ct_recv, key=Thread.sort_key)),
        launched_send=tuple(sorted(ct_send, key=Thread.sort_key)),
    )


def enabled_steps(index: SystemIndex, config: Configuration) -> list[ConcreteStep]:
    """All synchronizations enabled in `config`, in a canonical order."""
    receivers = [t for t in config if index.type[t.label] in (INPUT, FETCH)]
    senders = [t for t in config if index.type[t.label] == OUTPUT]
    steps = []
    for r in receivers:
        rc = r.env[index.chan[r.label]]
        rn = len(index.arg[r.label])
        for s in senders:
            if len(index.arg[s.label]) != rn:
                continue
            if s.env[index.chan[s.label]] != rc:
                continue
            steps.append(_apply(index, config, r, s))
    steps.sort(key=ConcreteStep.sort_key)
    return steps


@dataclass
class ExploreResult:
    configs: set[Configuration]
    truncated: bool
    initial: Configuration
    steps: list[ConcreteStep] = field(default_factory=list)  # one record per explored edge


def explore(
    index: SystemIndex,
    max_configs: int = 10000,
    max_depth: int = 1 << 30,
    keep_steps: bool = False,
) -> ExploreResult:
    """Deterministic BFS over reachable configurations, bounded by both the
    number of distinct configurations and the transition depth."""
    if max_configs <= 0 or max_depth <= 0:
        raise ValueError("exploration limits must be positive")
    init = initial_config(index)
    visited = {init}
    frontier = [init]
    steps: list[ConcreteStep] = []
    truncated = False
    depth = 0
    while frontier and depth < max_depth:
        depth += 1
        nxt = []
        for config in frontier:
            for step in enabled_steps(index, config):
                if keep_steps:
                    steps.append(step)
                if step.target in visited:
                    continue
                if len(visited) >= max_configs:
                    truncated = True
                    continue
                visited.add(step.target)
                nxt.append(step.target)
        frontier = nxt
    if frontier:
        truncated = True
    return ExploreResult(configs=visited, truncated=truncated, initial=init, steps=steps)


# --- Oracle dump (JSON lines, one record per configuration) ---------------


def thread_to_json(t: Thread) -> list:
    env = {v: [n[0], [fmt_label(l) for l in n[1]]] for v, n in sorted(t.env.items())}
    return [fmt_label(t.label), [fmt_label(l) for l in t.marker], env]


def dump_configs(configs, stream):
    ordered = sorted(configs, key=lambda c: sorted(t.sort_key() for t in c))
    for config in ordered:
        record = [thread_to_json(t) for t in sorted(config, key=Thread.sort_key)]
        stream.write(json.dumps(record, sort_keys=True) + "\n")


# --- Step abstraction ------------------------------------------------------


def step_units(step: ConcreteStep, gv) -> dict[tuple[Label, str], tuple]:
    """Concrete computation unit of every thread taking part in `step`."""
    units = {}

    def unit_of(thread: Thread):
        return gv.concrete_unit(thread.label, thread.env)

    units[(step.receiver.label, "?")] = unit_of(step.receiver)
    units[(step.sender.label, "!")] = unit_of(step.sender)
    for t in step.launched_recv:
        units[(t.label, "?")] = unit_of(t)
    for t in step.launched_send:
        units[(t.label, "!")] = unit_of(t)
    return units


def alpha_step(step: ConcreteStep, gv):
    """Partition case realized by a concrete step: roster members grouped by
    equal concrete units, each class mapped to its abstract unit."""
    from .partition import PartitionCase

    units = step_units(step, gv)
    by_unit: dict[tuple, list] = {}
    for member in sorted(units, key=lambda m: (0 if m[1] == "?" else 1, label_key(m[0]))):
        by_unit.setdefault(units[member], []).append(member)
    classes = []
    assign = []
    for unit, members in sorted(by_unit.items(), key=lambda kv: str(kv[0])):
        classes.append(frozenset(members))
        assign.append(gv.alpha_unit(unit))
    return PartitionCase.make(tuple(classes), tuple(assign))
