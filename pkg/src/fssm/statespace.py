"""Operational semantics: enabledness, firing, reachability graphs, DOT.

``enabled_bindings`` and ``fire`` are the readable reference semantics over
``Marking`` values.  ``explore`` runs the same semantics through a compiled
integer representation so desk-scale graphs (1e5 states) stay fast; the two
paths share the binding digest format and are cross-checked in the tests.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, NamedTuple

from .errors import CapacityExceeded, FssmError, LimitExceeded, NotEnabled
from .model import ArcIn, DataToken, FssmNet, Marking, TaskTransition, WILDCARD

DEFAULT_MAX_STATES = 100_000


@dataclass(frozen=True)
class Binding:
    """A transition plus one chosen token per input arc (arc order)."""

    transition: str
    choices: tuple[tuple[ArcIn, DataToken], ...]

    @property
    def digest(self) -> str:
        """Stable text of the choice multiset; arc-slot permutations agree."""
        return render_digest(
            (arc.mode, arc.place, tok.klass, tok.level) for arc, tok in self.choices
        )


def render_digest(entries: Iterable[tuple[str, str, str, str]]) -> str:
    parts = sorted(f"{mode} {place}:{klass}@{level}" for mode, place, klass, level in entries)
    return "&".join(parts) if parts else "-"


@dataclass(frozen=True)
class FlowRecord:
    """What one firing did to the marking, with computed output levels."""

    consumed: tuple[tuple[str, DataToken], ...]
    read: tuple[tuple[str, DataToken], ...]
    produced: tuple[tuple[str, DataToken], ...]


class GraphEdge(NamedTuple):
    src: int
    transition: str
    binding: str
    dst: int


@dataclass(frozen=True)
class GraphStats:
    states: int
    edges: int
    depth: int


@dataclass(frozen=True)
class ReachabilityGraph:
    """Canonical finite LTS of a net: breadth-first, deterministically numbered.

    State 0 is the chosen initial marking; successors are expanded in
    (transition id, binding digest) order, so numbering, edge order, and all
    derived reports are reproducible.
    """

    states: tuple[Marking, ...]
    edges: tuple[GraphEdge, ...]
    truncated: bool
    initial_index: int
    parent_edge: tuple[int, ...] = field(repr=False)  # discovery edge per state, -1 at root
    depths: tuple[int, ...] = field(repr=False)

    @property
    def stats(self) -> GraphStats:
        return GraphStats(
            states=len(self.states),
            edges=len(self.edges),
            depth=max(self.depths) if self.depths else 0,
        )

    def transition_ids(self) -> tuple[str, ...]:
        return tuple(sorted({e.transition for e in self.edges}))

    def path_to(self, state: int) -> tuple[str, ...]:
        """Shortest transition-id path from the initial state (BFS tree)."""
        path = []
        while state != 0:
            e = self.edges[self.parent_edge[state]]
            path.append(e.transition)
            state = e.src
        return tuple(reversed(path))


@dataclass(frozen=True)
class ExploreLimits:
    max_states: int = DEFAULT_MAX_STATES
    max_depth: int | None = None
    initial: int = 0
    strict: bool = False


# --------------------------------------------------------------------------
# reference semantics


def enabled_bindings(net: FssmNet, m: Marking) -> list[Binding]:
    """All enabled bindings, duplicate-free, sorted by (transition, digest)."""
    out: list[Binding] = []
    for t in net.transitions:
        out.extend(_bindings_for(t, m))
    return out


def _bindings_for(t: TaskTransition, m: Marking) -> list[Binding]:
    cands: list[list[DataToken]] = []
    for arc in t.inputs:
        tokens = sorted(tok for tok, _ in m.tokens_at(arc.place) if arc.matches(tok))
        if not tokens:
            return []
        cands.append(tokens)
    by_digest: dict[str, Binding] = {}
    for combo in product(*cands):
        choices = tuple(zip(t.inputs, combo))
        if not _feasible(m, choices):
            continue
        b = Binding(t.id, choices)
        by_digest.setdefault(b.digest, b)
    return [by_digest[d] for d in sorted(by_digest)]


def _feasible(m: Marking, choices) -> bool:
    takes: Counter = Counter()
    reads: set = set()
    for arc, tok in choices:
        if arc.mode == "take":
            takes[(arc.place, tok)] += 1
        else:
            reads.add((arc.place, tok))
    for (pid, tok), k in takes.items():
        avail = next((c for t2, c in m.tokens_at(pid) if t2 == tok), 0)
        if (pid, tok) in reads:
            k += 1
        if avail < k:
            return False
    return True


def fire(net: FssmNet, m: Marking, b: Binding) -> tuple[Marking, FlowRecord]:
    """Fire ``b`` at ``m``: takes removed, reads untouched, outputs added.

    Every output token is produced at join(levels of all chosen inputs)
    joined with the transition's floor.  Raises ``NotEnabled`` when the
    binding does not match the marking and ``CapacityExceeded`` when a
    place would overflow.
    """
    t = net.transition_by_id.get(b.transition)
    if t is None:
        raise NotEnabled(f"unknown transition {b.transition!r}")
    if tuple(arc for arc, _ in b.choices) != t.inputs:
        raise NotEnabled(f"binding does not cover the input arcs of {t.id!r}")
    for arc, tok in b.choices:
        if not arc.matches(tok):
            raise NotEnabled(f"token {tok} does not match pattern {arc.pattern!r}")
    if not _feasible(m, b.choices):
        raise NotEnabled(f"binding {b.digest!r} is not enabled at {m.canonical_key()}")

    lat = net.lattice
    out_level = lat.join(
        lat.join_all(tok.level for _, tok in b.choices), t.floor
    )
    consumed = tuple(
        (arc.place, tok) for arc, tok in b.choices if arc.mode == "take"
    )
    read = tuple((arc.place, tok) for arc, tok in b.choices if arc.mode == "read")
    produced = tuple((arc.place, DataToken(arc.klass, out_level)) for arc in t.outputs)

    contents: dict[str, Counter] = {}
    for pid, packed in m.entries:
        contents[pid] = Counter({DataToken(k, lv): c for k, lv, c in packed})
    for pid, tok in consumed:
        contents.setdefault(pid, Counter())[tok] -= 1
    for pid, tok in produced:
        contents.setdefault(pid, Counter())[tok] += 1
    for pid, counter in contents.items():
        place = net.place_by_id[pid]
        if place.capacity is not None and sum(counter.values()) > place.capacity:
            raise CapacityExceeded(
                f"firing {t.id!r} overflows place {pid!r} (capacity {place.capacity})"
            )
    m2 = Marking({pid: list(counter.items()) for pid, counter in contents.items()})
    return m2, FlowRecord(consumed=consumed, read=read, produced=produced)


# --------------------------------------------------------------------------
# compiled exploration


class _CompiledNet:
    """Integer-indexed view of a net for the exploration hot loop."""

    def __init__(self, net: FssmNet):
        lat = net.lattice
        self.net = net
        self.levels = list(lat.levels)
        self.level_idx = {lv: i for i, lv in enumerate(self.levels)}
        self.join = [
            [self.level_idx[lat.joins[(a, b)]] for b in self.levels] for a in self.levels
        ]
        self.bottom = self.level_idx[lat.bottom]
        self.place_ids = [p.id for p in net.places]
        self.place_idx = {pid: i for i, pid in enumerate(self.place_ids)}
        self.capacity = [p.capacity for p in net.places]
        self.type_ids: dict[tuple[str, int], int] = {}
        self.type_info: list[tuple[str, int]] = []
        # (tid, in_arcs, outputs, floor); arcs use place indices
        self.trans = [
            (
                t.id,
                tuple(
                    (
                        self.place_idx[a.place],
                        None if a.pattern == WILDCARD else a.pattern,
                        a.mode == "take",
                    )
                    for a in t.inputs
                ),
                tuple((self.place_idx[a.place], a.klass) for a in t.outputs),
                self.level_idx[t.floor],
            )
            for t in net.transitions
        ]

    def intern(self, klass: str, level: int) -> int:
        key = (klass, level)
        ty = self.type_ids.get(key)
        if ty is None:
            ty = len(self.type_info)
            self.type_ids[key] = ty
            self.type_info.append(key)
        return ty

    def encode(self, m: Marking):
        per_place = [()] * len(self.place_ids)
        for pid, packed in m.entries:
            p = self.place_idx[pid]
            per_place[p] = tuple(
                sorted((self.intern(k, self.level_idx[lv]), c) for k, lv, c in packed)
            )
        return tuple(per_place)

    def decode(self, compact) -> Marking:
        contents = {}
        for p, content in enumerate(compact):
            if content:
                contents[self.place_ids[p]] = [
                    (DataToken(self.type_info[ty][0], self.levels[self.type_info[ty][1]]), c)
                    for ty, c in content
                ]
        return Marking(contents)

    def successors(self, compact):
        """Yield (trans index, signature, successor) in canonical order.

        The signature is the sorted (place, is_take, type) choice multiset;
        capacity-breaching firings are silently not successors.
        """
        type_info = self.type_info
        join = self.join
        for ti, (_, in_arcs, outs, floor) in enumerate(self.trans):
            cands = []
            feasible = True
            for p, pk, _ in in_arcs:
                content = compact[p]
                if pk is None:
                    c = [ty for ty, _ in content]
                else:
                    c = [ty for ty, _ in content if type_info[ty][0] == pk]
                if not c:
                    feasible = False
                    break
                cands.append(c)
            if not feasible:
                continue
            seen = set()
            emitted = []
            for combo in product(*cands) if in_arcs else ((),):
                sig = tuple(
                    sorted(
                        (in_arcs[i][0], in_arcs[i][2], ty) for i, ty in enumerate(combo)
                    )
                )
                if sig in seen:
                    continue
                seen.add(sig)
                takes: dict[tuple[int, int], int] = {}
                reads = set()
                for p, is_take, ty in sig:
                    if is_take:
                        takes[(p, ty)] = takes.get((p, ty), 0) + 1
                    else:
                        reads.add((p, ty))
                ok = True
                for (p, ty), k in takes.items():
                    avail = next((c for t2, c in compact[p] if t2 == ty), 0)
                    if (p, ty) in reads:
                        k += 1
                    if avail < k:
                        ok = False
                        break
                if not ok:
                    continue
                level = floor
                for _, _, ty in sig:
                    level = join[level][type_info[ty][1]]
                delta: dict[int, dict[int, int]] = {}
                for (p, ty), k in takes.items():
                    delta.setdefault(p, {})[ty] = -k
                for p, klass in outs:
                    ty = self.intern(klass, level)
                    d = delta.setdefault(p, {})
                    d[ty] = d.get(ty, 0) + 1
                succ = self._apply(compact, delta)
                if succ is not None:
                    emitted.append((self._render_sig(sig), sig, succ))
            emitted.sort(key=lambda e: e[0])
            for _, sig, succ in emitted:
                yield ti, sig, succ

    def _apply(self, compact, delta):
        per_place = list(compact)
        for p, changes in delta.items():
            counts = dict(per_place[p])
            for ty, d in changes.items():
                counts[ty] = counts.get(ty, 0) + d
            content = tuple(sorted((ty, c) for ty, c in counts.items() if c > 0))
            cap = self.capacity[p]
            if cap is not None and sum(c for _, c in content) > cap:
                return None
            per_place[p] = content
        return tuple(per_place)

    def _render_sig(self, sig) -> str:
        return render_digest(
            (
                "take" if is_take else "read",
                self.place_ids[p],
                self.type_info[ty][0],
                self.levels[self.type_info[ty][1]],
            )
            for p, is_take, ty in sig
        )

    def has_successor(self, compact) -> bool:
        for _ in self.successors(compact):
            return True
        return False


def explore(net: FssmNet, limits: ExploreLimits | None = None) -> ReachabilityGraph:
    """Breadth-first closure of the firing relation from an initial marking.

    Hitting ``max_states`` or ``max_depth`` truncates the graph and sets the
    flag (or raises ``LimitExceeded`` under ``strict``); edges into states
    beyond the limit are dropped.
    """
    limits = limits or ExploreLimits()
    if limits.max_states < 1:
        raise FssmError("max_states must be at least 1")
    if not 0 <= limits.initial < len(net.initials):
        raise FssmError(f"initial marking index {limits.initial} out of range")

    comp = _CompiledNet(net)
    root = comp.encode(net.initials[limits.initial])
    index = {root: 0}
    states = [root]
    parent_edge = [-1]
    depths = [0]
    edges: list[tuple[int, int, tuple, int]] = []
    truncated = False
    max_states = limits.max_states
    max_depth = limits.max_depth

    i = 0
    while i < len(states):
        m = states[i]
        d = depths[i]
        if max_depth is not None and d >= max_depth:
            if comp.has_successor(m):
                truncated = True
            i += 1
            continue
        for ti, sig, succ in comp.successors(m):
            j = index.get(succ)
            if j is None:
                if len(states) >= max_states:
                    truncated = True
                    continue
                j = len(states)
                index[succ] = j
                states.append(succ)
                parent_edge.append(len(edges))
                depths.append(d + 1)
            edges.append((i, ti, sig, j))
        i += 1

    if truncated and limits.strict:
        raise LimitExceeded(
            f"exploration exceeded limits ({len(states)} states reached)"
        )

    digest_memo: dict[tuple[int, tuple], str] = {}
    rendered = []
    for src, ti, sig, dst in edges:
        key = (ti, sig)
        dg = digest_memo.get(key)
        if dg is None:
            dg = comp._render_sig(sig)
            digest_memo[key] = dg
        rendered.append(GraphEdge(src, comp.trans[ti][0], dg, dst))

    return ReachabilityGraph(
        states=tuple(comp.decode(m) for m in states),
        edges=tuple(rendered),
        truncated=truncated,
        initial_index=limits.initial,
        parent_edge=tuple(parent_edge),
        depths=tuple(depths),
    )


def to_dot(g: ReachabilityGraph, show_markings: bool = False) -> str:
    """Byte-deterministic DOT rendering of a reachability graph."""
    lines = ["digraph reachability {", "  rankdir=LR;"]
    for i, m in enumerate(g.states):
        label = f"s{i}"
        if show_markings:
            label += "\\n" + _dot_escape(m.canonical_key())
        lines.append(f'  s{i} [label="{label}"];')
    for e in g.edges:
        lines.append(f'  s{e.src} -> s{e.dst} [label="{_dot_escape(e.transition)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')
