"""Trace-based non-interference (SNNI) over reachability graphs.

Observation maps label transitions with symbols or silence; graphs project
to deterministic prefix-closed automata via silent closure and subset
construction.  SNNI holds when deleting all transitions above the observer
leaves the projected language unchanged.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import FssmError, UnmappedTransition
from .lattice import is_identifier
from .model import FssmNet, without_transitions
from .statespace import ExploreLimits, ReachabilityGraph, explore

SILENT = None


@dataclass(frozen=True)
class ObsMap:
    """Total map from transition ids to observable symbols; None is silent."""

    entries: tuple[tuple[str, Optional[str]], ...]
    provenance: str = field(default="explicit", compare=False)

    def __post_init__(self):
        for tid, sym in self.entries:
            if sym is not None and not is_identifier(sym):
                raise FssmError(f"observation symbol {sym!r} is not an identifier")
        object.__setattr__(self, "_map", dict(self.entries))

    @property
    def assignment(self) -> Mapping[str, Optional[str]]:
        return dict(self._map)

    def symbol_of(self, tid: str) -> Optional[str]:
        try:
            return self._map[tid]
        except KeyError:
            raise UnmappedTransition(f"no observation assigned to transition {tid!r}")


def obs_from_dict(
    assignment: Mapping[str, Optional[str]],
    net: FssmNet | None = None,
    provenance: str = "explicit",
) -> ObsMap:
    """Explicit map; when a net is given the map must cover its transitions."""
    if net is not None:
        for tid in assignment:
            if tid not in net.transition_by_id:
                raise UnmappedTransition(f"observation map names unknown transition {tid!r}")
        missing = [t.id for t in net.transitions if t.id not in assignment]
        if missing:
            raise UnmappedTransition(
                "observation map misses transitions: " + ", ".join(sorted(missing))
            )
    return ObsMap(entries=tuple(sorted(assignment.items())), provenance=provenance)


def derive_obs(net: FssmNet, observer_level: str) -> ObsMap:
    """Transitions at or below the observer show as their own id, rest silent."""
    lat = net.lattice
    lat.check_level(observer_level)
    entries = tuple(
        (t.id, t.id if lat.leq(t.clearance, observer_level) else SILENT)
        for t in net.transitions
    )
    return ObsMap(entries=tuple(sorted(entries)), provenance=f"derived_from({observer_level})")


def coarsen_obs(obs: ObsMap, merge: Mapping[str, Optional[str]]) -> ObsMap:
    """Rename or silence output symbols; silent stays silent."""
    entries = tuple(
        (tid, SILENT if sym is None else merge.get(sym, sym)) for tid, sym in obs.entries
    )
    return ObsMap(entries=entries, provenance="explicit")


@dataclass(frozen=True)
class FiniteAutomaton:
    """Deterministic, partial, all states accepting (prefix-closed language)."""

    n_states: int
    alphabet: tuple[str, ...]
    transitions: Mapping[tuple[int, str], int]
    initial: int = 0

    def out(self, state: int) -> list[tuple[str, int]]:
        return sorted(
            (sym, dst) for (src, sym), dst in self.transitions.items() if src == state
        )


def graph_adjacency(g: ReachabilityGraph, obs: ObsMap):
    """Per-state silent successors and (symbol, dst, transition) successors."""
    silent = [[] for _ in g.states]
    labeled = [[] for _ in g.states]
    for e in g.edges:
        sym = obs.symbol_of(e.transition)
        if sym is None:
            silent[e.src].append(e.dst)
        else:
            labeled[e.src].append((sym, e.dst, e.transition))
    return silent, labeled


def subset_construction(silent, labeled, initial_set):
    """Deterministic estimator of a silent/labeled graph.

    Returns macro-state sets in BFS discovery order (symbols expanded
    sorted), the (macro, symbol) -> macro map, and per-macro parent
    (macro, symbol) pairs for witness reconstruction.
    """

    def closure(seed):
        todo = list(seed)
        acc = set(seed)
        while todo:
            s = todo.pop()
            for dst in silent[s]:
                if dst not in acc:
                    acc.add(dst)
                    todo.append(dst)
        return frozenset(acc)

    start = closure(initial_set)
    macros = [start]
    index = {start: 0}
    parents: list[Optional[tuple[int, str]]] = [None]
    delta: dict[tuple[int, str], int] = {}
    i = 0
    while i < len(macros):
        targets: dict[str, set] = {}
        for s in macros[i]:
            for sym, dst, _ in labeled[s]:
                targets.setdefault(sym, set()).add(dst)
        for sym in sorted(targets):
            t = closure(targets[sym])
            j = index.get(t)
            if j is None:
                j = len(macros)
                index[t] = j
                macros.append(t)
                parents.append((i, sym))
            delta[(i, sym)] = j
        i += 1
    return macros, delta, parents


def project(g: ReachabilityGraph, obs: ObsMap) -> FiniteAutomaton:
    """Deterministic automaton of g's observation language (prefix-closed)."""
    silent, labeled = graph_adjacency(g, obs)
    macros, delta, _ = subset_construction(silent, labeled, {0} if g.states else set())
    alphabet = tuple(sorted({sym for (_, sym) in delta}))
    return FiniteAutomaton(
        n_states=len(macros), alphabet=alphabet, transitions=delta, initial=0
    )


def language_diff_witness(
    a: FiniteAutomaton, b: FiniteAutomaton
) -> Optional[tuple[str, ...]]:
    """Shortest string in L(a) \\ L(b); ties broken lexicographically.

    Both automata accept everywhere, so the difference is exactly the
    strings a can read and b cannot; a breadth-first product scan with
    sorted symbols finds the least one.
    """
    a_out = [[] for _ in range(a.n_states)]
    for (src, sym), dst in sorted(a.transitions.items()):
        a_out[src].append((sym, dst))
    start = (a.initial, b.initial)
    seen = {start}
    queue = deque([(start, ())])
    while queue:
        (sa, sb), path = queue.popleft()
        for sym, ta in a_out[sa]:
            tb = b.transitions.get((sb, sym))
            if tb is None:
                return path + (sym,)
            nxt = (ta, tb)
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, path + (sym,)))
    return None


@dataclass(frozen=True)
class NIVerdict:
    holds: bool
    witness: Optional[tuple[str, ...]]
    bounded: bool = False


def check_snni(
    net: FssmNet,
    observer_level: str,
    limits: ExploreLimits | None = None,
    symbols: Mapping[str, Optional[str]] | None = None,
) -> NIVerdict:
    """SNNI at an observer level: purging high activity must not shrink
    the low-observable language.

    High transitions (clearance not below the observer) are always silent;
    low ones show as their own id, optionally renamed through ``symbols``
    (a None entry there is ignored, visibility comes from the lattice
    alone).  A truncated exploration yields a bounded verdict.
    """
    lat = net.lattice
    lat.check_level(observer_level)
    high = {t.id for t in net.transitions if not lat.leq(t.clearance, observer_level)}
    assignment: dict[str, Optional[str]] = {}
    for t in net.transitions:
        if t.id in high:
            assignment[t.id] = SILENT
        else:
            ren = symbols.get(t.id) if symbols else None
            assignment[t.id] = ren if ren is not None else t.id
    obs = ObsMap(
        entries=tuple(sorted(assignment.items())),
        provenance=f"derived_from({observer_level})",
    )
    g_full = explore(net, limits)
    g_purged = explore(without_transitions(net, high), limits)
    a = project(g_full, obs)
    b = project(g_purged, obs)
    backwards = language_diff_witness(b, a)
    if backwards is not None:
        raise FssmError(
            "internal: purged language escapes the full language "
            f"(witness {' '.join(backwards)})"
        )
    witness = language_diff_witness(a, b)
    return NIVerdict(
        holds=witness is None,
        witness=witness,
        bounded=g_full.truncated or g_purged.truncated,
    )
