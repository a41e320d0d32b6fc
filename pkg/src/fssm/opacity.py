"""Opacity checking: can an observer ever be certain the secret holds?

Secrets are either marking predicates (current-state opacity) or regular
run predicates given as deterministic monitors over transition ids
(run-based opacity, via synchronous product).  A brute-force enumeration
oracle is provided for acyclic graphs; it is exact or it refuses.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .errors import CyclicGraph, DepthTooSmall, FssmError, UnresolvedReference
from .model import FssmNet
from .noninterference import ObsMap, subset_construction
from .policy import PredicateExpr
from .statespace import ReachabilityGraph


@dataclass(frozen=True)
class RunMonitor:
    """Deterministic automaton over transition ids; unmatched ids self-loop.

    A run is secret iff the monitor ends in an accepting state.
    """

    states: tuple[str, ...]
    initial: str
    rules: tuple[tuple[str, str, str], ...]  # (state, transition id, next state)
    accepting: frozenset[str]

    def __post_init__(self):
        known = set(self.states)
        if not known:
            raise FssmError("monitor needs at least one state")
        if self.initial not in known:
            raise FssmError(f"monitor initial state {self.initial!r} undeclared")
        delta: dict[tuple[str, str], str] = {}
        for q, tid, q2 in self.rules:
            if q not in known or q2 not in known:
                raise FssmError(f"monitor rule ({q!r}, {tid!r}, {q2!r}) uses undeclared state")
            key = (q, tid)
            if key in delta and delta[key] != q2:
                raise FssmError(f"monitor is nondeterministic on ({q!r}, {tid!r})")
            delta[key] = q2
        for q in self.accepting:
            if q not in known:
                raise FssmError(f"monitor accepting state {q!r} undeclared")
        object.__setattr__(self, "_delta", delta)

    def step(self, q: str, tid: str) -> str:
        return self._delta.get((q, tid), q)

    def accepts(self, run) -> bool:
        q = self.initial
        for tid in run:
            q = self.step(q, tid)
        return q in self.accepting

    def validate(self, net: FssmNet) -> None:
        for _, tid, _ in self.rules:
            if tid not in net.transition_by_id:
                raise UnresolvedReference(f"monitor rule names unknown transition {tid!r}")


SecretSpec = Union[PredicateExpr, RunMonitor]


@dataclass(frozen=True)
class OpacityVerdict:
    opaque: bool
    witness: Optional[tuple[str, ...]] = None
    exposed: Optional[tuple[str, ...]] = None
    example_secret_run: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class ObserverAutomaton:
    """State estimator: macro-states are the sets compatible with an
    observation, indexed in breadth-first discovery order."""

    macro_states: tuple[frozenset, ...]
    edges: Mapping[tuple[int, str], int]
    parents: tuple[Optional[tuple[int, str]], ...]
    initial: int = 0

    def observation_to(self, macro: int) -> tuple[str, ...]:
        path = []
        while self.parents[macro] is not None:
            macro, sym = self.parents[macro]
            path.append(sym)
        return tuple(reversed(path))


def _adjacency(n_states, edges, obs: ObsMap):
    """Per-state (symbol or None, dst, transition) lists in edge order."""
    merged = [[] for _ in range(n_states)]
    for src, tid, dst in edges:
        merged[src].append((obs.symbol_of(tid), dst, tid))
    return merged


def _split(merged):
    silent = [[d for sym, d, _ in row if sym is None] for row in merged]
    labeled = [[(sym, d, t) for sym, d, t in row if sym is not None] for row in merged]
    return silent, labeled


def build_observer(g: ReachabilityGraph, obs: ObsMap) -> ObserverAutomaton:
    merged = _adjacency(
        len(g.states), ((e.src, e.transition, e.dst) for e in g.edges), obs
    )
    silent, labeled = _split(merged)
    macros, delta, parents = subset_construction(silent, labeled, {0})
    return ObserverAutomaton(
        macro_states=tuple(macros), edges=delta, parents=tuple(parents), initial=0
    )


def _example_run(merged, witness, targets) -> tuple[str, ...]:
    """Lexicographically least shortest run realizing the witness into a
    target state (edges expanded in canonical per-state order)."""
    start = (0, 0)
    goal = len(witness)
    parent: dict = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        s, k = node
        if k == goal and s in targets:
            run = []
            while parent[node] is not None:
                node, tid = parent[node]
                run.append(tid)
            return tuple(reversed(run))
        for sym, dst, tid in merged[s]:
            if sym is None:
                nxt = (dst, k)
            elif k < goal and sym == witness[k]:
                nxt = (dst, k + 1)
            else:
                continue
            if nxt not in parent:
                parent[nxt] = (node, tid)
                queue.append(nxt)
    raise FssmError("internal: witness observation has no realizing run")


def _estimate(n_states, edges, obs, secret_flags, label):
    """Shared estimator core: find the first all-secret macro-state."""
    merged = _adjacency(n_states, edges, obs)
    silent, labeled = _split(merged)
    macros, delta, parents = subset_construction(silent, labeled, {0})
    observer = ObserverAutomaton(
        macro_states=tuple(macros), edges=delta, parents=tuple(parents), initial=0
    )
    for idx, macro in enumerate(observer.macro_states):
        if all(secret_flags[s] for s in macro):
            witness = observer.observation_to(idx)
            run = _example_run(merged, witness, macro)
            return OpacityVerdict(
                opaque=False,
                witness=witness,
                exposed=tuple(label(s) for s in sorted(macro)),
                example_secret_run=run,
            )
    return OpacityVerdict(opaque=True)


def check_current_state_opacity(
    g: ReachabilityGraph, net: FssmNet, obs: ObsMap, secret: PredicateExpr
) -> OpacityVerdict:
    """Opaque iff no observation pins the system inside the secret markings."""
    secret.validate(net)
    flags = [secret.eval(net, m) for m in g.states]
    return _estimate(
        len(g.states),
        [(e.src, e.transition, e.dst) for e in g.edges],
        obs,
        flags,
        lambda s: f"s{s}",
    )


def check_run_opacity(
    g: ReachabilityGraph, net: FssmNet, obs: ObsMap, monitor: RunMonitor
) -> OpacityVerdict:
    """Opaque iff no observation proves the run so far is accepted.

    The graph is composed synchronously with the monitor (which reads
    fired transition ids); current-state opacity of the accepting
    component on the product is exactly run opacity.
    """
    monitor.validate(net)
    out_edges: list[list] = [[] for _ in g.states]
    for e in g.edges:
        out_edges[e.src].append(e)
    start = (0, monitor.initial)
    nodes = [start]
    index = {start: 0}
    edges = []
    i = 0
    while i < len(nodes):
        s, q = nodes[i]
        for e in out_edges[s]:
            q2 = monitor.step(q, e.transition)
            node = (e.dst, q2)
            j = index.get(node)
            if j is None:
                j = len(nodes)
                index[node] = j
                nodes.append(node)
            edges.append((i, e.transition, j))
        i += 1
    flags = [q in monitor.accepting for _, q in nodes]
    return _estimate(
        len(nodes),
        edges,
        obs,
        flags,
        lambda p: f"s{nodes[p][0]}|{nodes[p][1]}",
    )


def brute_force_opacity(
    g: ReachabilityGraph,
    net: FssmNet,
    obs: ObsMap,
    secret: SecretSpec,
    depth: int,
) -> OpacityVerdict:
    """Exact oracle by exhaustive run enumeration; acyclic graphs only.

    Enumerates every firing sequence (including the empty one), groups by
    observation, and reports non-opacity iff some group is entirely
    secret.  Witness and example run follow the same shortest-then-
    lexicographic rule as the estimator, so results are comparable.
    """
    if depth < 1:
        raise FssmError("depth must be positive")
    n = len(g.states)
    adj: list[list] = [[] for _ in range(n)]
    indeg = [0] * n
    for e in g.edges:
        adj[e.src].append(e)
        indeg[e.dst] += 1
    order = [i for i in range(n) if indeg[i] == 0]
    k = 0
    while k < len(order):
        for e in adj[order[k]]:
            indeg[e.dst] -= 1
            if indeg[e.dst] == 0:
                order.append(e.dst)
        k += 1
    if len(order) < n:
        raise CyclicGraph("brute-force opacity needs an acyclic graph")
    dist = [0] * n
    for i in order:
        for e in adj[i]:
            dist[e.dst] = max(dist[e.dst], dist[i] + 1)
    longest = max(dist) if n else 0
    if depth < longest:
        raise DepthTooSmall(f"depth {depth} below longest path {longest}")

    if isinstance(secret, RunMonitor):
        secret.validate(net)
    else:
        secret.validate(net)
        state_secret = [secret.eval(net, m) for m in g.states]

    groups: dict[tuple[str, ...], dict] = {}

    def record(run, o, s, q):
        if isinstance(secret, RunMonitor):
            is_secret = q in secret.accepting
            final = (s, q)
        else:
            is_secret = state_secret[s]
            final = s
        grp = groups.setdefault(o, {"all": True, "runs": [], "finals": set()})
        grp["all"] = grp["all"] and is_secret
        grp["finals"].add(final)
        if is_secret:
            grp["runs"].append(run)

    def walk(s, q, run, o):
        record(run, o, s, q)
        if len(run) >= depth:
            return
        for e in adj[s]:
            sym = obs.symbol_of(e.transition)
            walk(
                e.dst,
                (
                    secret.step(q, e.transition)
                    if isinstance(secret, RunMonitor)
                    else q
                ),
                run + (e.transition,),
                o if sym is None else o + (sym,),
            )

    walk(0, secret.initial if isinstance(secret, RunMonitor) else None, (), ())

    bad = sorted(
        (o for o, grp in groups.items() if grp["all"]), key=lambda o: (len(o), o)
    )
    if not bad:
        return OpacityVerdict(opaque=True)
    witness = bad[0]
    grp = groups[witness]
    run = min(grp["runs"], key=lambda r: (len(r), r))
    if isinstance(secret, RunMonitor):
        exposed = tuple(f"s{s}|{q}" for s, q in sorted(grp["finals"]))
    else:
        exposed = tuple(f"s{s}" for s in sorted(grp["finals"]))
    return OpacityVerdict(
        opaque=False, witness=witness, exposed=exposed, example_secret_run=run
    )
