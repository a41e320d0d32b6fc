"""Bell-LaPadula checking and user marking invariants over explored graphs.

Static checks read only declarations and over-approximate (warnings);
dynamic checks evaluate the three flow rules on every explored firing.
Violations carry shortest witness paths and replay against the net.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import FssmError, UnresolvedReference
from .lattice import is_identifier
from .model import FssmNet, Marking
from .statespace import (
    Binding,
    ExploreLimits,
    FlowRecord,
    GraphStats,
    ReachabilityGraph,
    enabled_bindings,
    explore,
    fire,
)

VERDICT_HOLDS = "holds"
VERDICT_VIOLATED = "violated"
VERDICT_BOUNDED = "holds_up_to_bound"


@dataclass(frozen=True)
class BlpConfig:
    no_read_up: bool = True
    no_write_down: bool = True
    containment: bool = True

    def __post_init__(self):
        if not (self.no_read_up or self.no_write_down or self.containment):
            raise FssmError("at least one BLP rule must be enabled")


@dataclass(frozen=True)
class Violation:
    kind: str  # read_up | write_down | containment | invariant
    transition: Optional[str]
    state: int
    witness: tuple[str, ...]
    detail: str
    count: int = 1


@dataclass(frozen=True)
class PolicyReport:
    verdict: str
    violations: tuple[Violation, ...]
    explored: GraphStats
    truncated: bool


def _verdict(violations, truncated: bool) -> str:
    if violations:
        return VERDICT_VIOLATED
    return VERDICT_BOUNDED if truncated else VERDICT_HOLDS


# --------------------------------------------------------------------------
# predicates


class PredicateExpr:
    """Base class; subclasses are immutable AST nodes."""

    def validate(self, net: FssmNet) -> None:
        raise NotImplementedError

    def eval(self, net: FssmNet, m: Marking) -> bool:
        raise NotImplementedError

    def render(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Contains(PredicateExpr):
    place: str
    klass: Optional[str] = None

    def validate(self, net):
        if self.place not in net.place_by_id:
            raise UnresolvedReference(f"predicate references unknown place {self.place!r}")
        if self.klass is not None and not is_identifier(self.klass):
            raise UnresolvedReference(f"invalid token class {self.klass!r} in predicate")

    def eval(self, net, m):
        return any(
            self.klass is None or tok.klass == self.klass
            for tok, _ in m.tokens_at(self.place)
        )

    def render(self):
        if self.klass is None:
            return f"contains({self.place})"
        return f"contains({self.place}, {self.klass})"


@dataclass(frozen=True)
class ExistsTokenGeq(PredicateExpr):
    cloud: str
    level: str

    def validate(self, net):
        if self.cloud not in net.cloud_by_id:
            raise UnresolvedReference(f"predicate references unknown cloud {self.cloud!r}")
        if self.level not in net.lattice.levels:
            raise UnresolvedReference(f"predicate references unknown level {self.level!r}")

    def eval(self, net, m):
        lat = net.lattice
        for place in net.places:
            if place.cloud != self.cloud:
                continue
            for tok, _ in m.tokens_at(place.id):
                if lat.leq(self.level, tok.level):
                    return True
        return False

    def render(self):
        return f"exists_token_geq({self.cloud}, {self.level})"


_CMP = {
    "<": operator.lt,
    "<=": operator.le,
    "=": operator.eq,
    ">=": operator.ge,
    ">": operator.gt,
}


@dataclass(frozen=True)
class CountCmp(PredicateExpr):
    place: str
    op: str
    n: int

    def validate(self, net):
        if self.place not in net.place_by_id:
            raise UnresolvedReference(f"predicate references unknown place {self.place!r}")
        if self.op not in _CMP:
            raise UnresolvedReference(f"unknown comparison {self.op!r}")
        if not isinstance(self.n, int) or self.n < 0:
            raise UnresolvedReference(f"count bound must be a non-negative integer, got {self.n!r}")

    def eval(self, net, m):
        return _CMP[self.op](m.count(self.place), self.n)

    def render(self):
        return f"count({self.place}) {self.op} {self.n}"


@dataclass(frozen=True)
class Not(PredicateExpr):
    expr: PredicateExpr

    def validate(self, net):
        self.expr.validate(net)

    def eval(self, net, m):
        return not self.expr.eval(net, m)

    def render(self):
        return f"not({self.expr.render()})"


@dataclass(frozen=True)
class And(PredicateExpr):
    exprs: tuple[PredicateExpr, ...]

    def validate(self, net):
        if not self.exprs:
            raise UnresolvedReference("and() needs at least one operand")
        for e in self.exprs:
            e.validate(net)

    def eval(self, net, m):
        return all(e.eval(net, m) for e in self.exprs)

    def render(self):
        return "and(" + ", ".join(e.render() for e in self.exprs) + ")"


@dataclass(frozen=True)
class Or(PredicateExpr):
    exprs: tuple[PredicateExpr, ...]

    def validate(self, net):
        if not self.exprs:
            raise UnresolvedReference("or() needs at least one operand")
        for e in self.exprs:
            e.validate(net)

    def eval(self, net, m):
        return any(e.eval(net, m) for e in self.exprs)

    def render(self):
        return "or(" + ", ".join(e.render() for e in self.exprs) + ")"


@dataclass(frozen=True)
class Const(PredicateExpr):
    value: bool

    def validate(self, net):
        pass

    def eval(self, net, m):
        return self.value

    def render(self):
        return "true" if self.value else "false"


def parse_predicate(obj, net: FssmNet) -> PredicateExpr:
    """Build a predicate from its JSON form and resolve it against the net.

    Forms: true/false, {"contains": [place, class?]},
    {"exists_token_geq": [cloud, level]}, {"count": [place, op, n]},
    {"not": expr}, {"and": [exprs...]}, {"or": [exprs...]}.
    """
    p = _parse(obj)
    p.validate(net)
    return p


def _parse(obj) -> PredicateExpr:
    if isinstance(obj, bool):
        return Const(obj)
    if not isinstance(obj, dict) or len(obj) != 1:
        raise UnresolvedReference(f"malformed predicate: {obj!r}")
    (key, val), = obj.items()
    if key == "contains":
        if not isinstance(val, list) or not 1 <= len(val) <= 2:
            raise UnresolvedReference("contains expects [place] or [place, class]")
        return Contains(str(val[0]), str(val[1]) if len(val) == 2 else None)
    if key == "exists_token_geq":
        if not isinstance(val, list) or len(val) != 2:
            raise UnresolvedReference("exists_token_geq expects [cloud, level]")
        return ExistsTokenGeq(str(val[0]), str(val[1]))
    if key == "count":
        if not isinstance(val, list) or len(val) != 3:
            raise UnresolvedReference("count expects [place, op, n]")
        return CountCmp(str(val[0]), str(val[1]), val[2])
    if key == "not":
        return Not(_parse(val))
    if key == "and":
        if not isinstance(val, list):
            raise UnresolvedReference("and expects a list of predicates")
        return And(tuple(_parse(v) for v in val))
    if key == "or":
        if not isinstance(val, list):
            raise UnresolvedReference("or expects a list of predicates")
        return Or(tuple(_parse(v) for v in val))
    raise UnresolvedReference(f"unknown predicate operator {key!r}")


def eval_predicate(p: PredicateExpr, net: FssmNet, m: Marking) -> bool:
    return p.eval(net, m)


def predicate_to_obj(p: PredicateExpr):
    """Inverse of parse_predicate's shape (JSON-ready plain data)."""
    if isinstance(p, Const):
        return p.value
    if isinstance(p, Contains):
        return {"contains": [p.place] if p.klass is None else [p.place, p.klass]}
    if isinstance(p, ExistsTokenGeq):
        return {"exists_token_geq": [p.cloud, p.level]}
    if isinstance(p, CountCmp):
        return {"count": [p.place, p.op, p.n]}
    if isinstance(p, Not):
        return {"not": predicate_to_obj(p.expr)}
    if isinstance(p, And):
        return {"and": [predicate_to_obj(e) for e in p.exprs]}
    if isinstance(p, Or):
        return {"or": [predicate_to_obj(e) for e in p.exprs]}
    raise FssmError(f"unknown predicate node {type(p).__name__}")


# --------------------------------------------------------------------------
# static BLP


def static_blp_check(net: FssmNet, cfg: BlpConfig | None = None) -> PolicyReport:
    """Declaration-only warnings; over-approximates the dynamic rules.

    A transition is flagged when its declared clearances alone cannot rule
    out a violation: an input place in a cloud it may not read, an output
    place below its clearance, or a possible produced level (join of input
    clouds and floor) exceeding an output cloud.
    """
    cfg = cfg or BlpConfig()
    lat = net.lattice
    violations = []
    for t in net.transitions:
        in_clouds = sorted(
            {net.place_by_id[a.place].cloud for a in t.inputs}
        )
        out_clouds = sorted(
            {net.place_by_id[a.place].cloud for a in t.outputs}
        )
        if cfg.no_read_up:
            for cid in in_clouds:
                c = net.cloud_by_id[cid].clearance
                if not lat.leq(c, t.clearance):
                    violations.append(
                        Violation(
                            kind="read_up",
                            transition=t.id,
                            state=0,
                            witness=(),
                            detail=(
                                f"input place cloud {cid} at {c} "
                                f"not below clearance {t.clearance}"
                            ),
                        )
                    )
                    break
        if cfg.no_write_down:
            for cid in out_clouds:
                c = net.cloud_by_id[cid].clearance
                if not lat.leq(t.clearance, c):
                    violations.append(
                        Violation(
                            kind="write_down",
                            transition=t.id,
                            state=0,
                            witness=(),
                            detail=(
                                f"clearance {t.clearance} not below "
                                f"output place cloud {cid} at {c}"
                            ),
                        )
                    )
                    break
        if cfg.containment:
            bound = lat.join(
                lat.join_all(net.cloud_by_id[cid].clearance for cid in in_clouds),
                t.floor,
            )
            for cid in out_clouds:
                c = net.cloud_by_id[cid].clearance
                if not lat.leq(bound, c):
                    violations.append(
                        Violation(
                            kind="containment",
                            transition=t.id,
                            state=0,
                            witness=(),
                            detail=(
                                f"possible output level {bound} exceeds "
                                f"cloud {cid} at {c}"
                            ),
                        )
                    )
                    break
    return PolicyReport(
        verdict=_verdict(violations, False),
        violations=tuple(violations),
        explored=GraphStats(0, 0, 0),
        truncated=False,
    )


# --------------------------------------------------------------------------
# dynamic BLP


def _edge_flow(net: FssmNet, states, memo, edge) -> FlowRecord:
    """FlowRecord of an explored edge, matched by binding digest."""
    bindings = memo.get(edge.src)
    if bindings is None:
        bindings = {
            (b.transition, b.digest): b for b in enabled_bindings(net, states[edge.src])
        }
        memo[edge.src] = bindings
    b = bindings[(edge.transition, edge.binding)]
    _, flow = fire(net, states[edge.src], b)
    return flow


def _flow_violations(net: FssmNet, cfg: BlpConfig, t_id: str, flow: FlowRecord):
    """Yield (kind, detail) pairs for one firing."""
    lat = net.lattice
    t = net.transition_by_id[t_id]
    if cfg.no_read_up:
        for pid, tok in flow.consumed + flow.read:
            if not lat.leq(tok.level, t.clearance):
                yield (
                    "read_up",
                    f"input {tok} at {pid} above clearance {t.clearance}",
                )
                break
    if cfg.no_write_down:
        seen = set()
        for pid, _ in flow.produced:
            if pid in seen:
                continue
            seen.add(pid)
            c = net.place_clearance(pid)
            if not lat.leq(t.clearance, c):
                yield (
                    "write_down",
                    f"clearance {t.clearance} not below output place {pid} at {c}",
                )
                break
    if cfg.containment:
        for pid, tok in flow.produced:
            c = net.place_clearance(pid)
            if not lat.leq(tok.level, c):
                yield (
                    "containment",
                    f"produced {tok} exceeds cloud of place {pid} at {c}",
                )
                break


def dynamic_blp_check(
    net: FssmNet,
    cfg: BlpConfig | None = None,
    limits: ExploreLimits | None = None,
    graph: ReachabilityGraph | None = None,
) -> PolicyReport:
    """Explore the net and evaluate the BLP rules on every firing.

    Edges come out of the graph in breadth-first order, so the first hit
    per (transition, kind) carries a shortest witness; later hits only
    increment its count.
    """
    cfg = cfg or BlpConfig()
    g = graph if graph is not None else explore(net, limits)
    memo: dict = {}
    found: dict[tuple, Violation] = {}
    for e in g.edges:
        flow = _edge_flow(net, g.states, memo, e)
        for kind, detail in _flow_violations(net, cfg, e.transition, flow):
            key = (e.transition, kind)
            v = found.get(key)
            if v is None:
                found[key] = Violation(
                    kind=kind,
                    transition=e.transition,
                    state=e.dst,
                    witness=g.path_to(e.src) + (e.transition,),
                    detail=detail,
                )
            else:
                found[key] = Violation(
                    kind=v.kind,
                    transition=v.transition,
                    state=v.state,
                    witness=v.witness,
                    detail=v.detail,
                    count=v.count + 1,
                )
    violations = tuple(found[k] for k in sorted(found, key=lambda k: (k[0], k[1])))
    return PolicyReport(
        verdict=_verdict(violations, g.truncated),
        violations=violations,
        explored=g.stats,
        truncated=g.truncated,
    )


# --------------------------------------------------------------------------
# invariants


def check_invariant(
    g: ReachabilityGraph,
    net: FssmNet,
    p: PredicateExpr,
    mode: str = "always",
) -> PolicyReport:
    """Check p on every explored state; "always" wants it true, "never" false."""
    if mode not in ("always", "never"):
        raise FssmError(f"invariant mode must be 'always' or 'never', got {mode!r}")
    p.validate(net)
    want = mode == "always"
    first: Violation | None = None
    hits = 0
    for i, m in enumerate(g.states):
        if p.eval(net, m) != want:
            hits += 1
            if first is None:
                first = Violation(
                    kind="invariant",
                    transition=None,
                    state=i,
                    witness=g.path_to(i),
                    detail=f"{mode} {p.render()} fails at state {i}",
                )
    violations = ()
    if first is not None:
        violations = (
            Violation(
                kind=first.kind,
                transition=None,
                state=first.state,
                witness=first.witness,
                detail=first.detail,
                count=hits,
            ),
        )
    return PolicyReport(
        verdict=_verdict(violations, g.truncated),
        violations=violations,
        explored=g.stats,
        truncated=g.truncated,
    )


# --------------------------------------------------------------------------
# witness replay


def _replay_markings(net: FssmNet, witness, initial: int) -> Iterable[list[Marking]]:
    """Yield marking sequences realizing the witness (binding choice search)."""

    def walk(m: Marking, k: int, acc: list[Marking]):
        if k == len(witness):
            yield acc
            return
        for b in enabled_bindings(net, m):
            if b.transition != witness[k]:
                continue
            try:
                m2, _ = fire(net, m, b)
            except FssmError:
                continue
            yield from walk(m2, k + 1, acc + [m2])

    start = net.initials[initial]
    yield from walk(start, 0, [start])


def replay_witness(
    net: FssmNet,
    v: Violation,
    cfg: BlpConfig | None = None,
    p: PredicateExpr | None = None,
    mode: str = "always",
    initial: int = 0,
) -> bool:
    """True when some realization of the witness reproduces the violation.

    BLP violations must recur at the final firing; invariant violations at
    the final marking.  Used by the test suite on every reported violation.
    """
    cfg = cfg or BlpConfig()
    if v.kind == "invariant":
        if p is None:
            raise FssmError("replaying an invariant violation needs the predicate")
        want = mode == "always"
        for seq in _replay_markings(net, v.witness, initial):
            if p.eval(net, seq[-1]) != want:
                return True
        return False
    if not v.witness or v.witness[-1] != v.transition:
        return False
    prefix, last = v.witness[:-1], v.witness[-1]
    for seq in _replay_markings(net, prefix, initial):
        m = seq[-1]
        for b in enabled_bindings(net, m):
            if b.transition != last:
                continue
            try:
                _, flow = fire(net, m, b)
            except FssmError:
                continue
            if any(kind == v.kind for kind, _ in _flow_violations(net, cfg, last, flow)):
                return True
    return False
