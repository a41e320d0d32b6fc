"""JSON model files: parsing, validation with document paths, canonical
serialization.

Parsing is strict (unknown keys are schema errors) and delegates semantic
checks to the builders, annotating their errors with the document path.
Serialization is canonical and byte-deterministic: sorted keys, entities
in canonical order, covers reduced to the Hasse relation, fractions as
integers or "a/b" strings.  parse(serialize(parse(text))) == parse(text).
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .allocation import CloudSpec, CostModel, Workflow, build_workflow
from .errors import FssmError, ModelSyntaxError, SchemaError
from .lattice import SecurityLattice, build_lattice
from .model import (
    ArcIn,
    ArcOut,
    Cloud,
    FssmNet,
    Marking,
    Place,
    TaskTransition,
    WILDCARD,
    build_net,
    marking_of,
)
from .noninterference import ObsMap, obs_from_dict
from .opacity import RunMonitor, SecretSpec
from .policy import PredicateExpr, parse_predicate, predicate_to_obj


@dataclass(frozen=True)
class ModelBundle:
    """Everything a model file declares, resolved and validated."""

    net: FssmNet
    obs_maps: tuple[tuple[str, ObsMap], ...] = ()
    secrets: tuple[tuple[str, SecretSpec], ...] = ()
    observers: tuple[tuple[str, str], ...] = ()  # name -> lattice level
    workflow: Optional[Workflow] = None
    cloud_specs: tuple[CloudSpec, ...] = ()
    cost: Optional[CostModel] = None

    def __post_init__(self):
        object.__setattr__(self, "_obs", dict(self.obs_maps))
        object.__setattr__(self, "_secrets", dict(self.secrets))
        object.__setattr__(self, "_observers", dict(self.observers))

    def obs_map(self, name: str) -> ObsMap:
        if name not in self._obs:
            raise FssmError(f"model defines no observation map named {name!r}")
        return self._obs[name]

    def secret(self, name: str) -> SecretSpec:
        if name not in self._secrets:
            raise FssmError(f"model defines no secret named {name!r}")
        return self._secrets[name]

    def observer_level(self, name: str) -> str:
        """Resolve an observer alias, falling back to a literal level."""
        if name in self._observers:
            return self._observers[name]
        self.net.lattice.check_level(name)
        return name


@contextmanager
def _at(path: str):
    """Attach a document path to semantic errors raised inside."""
    try:
        yield
    except FssmError as e:
        if getattr(e, "path", None) is None:
            e.path = path
        raise


def _require(obj, key: str, kind, path: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"missing required key", path=f"{path}/{key}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise SchemaError(f"wrong type for key", path=f"{path}/{key}")
    return val


def _opt(obj, key: str, kind, path: str, default):
    if key not in obj:
        return default
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise SchemaError(f"wrong type for key", path=f"{path}/{key}")
    return val


def _no_extras(obj: dict, allowed: set, path: str):
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"unknown key {key!r}", path=f"{path}/{key}")


def _str_list(val, path: str) -> list[str]:
    if not isinstance(val, list) or not all(isinstance(x, str) for x in val):
        raise SchemaError("expected a list of strings", path=path)
    return val


def parse_fraction(val, path: str) -> Fraction:
    """Rates: integers, decimal floats, or "a/b" strings."""
    try:
        if isinstance(val, bool):
            raise ValueError
        if isinstance(val, int):
            return Fraction(val)
        if isinstance(val, float):
            return Fraction(str(val))
        if isinstance(val, str):
            return Fraction(val)
    except (ValueError, ZeroDivisionError):
        pass
    raise SchemaError(f"bad rational {val!r}", path=path)


def render_fraction(f: Fraction):
    return int(f) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


_TOP_KEYS = {
    "lattice",
    "clouds",
    "places",
    "transitions",
    "initial_markings",
    "observations",
    "secrets",
    "observers",
    "workflow",
    "costs",
}


def parse_model(text: str) -> ModelBundle:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelSyntaxError(e.msg, line=e.lineno, column=e.colno)
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object", path="/")
    _no_extras(doc, _TOP_KEYS, "")

    lat = _parse_lattice(_require(doc, "lattice", dict, ""))
    clouds = [
        _parse_cloud(c, f"/clouds/{i}")
        for i, c in enumerate(_opt(doc, "clouds", list, "", []))
    ]
    places = [
        _parse_place(p, f"/places/{i}")
        for i, p in enumerate(_opt(doc, "places", list, "", []))
    ]
    transitions = [
        _parse_transition(t, lat, f"/transitions/{i}")
        for i, t in enumerate(_opt(doc, "transitions", list, "", []))
    ]
    initials = [
        _parse_marking(m, f"/initial_markings/{i}")
        for i, m in enumerate(_opt(doc, "initial_markings", list, "", [{}]))
    ]
    with _at("/"):
        net = build_net(
            lattice=lat,
            clouds=clouds,
            places=places,
            transitions=transitions,
            initials=initials or [Marking({})],
        )

    obs_maps = []
    for name, spec in sorted(_opt(doc, "observations", dict, "", {}).items()):
        obs_maps.append((name, _parse_obs(spec, net, f"/observations/{name}")))
    secrets = []
    for name, spec in sorted(_opt(doc, "secrets", dict, "", {}).items()):
        secrets.append((name, _parse_secret(spec, net, f"/secrets/{name}")))
    observers = []
    for name, level in sorted(_opt(doc, "observers", dict, "", {}).items()):
        if not isinstance(level, str):
            raise SchemaError("observer alias must be a level name", path=f"/observers/{name}")
        with _at(f"/observers/{name}"):
            lat.check_level(level)
        observers.append((name, level))

    workflow = None
    cloud_specs: tuple[CloudSpec, ...] = ()
    cost = None
    if "workflow" in doc:
        workflow = _parse_workflow(_require(doc, "workflow", dict, ""), lat)
        cloud_specs, cost = _parse_costs(
            _opt(doc, "costs", dict, "", {}), net, workflow
        )
    elif "costs" in doc:
        raise SchemaError("costs given without a workflow", path="/costs")

    return ModelBundle(
        net=net,
        obs_maps=tuple(obs_maps),
        secrets=tuple(secrets),
        observers=tuple(observers),
        workflow=workflow,
        cloud_specs=cloud_specs,
        cost=cost,
    )


def _parse_lattice(obj) -> SecurityLattice:
    _no_extras(obj, {"levels", "covers"}, "/lattice")
    levels = _str_list(_require(obj, "levels", list, "/lattice"), "/lattice/levels")
    covers = []
    for i, pair in enumerate(_opt(obj, "covers", list, "/lattice", [])):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError("cover must be [lo, hi]", path=f"/lattice/covers/{i}")
        lo, hi = pair
        if not isinstance(lo, str) or not isinstance(hi, str):
            raise SchemaError("cover must name two levels", path=f"/lattice/covers/{i}")
        covers.append((lo, hi))
    with _at("/lattice"):
        return build_lattice(levels, covers)


def _parse_cloud(obj, path: str) -> Cloud:
    if not isinstance(obj, dict):
        raise SchemaError("cloud must be an object", path=path)
    _no_extras(obj, {"id", "clearance"}, path)
    return Cloud(
        id=_require(obj, "id", str, path), clearance=_require(obj, "clearance", str, path)
    )


def _parse_place(obj, path: str) -> Place:
    if not isinstance(obj, dict):
        raise SchemaError("place must be an object", path=path)
    _no_extras(obj, {"id", "cloud", "capacity"}, path)
    capacity = _opt(obj, "capacity", int, path, None)
    if isinstance(capacity, bool):
        raise SchemaError("wrong type for key", path=f"{path}/capacity")
    return Place(
        id=_require(obj, "id", str, path),
        cloud=_require(obj, "cloud", str, path),
        capacity=capacity,
    )


def _parse_transition(obj, lat: SecurityLattice, path: str) -> TaskTransition:
    if not isinstance(obj, dict):
        raise SchemaError("transition must be an object", path=path)
    _no_extras(obj, {"id", "cloud", "clearance", "floor", "inputs", "outputs"}, path)
    inputs = []
    for i, arc in enumerate(_opt(obj, "inputs", list, path, [])):
        apath = f"{path}/inputs/{i}"
        if not isinstance(arc, dict):
            raise SchemaError("input arc must be an object", path=apath)
        _no_extras(arc, {"place", "mode", "class"}, apath)
        inputs.append(
            ArcIn(
                place=_require(arc, "place", str, apath),
                mode=_require(arc, "mode", str, apath),
                pattern=_opt(arc, "class", str, apath, WILDCARD),
            )
        )
    outputs = []
    for i, arc in enumerate(_opt(obj, "outputs", list, path, [])):
        apath = f"{path}/outputs/{i}"
        if not isinstance(arc, dict):
            raise SchemaError("output arc must be an object", path=apath)
        _no_extras(arc, {"place", "class"}, apath)
        outputs.append(
            ArcOut(
                place=_require(arc, "place", str, apath),
                klass=_require(arc, "class", str, apath),
            )
        )
    return TaskTransition(
        id=_require(obj, "id", str, path),
        cloud=_require(obj, "cloud", str, path),
        clearance=_require(obj, "clearance", str, path),
        floor=_opt(obj, "floor", str, path, lat.bottom),
        inputs=tuple(inputs),
        outputs=tuple(outputs),
    )


def _parse_marking(obj, path: str) -> Marking:
    if not isinstance(obj, dict):
        raise SchemaError("marking must be an object", path=path)
    contents: dict[str, list[tuple[str, str, int]]] = {}
    for pid, tokens in obj.items():
        if not isinstance(tokens, list):
            raise SchemaError("expected a token list", path=f"{path}/{pid}")
        entries = []
        for i, tok in enumerate(tokens):
            tpath = f"{path}/{pid}/{i}"
            if not isinstance(tok, dict):
                raise SchemaError("token must be an object", path=tpath)
            _no_extras(tok, {"class", "level", "count"}, tpath)
            count = _require(tok, "count", int, tpath)
            if isinstance(count, bool) or count < 1:
                raise SchemaError("count must be a positive integer", path=f"{tpath}/count")
            entries.append(
                (
                    _require(tok, "class", str, tpath),
                    _require(tok, "level", str, tpath),
                    count,
                )
            )
        contents[pid] = entries
    return marking_of(contents)


_BY_CLEARANCE = "by_clearance:"


def _parse_obs(spec, net: FssmNet, path: str) -> ObsMap:
    if not isinstance(spec, dict):
        raise SchemaError("observation map must be an object", path=path)
    fallback_level = None
    assignment: dict[str, Optional[str]] = {}
    for tid, sym in spec.items():
        if tid == "default":
            if not isinstance(sym, str) or not sym.startswith(_BY_CLEARANCE):
                raise SchemaError(
                    'default must be "by_clearance:<level>"', path=f"{path}/default"
                )
            fallback_level = sym[len(_BY_CLEARANCE):]
            with _at(f"{path}/default"):
                net.lattice.check_level(fallback_level)
            continue
        if sym is not None and not isinstance(sym, str):
            raise SchemaError("symbol must be a string or null", path=f"{path}/{tid}")
        assignment[tid] = sym
    if fallback_level is not None:
        lat = net.lattice
        for t in net.transitions:
            if t.id not in assignment:
                assignment[t.id] = (
                    t.id if lat.leq(t.clearance, fallback_level) else None
                )
        provenance = f"derived_from({fallback_level})"
    else:
        provenance = "explicit"
    with _at(path):
        return obs_from_dict(assignment, net, provenance=provenance)


def _parse_secret(spec, net: FssmNet, path: str) -> SecretSpec:
    if not isinstance(spec, dict) or len(spec) != 1:
        raise SchemaError('secret must be {"state": ...} or {"monitor": ...}', path=path)
    if "state" in spec:
        with _at(f"{path}/state"):
            return parse_predicate(spec["state"], net)
    if "monitor" in spec:
        obj = spec["monitor"]
        mpath = f"{path}/monitor"
        if not isinstance(obj, dict):
            raise SchemaError("monitor must be an object", path=mpath)
        _no_extras(obj, {"states", "initial", "accepting", "edges"}, mpath)
        states = _str_list(_require(obj, "states", list, mpath), f"{mpath}/states")
        accepting = _str_list(
            _opt(obj, "accepting", list, mpath, []), f"{mpath}/accepting"
        )
        rules = []
        for i, rule in enumerate(_opt(obj, "edges", list, mpath, [])):
            if (
                not isinstance(rule, list)
                or len(rule) != 3
                or not all(isinstance(x, str) for x in rule)
            ):
                raise SchemaError(
                    "monitor edge must be [src, transition, dst]", path=f"{mpath}/edges/{i}"
                )
            rules.append(tuple(rule))
        with _at(mpath):
            monitor = RunMonitor(
                states=tuple(states),
                initial=_require(obj, "initial", str, mpath),
                rules=tuple(sorted(rules)),
                accepting=frozenset(accepting),
            )
            monitor.validate(net)
        return monitor
    raise SchemaError('secret must be {"state": ...} or {"monitor": ...}', path=path)


def _parse_workflow(obj, lat: SecurityLattice) -> Workflow:
    _no_extras(obj, {"tasks", "edges"}, "/workflow")
    tasks = []
    for i, t in enumerate(_require(obj, "tasks", list, "/workflow")):
        tpath = f"/workflow/tasks/{i}"
        if not isinstance(t, dict):
            raise SchemaError("task must be an object", path=tpath)
        _no_extras(t, {"id", "touches"}, tpath)
        touches = []
        for j, pair in enumerate(_opt(t, "touches", list, tpath, [])):
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(x, str) for x in pair)
            ):
                raise SchemaError(
                    "touch must be [class, level]", path=f"{tpath}/touches/{j}"
                )
            touches.append((pair[0], pair[1]))
        tasks.append((_require(t, "id", str, tpath), touches))
    edges = []
    for i, e in enumerate(_opt(obj, "edges", list, "/workflow", [])):
        if (
            not isinstance(e, list)
            or len(e) != 4
            or not all(isinstance(x, str) for x in e)
        ):
            raise SchemaError(
                "edge must be [producer, consumer, class, level]",
                path=f"/workflow/edges/{i}",
            )
        edges.append((e[0], e[1], e[2], e[3]))
    with _at("/workflow"):
        return build_workflow(tasks, edges, lat)


def _parse_costs(obj, net: FssmNet, wf: Workflow):
    _no_extras(obj, {"exec", "transfer"}, "/costs")
    exec_spec = _opt(obj, "exec", dict, "/costs", {})
    by_cloud: dict[str, tuple[Fraction, tuple]] = {}
    for cid, val in exec_spec.items():
        cpath = f"/costs/exec/{cid}"
        if cid not in net.cloud_by_id:
            raise SchemaError(f"unknown cloud {cid!r}", path=cpath)
        if isinstance(val, dict):
            overrides = []
            for tid, rate in val.items():
                if tid not in wf.task_by_id:
                    raise SchemaError(f"unknown task {tid!r}", path=f"{cpath}/{tid}")
                overrides.append((tid, parse_fraction(rate, f"{cpath}/{tid}")))
            by_cloud[cid] = (Fraction(0), tuple(sorted(overrides)))
        else:
            by_cloud[cid] = (parse_fraction(val, cpath), ())
    specs = []
    for c in net.clouds:
        default, overrides = by_cloud.get(c.id, (Fraction(0), ()))
        with _at(f"/costs/exec/{c.id}"):
            specs.append(
                CloudSpec(
                    id=c.id,
                    clearance=c.clearance,
                    exec_cost=default,
                    overrides=overrides,
                )
            )
    transfer = parse_fraction(_opt(obj, "transfer", None, "/costs", 0), "/costs/transfer")
    with _at("/costs/transfer"):
        cost = CostModel(transfer_cost=transfer)
    return tuple(specs), cost


# --------------------------------------------------------------------------
# serialization


def _hasse(lat: SecurityLattice) -> list[list[str]]:
    covers = []
    for a in lat.levels:
        for b in lat.levels:
            if a == b or not lat.leq(a, b):
                continue
            if any(
                c not in (a, b) and lat.leq(a, c) and lat.leq(c, b) for c in lat.levels
            ):
                continue
            covers.append([a, b])
    return sorted(covers)


def serialize_model(bundle: ModelBundle) -> str:
    net = bundle.net
    doc: dict = {
        "lattice": {"levels": list(net.lattice.levels), "covers": _hasse(net.lattice)},
        "clouds": [{"id": c.id, "clearance": c.clearance} for c in net.clouds],
        "places": [
            {"id": p.id, "cloud": p.cloud, **({"capacity": p.capacity} if p.capacity is not None else {})}
            for p in net.places
        ],
        "transitions": [_transition_obj(t) for t in net.transitions],
        "initial_markings": [_marking_obj(m) for m in net.initials],
    }
    if bundle.obs_maps:
        doc["observations"] = {
            name: {tid: sym for tid, sym in obs.entries}
            for name, obs in bundle.obs_maps
        }
    if bundle.secrets:
        doc["secrets"] = {
            name: _secret_obj(spec) for name, spec in bundle.secrets
        }
    if bundle.observers:
        doc["observers"] = dict(bundle.observers)
    if bundle.workflow is not None:
        doc["workflow"] = {
            "tasks": [
                {"id": t.id, "touches": [[k, lv] for k, lv in t.touches]}
                for t in bundle.workflow.tasks
            ],
            "edges": [
                [e.producer, e.consumer, e.klass, e.level]
                for e in bundle.workflow.edges
            ],
        }
        exec_obj: dict = {}
        for spec in bundle.cloud_specs:
            if spec.overrides:
                exec_obj[spec.id] = {
                    tid: render_fraction(rate) for tid, rate in spec.overrides
                }
            elif spec.exec_cost != 0:
                exec_obj[spec.id] = render_fraction(spec.exec_cost)
        transfer = bundle.cost.transfer_cost if bundle.cost else Fraction(0)
        doc["costs"] = {"exec": exec_obj, "transfer": render_fraction(transfer)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _transition_obj(t: TaskTransition) -> dict:
    inputs = []
    for a in t.inputs:
        arc = {"place": a.place, "mode": a.mode}
        if a.pattern != WILDCARD:
            arc["class"] = a.pattern
        inputs.append(arc)
    return {
        "id": t.id,
        "cloud": t.cloud,
        "clearance": t.clearance,
        "floor": t.floor,
        "inputs": inputs,
        "outputs": [{"place": a.place, "class": a.klass} for a in t.outputs],
    }


def _marking_obj(m: Marking) -> dict:
    return {
        pid: [
            {"class": klass, "level": level, "count": count}
            for klass, level, count in packed
        ]
        for pid, packed in m.entries
    }


def _secret_obj(spec: SecretSpec) -> dict:
    if isinstance(spec, RunMonitor):
        return {
            "monitor": {
                "states": list(spec.states),
                "initial": spec.initial,
                "accepting": sorted(spec.accepting),
                "edges": [list(r) for r in spec.rules],
            }
        }
    return {"state": predicate_to_obj(spec)}
