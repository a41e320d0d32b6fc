"""Finite security lattices.

Levels are plain strings.  A lattice is built from its covering (Hasse)
relation; the reflexive-transitive closure, lattice laws, and the join/meet
tables are computed and validated once at construction time.  Instances are
immutable and safe for unrestricted concurrent reads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import DuplicateLevel, NotALattice, OrderCycle, UnknownLevel

_IDENT = re.compile(r"[A-Za-z0-9_]+\Z")


def is_identifier(name: str) -> bool:
    """Names accepted for levels, ids, and token classes."""
    return isinstance(name, str) and bool(_IDENT.match(name))


@dataclass(frozen=True)
class SecurityLattice:
    """A finite lattice of classification levels.

    ``order`` holds the full reflexive-transitive <= relation as pairs;
    ``joins`` and ``meets`` are total binary tables over ``levels``.
    """

    levels: tuple[str, ...]
    order: frozenset[tuple[str, str]]
    top: str
    bottom: str
    joins: dict[tuple[str, str], str] = field(repr=False)
    meets: dict[tuple[str, str], str] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_level_set", frozenset(self.levels))

    def check_level(self, a: str) -> None:
        if a not in self._level_set:
            raise UnknownLevel(f"unknown security level {a!r}")

    def leq(self, a: str, b: str) -> bool:
        """True iff information at ``a`` may flow to ``b``."""
        self.check_level(a)
        self.check_level(b)
        return (a, b) in self.order

    def join(self, a: str, b: str) -> str:
        self.check_level(a)
        self.check_level(b)
        return self.joins[(a, b)]

    def meet(self, a: str, b: str) -> str:
        self.check_level(a)
        self.check_level(b)
        return self.meets[(a, b)]

    def join_all(self, items: Iterable[str]) -> str:
        """Fold of ``join``; the empty fold yields ``bottom``."""
        acc = self.bottom
        for x in items:
            acc = self.join(acc, x)
        return acc


def build_lattice(level_names: list[str], covers: list[tuple[str, str]]) -> SecurityLattice:
    """Build a validated lattice from level names and covering pairs.

    ``covers`` lists (lower, upper) pairs of the Hasse diagram; the full
    order is their reflexive-transitive closure.  Raises ``DuplicateLevel``,
    ``UnknownLevel``, ``OrderCycle``, or ``NotALattice`` (with a witness
    pair) when the input is not a well-formed lattice.
    """
    if not level_names:
        raise NotALattice("a lattice needs at least one level")
    seen: set[str] = set()
    for name in level_names:
        if not is_identifier(name):
            raise UnknownLevel(f"invalid level name {name!r}")
        if name in seen:
            raise DuplicateLevel(f"level {name!r} declared twice")
        seen.add(name)
    for lo, hi in covers:
        for name in (lo, hi):
            if name not in seen:
                raise UnknownLevel(f"cover references undeclared level {name!r}")

    levels = tuple(sorted(seen))
    index = {name: i for i, name in enumerate(levels)}
    n = len(levels)

    # reflexive-transitive closure of the covers
    below = [[False] * n for _ in range(n)]
    for i in range(n):
        below[i][i] = True
    for lo, hi in covers:
        below[index[lo]][index[hi]] = True
    for k in range(n):
        bk = below[k]
        for i in range(n):
            if below[i][k]:
                bi = below[i]
                for j in range(n):
                    if bk[j]:
                        bi[j] = True

    for i in range(n):
        for j in range(i + 1, n):
            if below[i][j] and below[j][i]:
                raise OrderCycle(
                    f"levels {levels[i]!r} and {levels[j]!r} order each other"
                )

    joins: dict[tuple[str, str], str] = {}
    meets: dict[tuple[str, str], str] = {}
    for i in range(n):
        for j in range(n):
            lub = _unique_bound(below, n, i, j, upper=True)
            if lub is None:
                raise NotALattice(
                    f"levels {levels[i]!r} and {levels[j]!r} have no unique "
                    "least upper bound",
                    witness=(levels[i], levels[j]),
                )
            glb = _unique_bound(below, n, i, j, upper=False)
            if glb is None:
                raise NotALattice(
                    f"levels {levels[i]!r} and {levels[j]!r} have no unique "
                    "greatest lower bound",
                    witness=(levels[i], levels[j]),
                )
            joins[(levels[i], levels[j])] = levels[lub]
            meets[(levels[i], levels[j])] = levels[glb]

    top = levels[0]
    bottom = levels[0]
    for name in levels[1:]:
        top = joins[(top, name)]
        bottom = meets[(bottom, name)]

    order = frozenset(
        (levels[i], levels[j]) for i in range(n) for j in range(n) if below[i][j]
    )
    return SecurityLattice(
        levels=levels, order=order, top=top, bottom=bottom, joins=joins, meets=meets
    )


def _unique_bound(below, n, i, j, upper):
    if upper:
        bounds = [c for c in range(n) if below[i][c] and below[j][c]]
        dominated = lambda c, d: below[c][d]
    else:
        bounds = [c for c in range(n) if below[c][i] and below[c][j]]
        dominated = lambda c, d: below[d][c]
    for c in bounds:
        if all(dominated(c, d) for d in bounds):
            return c
    return None
