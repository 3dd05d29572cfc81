"""Orbits of the automorphism group on n-tuples.

For a homogeneous structure the n-orbits are exactly the quantifier-free
n-types: an equality pattern on positions plus the induced structure on the
distinct entries, taken in first-occurrence order.  Tables are immutable
after construction; restriction across arities is resolved lazily and
cached.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .errors import TupleNotInAge, ValidationError
from .structures import (
    FinStructure,
    age_level,
    check_amalgamation,
    one_point_extensions,
    valid_structure,
)


@dataclass(frozen=True)
class TupleType:
    """Quantifier-free type of an n-tuple.

    ``pattern`` is a restricted-growth string recording equalities among the
    n positions; ``carrier`` is the induced structure on the distinct
    entries, labeled in first-occurrence order.
    """

    pattern: tuple
    carrier: FinStructure

    def __post_init__(self):
        d = self.carrier.size
        if sorted(set(self.pattern)) != list(range(d)):
            raise ValidationError(f"pattern {self.pattern} is not surjective onto 0..{d - 1}")
        seen = -1
        for v in self.pattern:
            if v > seen + 1:
                raise ValidationError(f"pattern {self.pattern} not in first-occurrence order")
            seen = max(seen, v)

    @property
    def arity(self):
        return len(self.pattern)

    @property
    def distinct(self):
        return self.carrier.size

    def key(self):
        return (self.pattern, self.carrier.encode())

    def representative(self):
        """The tuple (over the carrier) realizing this type."""
        return tuple(self.pattern)

    def describe(self):
        return f"pattern={self.pattern} carrier={self.carrier!r}"


def tuple_type_of(member, t):
    """Type of a concrete tuple inside a structure."""
    order = []
    index = {}
    for x in t:
        if x not in index:
            index[x] = len(order)
            order.append(x)
    pattern = tuple(index[x] for x in t)
    return TupleType(pattern, member.substructure(order))


def _rg_strings(n):
    def rec(prefix, mx):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for v in range(mx + 2):
            yield from rec(prefix + [v], max(mx, v))

    yield from rec([], -1)


@lru_cache(maxsize=None)
def _labeled_members(pres, d):
    """All labeled age members of size d (every relabeling, deduplicated)."""
    seen = {}
    for rep in age_level(pres, d):
        for perm in itertools.permutations(range(d)):
            s = rep.relabel(perm)
            seen.setdefault(s.encode(), s)
    return tuple(seen[c] for c in sorted(seen))


class OrbitTable:
    """Ordered list of the n-orbits with lazy restriction maps."""

    def __init__(self, pres, arity, orbits, caveat):
        self.pres = pres
        self.arity = arity
        self.orbits = tuple(orbits)
        self.caveat = caveat
        self._index = {o.key(): i for i, o in enumerate(self.orbits)}
        self._restrictions = {}

    def __len__(self):
        return len(self.orbits)

    def index_of(self, tuple_type):
        try:
            return self._index[tuple_type.key()]
        except KeyError:
            raise TupleNotInAge(f"type {tuple_type.describe()} is not an orbit here") from None

    def restrict(self, i, sigma):
        """Index (in the arity-len(sigma) table) of the orbit restricted along sigma.

        ``sigma`` maps positions of the restricted tuple into 0..arity-1; any
        map is allowed, including repeats and permutations.
        """
        sigma = tuple(sigma)
        if any(not (0 <= s < self.arity) for s in sigma):
            raise ValidationError(f"position map {sigma} out of range for arity {self.arity}")
        key = (i, sigma)
        if key not in self._restrictions:
            o = self.orbits[i]
            rep = o.representative()
            sub = tuple(rep[s] for s in sigma)
            t = tuple_type_of(o.carrier, sub)
            target = enumerate_orbits(self.pres, len(sigma))
            self._restrictions[key] = target.index_of(t)
        return self._restrictions[key]


@lru_cache(maxsize=None)
def enumerate_orbits(pres, n):
    """The n-orbit table: one TupleType per orbit, in canonical order."""
    if n < 1:
        raise ValidationError("arity must be >= 1")
    orbits = []
    for pattern in _rg_strings(n):
        d = max(pattern) + 1
        for carrier in _labeled_members(pres, d):
            orbits.append(TupleType(pattern, carrier))
    orbits.sort(key=lambda o: o.key())
    caveat = not check_amalgamation(pres, max(n, 2)).ok
    return OrbitTable(pres, n, orbits, caveat)


def count_orbits(pres, n):
    return len(enumerate_orbits(pres, n))


def orbit_of(pres, member, t):
    """Index of the orbit containing the concrete tuple ``t`` of ``member``."""
    if not valid_structure(pres, member):
        raise TupleNotInAge("ambient structure is not in the age")
    tt = tuple_type_of(member, t)
    if not valid_structure(pres, tt.carrier):
        raise TupleNotInAge("induced substructure is forbidden")
    return enumerate_orbits(pres, len(t)).index_of(tt)


@dataclass(frozen=True)
class ExtensionCount:
    ext: TupleType
    count: int
    exact: bool  # False means "at least count" (saturated at the bound)

    def describe(self):
        mark = "" if self.exact else ">="
        return f"{mark}{self.count} of {self.ext.describe()}"


@dataclass(frozen=True)
class ExtensionProfile:
    base: TupleType
    bound: int
    entries: tuple

    def finite_entries(self):
        return tuple(e for e in self.entries if e.exact and e.count > 0)

    def saturated_near_bound(self):
        return any(e.exact and e.count == self.bound - 1 for e in self.entries)


def _greedy_extension_count(pres, carrier, ext_struct, bound):
    """How many one-point realizations of ``ext_struct`` over the carrier fit
    in a single growing age member; saturates at ``bound``.

    For an amalgamation class the greedy count equals min(bound, true
    multiplicity): any member with fewer realizations than the structure
    admits extends by a fresh realization.
    """
    pins = tuple(range(carrier.size))
    member = carrier
    count = 0
    while count < bound:
        nxt = next(iter(one_point_extensions(pres, member, pinned=(pins, ext_struct), first_only=True)), None)
        if nxt is None:
            break
        member = nxt
        count += 1
    return count


@lru_cache(maxsize=None)
def extension_profile(pres, base, bound=8):
    """Count classes of one-point extensions of a tuple type.

    Extensions repeating an existing entry always have multiplicity one.
    New-point extensions are counted greedily inside amalgamated members and
    saturate at ``bound`` (reported as inexact).
    """
    if bound < 2:
        raise ValidationError("bound must be >= 2")
    n = base.arity
    d = base.distinct
    entries = []
    for v in sorted(set(base.pattern)):
        ext = TupleType(base.pattern + (v,), base.carrier)
        entries.append(ExtensionCount(ext, 1, True))
    for ext_struct in one_point_extensions(pres, base.carrier):
        ext = TupleType(base.pattern + (d,), ext_struct)
        c = _greedy_extension_count(pres, base.carrier, ext_struct, bound)
        entries.append(ExtensionCount(ext, c, c < bound))
    return ExtensionProfile(base, bound, tuple(entries))
