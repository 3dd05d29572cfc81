"""Finite relational structures, canonical forms, and age enumeration.

A homogeneous structure is presented by its signature plus either a list of
forbidden induced substructures or an explicit age up to a bound.  Everything
downstream (orbits, subgroups, fragments) reduces to combinatorics over these
finite structures.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import BoundExceeded, ValidationError


@dataclass(frozen=True)
class Signature:
    """Ordered list of relation symbols with arities.

    The order is fixed and used for canonical encoding, so two signatures
    with the same symbols in different order are distinct.
    """

    symbols: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [n for n, _ in self.symbols]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate symbol names in {names}")
        for n, a in self.symbols:
            if a < 1:
                raise ValidationError(f"symbol {n} has arity {a} < 1")

    def index(self, name):
        for i, (n, _) in enumerate(self.symbols):
            if n == name:
                return i
        raise KeyError(name)

    @property
    def names(self):
        return tuple(n for n, _ in self.symbols)

    @property
    def arities(self):
        return tuple(a for _, a in self.symbols)

    @property
    def max_arity(self):
        return max((a for _, a in self.symbols), default=0)


EMPTY_SIGNATURE = Signature(())


class FinStructure:
    """Immutable finite structure over a fixed signature.

    Domain is 0..size-1; ``rels[i]`` is the set of tuples of the i-th symbol.
    Equality and hashing are by value, so structures can key caches.
    """

    __slots__ = ("sig", "size", "rels", "_key", "_hash", "_inc")

    def __init__(self, sig, size, rels):
        if isinstance(rels, dict):
            rels = [rels.get(name, ()) for name in sig.names]
        rels = tuple(frozenset(map(tuple, r)) for r in rels)
        if len(rels) != len(sig.symbols):
            raise ValidationError("relation list does not match signature")
        for (name, arity), tuples in zip(sig.symbols, rels):
            for t in tuples:
                if len(t) != arity or any(not (0 <= x < size) for x in t):
                    raise ValidationError(f"bad tuple {t} for {name}/{arity} in size-{size} structure")
        self.sig = sig
        self.size = size
        self.rels = rels
        self._key = (sig, size, rels)
        self._hash = hash(self._key)
        self._inc = None

    def __eq__(self, other):
        return isinstance(other, FinStructure) and self._key == other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        parts = []
        for (name, _), tuples in zip(self.sig.symbols, self.rels):
            if tuples:
                parts.append(f"{name}={sorted(tuples)}")
        return f"FinStructure(size={self.size}" + (", " + ", ".join(parts) if parts else "") + ")"

    def rel(self, name):
        return self.rels[self.sig.index(name)]

    def encode(self):
        """Deterministic byte encoding of the labeled structure."""
        return repr((self.size, tuple(tuple(sorted(r)) for r in self.rels))).encode()

    def substructure(self, points):
        """Induced substructure on ``points``, relabeled in the given order."""
        points = list(points)
        pos = {p: i for i, p in enumerate(points)}
        keep = set(points)
        rels = []
        for tuples in self.rels:
            rels.append(tuple(tuple(pos[x] for x in t) for t in tuples if set(t) <= keep))
        return FinStructure(self.sig, len(points), rels)

    def relabel(self, perm):
        """Relabel point i to perm[i]."""
        rels = [tuple(tuple(perm[x] for x in t) for t in tuples) for tuples in self.rels]
        return FinStructure(self.sig, self.size, rels)

    def incidences(self):
        """Per point: list of (symbol index, tuple, positions of the point)."""
        if self._inc is None:
            inc = [[] for _ in range(self.size)]
            for si, tuples in enumerate(self.rels):
                for t in tuples:
                    for p in set(t):
                        positions = tuple(i for i, x in enumerate(t) if x == p)
                        inc[p].append((si, t, positions))
            self._inc = inc
        return self._inc


def _refine(struct, colors):
    """Stable coloring refinement; colors normalized to ranks 0..k-1."""
    inc = struct.incidences()
    n = struct.size
    while True:
        sigs = []
        for v in range(n):
            local = sorted((si, positions, tuple(colors[x] for x in t)) for si, t, positions in inc[v])
            sigs.append((colors[v], tuple(local)))
        order = sorted(set(sigs))
        rank = {s: i for i, s in enumerate(order)}
        new = [rank[s] for s in sigs]
        if new == colors:
            return new
        colors = new


@lru_cache(maxsize=200000)
def canonical_form(struct):
    """Canonical code: equal for two structures iff they are isomorphic.

    Partition refinement with full branching on the first non-singleton
    cell; the minimum leaf encoding over the invariant search tree is the
    code.  Exact at the sizes this package produces.
    """
    n = struct.size
    if n == 0:
        return struct.encode()
    best = [None]

    def leaf(colors):
        perm = colors  # discrete: color ranks are a bijection
        code = struct.relabel(perm).encode()
        if best[0] is None or code < best[0]:
            best[0] = code

    def search(colors):
        colors = _refine(struct, colors)
        ncell = len(set(colors))
        if ncell == n:
            leaf(colors)
            return
        # first non-singleton color class, by color rank
        counts = {}
        for c in colors:
            counts[c] = counts.get(c, 0) + 1
        target = min(c for c, k in counts.items() if k > 1)
        for v in range(n):
            if colors[v] == target:
                child = list(colors)
                child[v] = ncell  # individualize; re-ranked by next refine
                search(child)

    search([0] * n)
    return best[0]


def isomorphic(a, b):
    if a.size != b.size or a.sig != b.sig:
        return False
    return canonical_form(a) == canonical_form(b)


def embeddings(a, b):
    """All injective maps a -> b that preserve and reflect every relation."""
    if a.sig != b.sig:
        return []
    return _embeddings_cached(a, b, None)


def embeddings_covering(a, b, point):
    """Embeddings of a into b whose image contains the given b-point."""
    return _embeddings_cached(a, b, point)


@lru_cache(maxsize=200000)
def _embeddings_cached(a, b, must_cover):
    n, m = a.size, b.size
    if n > m:
        return ()
    out = []
    image = [None] * n
    used = set()

    def relations_ok(i):
        # tuples of a fully assigned and ending in freshly placed point i
        for si, tuples in enumerate(a.rels):
            brel = b.rels[si]
            for t in tuples:
                if i in t and all(image[x] is not None for x in t):
                    if tuple(image[x] for x in t) not in brel:
                        return False
        # reflect: b-tuples inside the image must pull back into a
        inv = {image[j]: j for j in range(n) if image[j] is not None}
        for si, tuples in enumerate(b.rels):
            arel = a.rels[si]
            for t in tuples:
                if image[i] in t and all(x in inv for x in t):
                    if tuple(inv[x] for x in t) not in arel:
                        return False
        return True

    def rec(i):
        if i == n:
            if must_cover is None or must_cover in used:
                out.append(tuple(image))
            return
        for cand in range(m):
            if cand in used:
                continue
            image[i] = cand
            used.add(cand)
            if relations_ok(i):
                rec(i + 1)
            used.discard(cand)
            image[i] = None

    rec(0)
    return tuple(out)


def automorphisms(struct):
    return embeddings(struct, struct)


@dataclass(frozen=True)
class ClassPresentation:
    """A homogeneous structure given by forbidden patterns or an explicit age.

    Forbidden semantics: a structure is admitted iff no forbidden structure
    has an induced embedding into it.  Explicit ages must be closed under
    substructure and isomorphism up to the bound.
    """

    sig: Signature
    mode: str = "forbidden"  # "forbidden" | "age"
    forbidden: tuple = ()
    age_list: tuple = ()
    age_bound: int = 0
    homogeneous: bool = True
    transitive: bool = False
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.mode not in ("forbidden", "age"):
            raise ValidationError(f"unknown mode {self.mode}")
        for s in self.forbidden:
            if s.size < 1:
                raise ValidationError("forbidden structures must have size >= 1")
            if s.sig != self.sig:
                raise ValidationError("forbidden structure over wrong signature")
        if self.mode == "age":
            if self.age_bound < 1:
                raise ValidationError("explicit age needs a bound >= 1")
            for s in self.age_list:
                if s.sig != self.sig:
                    raise ValidationError("age structure over wrong signature")

    def __repr__(self):
        tag = self.name or f"{self.mode}/{len(self.forbidden) or len(self.age_list)}"
        return f"ClassPresentation({tag})"


@lru_cache(maxsize=None)
def _age_codes(pres, size):
    return frozenset(canonical_form(s) for s in age_level(pres, size))


def valid_structure(pres, struct):
    """Membership of a concrete structure in the presented age."""
    if pres.mode == "forbidden":
        return not any(
            f.size <= struct.size and embeddings(f, struct) for f in pres.forbidden
        )
    if struct.size > pres.age_bound:
        raise BoundExceeded(f"size {struct.size} exceeds explicit-age bound {pres.age_bound}")
    return canonical_form(struct) in _age_codes(pres, struct.size)


def _point_code(struct, p):
    return struct.substructure([p]).encode()


@lru_cache(maxsize=None)
def _forbidden_profiles(pres):
    """Per forbidden pattern: (size, sorted per-point 1-codes) for prefiltering."""
    out = []
    for f in pres.forbidden:
        codes = tuple(sorted(_point_code(f, p) for p in range(f.size)))
        out.append((f, codes))
    return tuple(out)


def _is_submultiset(small, big):
    it = iter(big)
    for x in small:
        for y in it:
            if y == x:
                break
            if y > x:
                return False
        else:
            return False
    return True


@lru_cache(maxsize=500000)
def _region_ok(pres, sub):
    """No forbidden pattern embeds into ``sub`` covering its last point."""
    new = sub.size - 1
    codes = tuple(sorted(_point_code(sub, p) for p in range(sub.size)))
    for f, fcodes in _forbidden_profiles(pres):
        if f.size > sub.size or not _is_submultiset(fcodes, codes):
            continue
        if embeddings_covering(f, sub, new):
            return False
    return True


def one_point_extensions(pres, struct, pinned=None, first_only=False):
    """Valid one-point extensions of a member, the new point labeled ``size``.

    ``pinned`` is an optional pair (points, target): the induced structure on
    points + [new] is forced to equal ``target`` (whose last point is the new
    one).  Tuples outside the pinned region are enumerated by DFS with
    level-wise forbidden pruning.
    """
    m = struct.size
    new = m
    forced = {}
    if pinned is not None:
        pts, target = pinned
        if target.size != len(pts) + 1:
            raise ValidationError("pinned target has wrong size")
        region = list(pts) + [new]
        back = {i: p for i, p in enumerate(region)}
        for si, (name, arity) in enumerate(pres.sig.symbols):
            trel = target.rels[si]
            for t in itertools.product(range(len(region)), repeat=arity):
                mapped = tuple(back[i] for i in t)
                if new not in mapped:
                    continue
                forced[(si, mapped)] = t in trel
        # base region must already match target's old part
        if struct.substructure(pts) != target.substructure(range(len(pts))):
            return

    # candidate tuples touching the new point, grouped by max old point
    groups = {}
    for si, (name, arity) in enumerate(pres.sig.symbols):
        for t in itertools.product(range(m + 1), repeat=arity):
            if new not in t:
                continue
            olds = [x for x in t if x != new]
            level = max(olds) if olds else -1
            groups.setdefault(level, []).append((si, t))
    levels = sorted(groups)

    base_rels = [set(r) for r in struct.rels]
    found = []

    def check_level(rels, upto):
        region = [p for p in range(upto + 1)] + [new]
        ext = FinStructure(pres.sig, m + 1, [tuple(r) for r in rels])
        if pres.mode == "forbidden":
            return _region_ok(pres, ext.substructure(region))
        return True

    def rec(li, rels):
        if found and first_only:
            return
        if li == len(levels):
            ext = FinStructure(pres.sig, m + 1, [tuple(r) for r in rels])
            if pres.mode == "age":
                if not valid_structure(pres, ext):
                    return
            elif not _region_ok(pres, ext):
                return
            found.append(ext)
            return
        level = levels[li]
        cands = groups[level]
        free = [c for c in cands if c not in forced]
        fixed = [c for c in cands if c in forced]

        def assign(fi, rels2):
            if found and first_only:
                return
            if fi == len(free):
                if check_level(rels2, level):
                    rec(li + 1, rels2)
                return
            si, t = free[fi]
            assign(fi + 1, rels2)
            rels3 = [set(r) for r in rels2]
            rels3[si].add(t)
            assign(fi + 1, rels3)

        rels1 = [set(r) for r in rels]
        for si, t in fixed:
            if forced[(si, t)]:
                rels1[si].add(t)
        assign(0, rels1)

    rec(0, base_rels)
    yield from found


@lru_cache(maxsize=None)
def age_level(pres, size):
    """Isomorphism-class representatives of age members of exactly ``size``."""
    if size < 1:
        return ()
    if pres.mode == "age":
        if size > pres.age_bound:
            raise BoundExceeded(f"size {size} exceeds explicit-age bound {pres.age_bound}")
        seen = {}
        for s in pres.age_list:
            if s.size == size:
                seen.setdefault(canonical_form(s), s)
        return tuple(seen[c] for c in sorted(seen))
    if size == 1:
        cands = []
        slots = [(si, (0,) * arity) for si, (_, arity) in enumerate(pres.sig.symbols)]
        for mask in itertools.product((False, True), repeat=len(slots)):
            rels = [[] for _ in pres.sig.symbols]
            for on, (si, t) in zip(mask, slots):
                if on:
                    rels[si].append(t)
            s = FinStructure(pres.sig, 1, [tuple(r) for r in rels])
            if valid_structure(pres, s):
                cands.append(s)
        return tuple(sorted(cands, key=canonical_form))
    seen = {}
    for base in age_level(pres, size - 1):
        for ext in one_point_extensions(pres, base):
            code = canonical_form(ext)
            seen.setdefault(code, ext)
    return tuple(seen[c] for c in sorted(seen))


def enumerate_age(pres, size_bound):
    """One representative per isomorphism class up to the bound, in code order."""
    if size_bound < 1:
        raise ValidationError("size_bound must be >= 1")
    out = []
    for s in range(1, size_bound + 1):
        out.extend(age_level(pres, s))
    return out


@dataclass(frozen=True)
class AmalgamationFailure:
    kind: str  # "joint-embedding" | "amalgamation"
    parts: tuple

    def describe(self):
        if self.kind == "joint-embedding":
            a, b = self.parts
            return f"no joint embedding for sizes {a.size}+{b.size}"
        a, b1, f1, b2, f2 = self.parts
        return f"no amalgam of {b1.size} and {b2.size} over a common {a.size}-point part"


@dataclass(frozen=True)
class AmalgamationReport:
    bound: int
    failures: tuple

    @property
    def ok(self):
        return not self.failures

    def describe(self):
        if self.ok:
            return f"no joint-embedding or amalgamation failures up to size {self.bound}"
        return "; ".join(f.describe() for f in self.failures)


@lru_cache(maxsize=None)
def check_amalgamation(pres, size_bound):
    """Search for JEP/AP failures among age members within the bound.

    Only instances whose canonical amalgam would fit inside the bound are
    tested, so a clean report certifies the class exactly up to that size.
    """
    if size_bound < 2:
        raise ValidationError("size_bound must be >= 2")
    members = enumerate_age(pres, size_bound)
    failures = []
    # joint embedding
    for a, b in itertools.combinations_with_replacement(members, 2):
        if a.size + b.size > size_bound:
            continue
        if not any(embeddings(a, c) and embeddings(b, c) for c in members):
            failures.append(AmalgamationFailure("joint-embedding", (a, b)))
    # amalgamation over a common part
    for a in members:
        for b1, b2 in itertools.combinations_with_replacement(members, 2):
            if b1.size + b2.size - a.size > size_bound:
                continue
            embs1 = embeddings(a, b1)
            embs2 = embeddings(a, b2)
            if not embs1 or not embs2:
                continue
            for f1 in embs1:
                for f2 in embs2:
                    if not _has_amalgam(members, a, b1, f1, b2, f2):
                        failures.append(AmalgamationFailure("amalgamation", (a, b1, f1, b2, f2)))
                        if len(failures) > 20:
                            return AmalgamationReport(size_bound, tuple(failures))
    return AmalgamationReport(size_bound, tuple(failures))


def _has_amalgam(members, a, b1, f1, b2, f2):
    for c in members:
        for g1 in embeddings(b1, c):
            img1 = {f1[i]: g1[f1[i]] for i in range(a.size)}
            for g2 in embeddings(b2, c):
                if all(g2[f2[i]] == img1[f1[i]] for i in range(a.size)):
                    return True
    return False


def empty_structure(sig, size):
    return FinStructure(sig, size, [() for _ in sig.symbols])
