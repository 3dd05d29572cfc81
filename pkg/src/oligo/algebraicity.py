"""Algebraic closure, the no-algebraicity predicate, and the transitive merge.

The merge realizes the quotient that glues all 1-orbits into one: a new
point kind stands for an unordered selection of one point per 1-orbit.
Selections are scaffolded by an incidence relation to original points plus,
for each 1-orbit, a "shares that component" relation on selections.  The
per-orbit split keeps the class homogeneous (a single undifferentiated
overlap relation cannot tell a triple sharing a first component from one
sharing a second, which breaks amalgamation).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .errors import ValidationError
from .orbits import (
    ExtensionCount,
    TupleType,
    enumerate_orbits,
    extension_profile,
    tuple_type_of,
)
from .structures import (
    ClassPresentation,
    FinStructure,
    Signature,
    valid_structure,
)


@dataclass(frozen=True)
class AclReport:
    base: TupleType
    bound: int
    algebraic: tuple  # ExtensionCount entries with finite positive multiplicity
    saturated: bool

    def closure_is_trivial(self):
        """True when nothing outside the parameter tuple itself is algebraic."""
        return all(e.ext.distinct == self.base.distinct for e in self.algebraic)

    def describe(self):
        lines = [f"acl over {self.base.describe()} at bound {self.bound}"]
        for e in self.algebraic:
            kind = "parameter entry" if e.ext.distinct == self.base.distinct else "new algebraic point"
            lines.append(f"  {kind}: multiplicity {e.count}, {e.ext.describe()}")
        if self.saturated:
            lines.append("  (a count saturated next to the bound; raise the bound to confirm)")
        return "\n".join(lines)


def acl(pres, member, t, bound=8):
    """Algebraic one-point extensions over the concrete tuple ``t``."""
    base = tuple_type_of(member, t)
    if not valid_structure(pres, base.carrier):
        from .errors import TupleNotInAge

        raise TupleNotInAge("parameter tuple induces a forbidden substructure")
    prof = extension_profile(pres, base, bound)
    algebraic = tuple(e for e in prof.entries if e.exact and e.count > 0)
    return AclReport(base, bound, algebraic, prof.saturated_near_bound())


@dataclass(frozen=True)
class NoAlgebraicityVerdict:
    status: str  # PASS | FAIL | INCONCLUSIVE
    arity_bound: int
    bound: int
    witness: ExtensionCount | None = None
    witness_base: TupleType | None = None

    def describe(self):
        if self.status == "FAIL":
            return (
                f"FAIL: over {self.witness_base.describe()} the extension "
                f"{self.witness.ext.describe()} has finite multiplicity {self.witness.count}"
            )
        if self.status == "INCONCLUSIVE":
            return f"INCONCLUSIVE: a count saturated at bound-1; rerun with a larger bound"
        return f"PASS: no algebraic extensions over any parameter orbit of arity <= {self.arity_bound}"


def is_no_algebraicity(pres, arity_bound=2, bound=8):
    """PASS iff acl adds nothing over any parameter orbit of arity <= bound."""
    saturated = False
    for n in range(1, arity_bound + 1):
        for base in enumerate_orbits(pres, n).orbits:
            prof = extension_profile(pres, base, bound)
            for e in prof.entries:
                if e.ext.distinct > base.distinct and e.exact and e.count > 0:
                    return NoAlgebraicityVerdict("FAIL", arity_bound, bound, e, base)
            if prof.saturated_near_bound():
                saturated = True
    if saturated:
        return NoAlgebraicityVerdict("INCONCLUSIVE", arity_bound, bound)
    return NoAlgebraicityVerdict("PASS", arity_bound, bound)


@dataclass(frozen=True)
class MergedPresentation:
    """Merge output plus the bookkeeping the witness search wants."""

    presentation: ClassPresentation
    source: ClassPresentation
    merged: bool
    orbit_count: int = 1
    v_symbol: str = ""
    in_symbol: str = ""
    r_symbols: tuple = ()


def _fresh(name, taken):
    while name in taken:
        name += "_"
    return name


def _lift(struct, new_sig, old_count):
    rels = list(struct.rels) + [()] * (len(new_sig.symbols) - old_count)
    return FinStructure(new_sig, struct.size, rels)


class _MergedChecker:
    """Semantic validity of structures over a merged signature.

    A structure is valid iff its points can be interpreted as original
    points plus selections (one hidden-or-named member per 1-orbit) that are
    pairwise distinct as selections.
    """

    def __init__(self, source, sig, orig_count, orbit_carriers, v_i, in_i, r_is):
        self.source = source
        self.sig = sig
        self.orig_count = orig_count
        self.orbit_carriers = orbit_carriers  # lifted 1-orbit carriers, in orbit order
        self.v_i = v_i
        self.in_i = in_i
        self.r_is = r_is

    def point_kinds(self, s):
        """Per point: ('v', None) or ('orig', orbit index); None if ill-sorted."""
        kinds = []
        vrel = s.rels[self.v_i]
        for p in range(s.size):
            if (p,) in vrel:
                one = s.substructure([p])
                bare = FinStructure(self.sig, 1, [() if i != self.v_i else ((0,),) for i in range(len(s.rels))])
                if one != bare:
                    return None
                kinds.append(("v", None))
            else:
                one = s.substructure([p])
                hit = None
                for oi, carrier in enumerate(self.orbit_carriers):
                    if one == carrier:
                        hit = oi
                        break
                if hit is None:
                    return None
                kinds.append(("orig", hit))
        return kinds

    def valid(self, s):
        kinds = self.point_kinds(s)
        if kinds is None:
            return False
        vpts = [p for p, k in enumerate(kinds) if k[0] == "v"]
        opts = [p for p, k in enumerate(kinds) if k[0] == "orig"]
        vset, oset = set(vpts), set(opts)
        # sort discipline for every relation
        for si, tuples in enumerate(s.rels):
            if si < self.orig_count:
                if any(set(t) & vset for t in tuples):
                    return False
            elif si == self.in_i:
                for e, x in tuples:
                    if e not in vset or x not in oset:
                        return False
            elif si in self.r_is:
                for e, f in tuples:
                    if e not in vset or f not in vset or e == f:
                        return False
        # original part must be in the source age
        orig_sub = s.substructure(opts)
        orig_struct = FinStructure(
            self.source.sig, len(opts), orig_sub.rels[: self.orig_count]
        )
        if not valid_structure(self.source, orig_struct):
            return False
        # each R_i is symmetric and transitive on selections
        radj = []
        for oi, si in enumerate(self.r_is):
            adj = {p: set() for p in vpts}
            for e, f in s.rels[si]:
                adj[e].add(f)
            for e in vpts:
                for f in adj[e]:
                    if e not in adj[f]:
                        return False
            for e in vpts:
                for f in adj[e]:
                    for g in adj[f]:
                        if g != e and g not in adj[e]:
                            return False
            radj.append(adj)
        # extensionality: distinct selections cannot agree on every component
        for e, f in itertools.combinations(vpts, 2):
            if all(f in radj[oi][e] for oi in range(len(self.r_is))):
                return False
        # incidence: at most one named member per orbit, and sharing matches R
        named = {p: {} for p in vpts}
        for e, x in s.rels[self.in_i]:
            oi = kinds[x][1]
            if oi in named[e] and named[e][oi] != x:
                return False
            named[e][oi] = x
        for e, f in itertools.combinations(vpts, 2):
            for oi in range(len(self.r_is)):
                xe, xf = named[e].get(oi), named[f].get(oi)
                shares = f in radj[oi][e]
                if xe is not None and xf is not None:
                    if (xe == xf) != shares:
                        return False
                elif shares and ((xe is None) != (xf is None)):
                    # a named member shared with an unnamed selection must be named there too
                    return False
        return True


def _kind_structures(sig, kind_rels, size, with_mask=False):
    """All structures on ``size`` points with fixed per-point unary part and
    free cross relations; ``kind_rels`` gives the per-point one-point rels."""
    slots = []
    for si, (_, arity) in enumerate(sig.symbols):
        for t in itertools.product(range(size), repeat=arity):
            if len(set(t)) >= 2:
                slots.append((si, t))
    base = [set() for _ in sig.symbols]
    for p, one in enumerate(kind_rels):
        for si, tuples in enumerate(one.rels):
            for t in tuples:
                base[si].add(tuple(p for _ in t))
    for mask in itertools.product((False, True), repeat=len(slots)):
        rels = [set(r) for r in base]
        chosen = []
        for on, (si, t) in zip(mask, slots):
            if on:
                rels[si].add(t)
                chosen.append((si, t))
        s = FinStructure(sig, size, [tuple(r) for r in rels])
        yield (s, tuple(chosen)) if with_mask else s


def merge_to_transitive(pres, infinity_bound=8):
    """Presentation of the structure on unordered one-point-per-orbit selections.

    Returns the input unchanged (wrapped) when there is a single 1-orbit.
    Requires every 1-orbit to be infinite and the signature to have arity
    at most 2 (the generated pattern search composes pairwise data).
    """
    one_orbits = enumerate_orbits(pres, 1).orbits
    r = len(one_orbits)
    if r == 1:
        return MergedPresentation(pres, pres, False)
    if pres.sig.max_arity > 2:
        raise ValidationError("merge supports signatures of arity <= 2")
    for o in one_orbits:
        prof = extension_profile(pres, o, infinity_bound)
        same = [e for e in prof.entries if e.ext.distinct == 2 and e.ext.carrier.substructure([1]) == o.carrier]
        if all(e.exact for e in same):
            raise ValidationError("merge requires every 1-orbit to be infinite")

    taken = set(pres.sig.names)
    v_name = _fresh("V", taken)
    taken.add(v_name)
    in_name = _fresh("In", taken)
    taken.add(in_name)
    r_names = []
    for i in range(r):
        n = _fresh(f"R{i + 1}", taken)
        taken.add(n)
        r_names.append(n)
    orig_count = len(pres.sig.symbols)
    sig = Signature(
        pres.sig.symbols + ((v_name, 1), (in_name, 2)) + tuple((n, 2) for n in r_names)
    )
    v_i = orig_count
    in_i = orig_count + 1
    r_is = tuple(orig_count + 2 + i for i in range(r))

    carriers = tuple(_lift(o.carrier, sig, orig_count) for o in one_orbits)
    checker = _MergedChecker(pres, sig, orig_count, carriers, v_i, in_i, r_is)

    # valid one-point structures = original 1-orbit carriers + the bare selection
    bare_v = FinStructure(sig, 1, [() if i != v_i else ((0,),) for i in range(len(sig.symbols))])
    valid_one = list(carriers) + [bare_v]

    forbidden = [_lift(f, sig, orig_count) for f in pres.forbidden]
    seen = set(s.encode() for s in forbidden)

    def note(s):
        from .structures import canonical_form

        code = canonical_form(s)
        if code not in seen:
            seen.add(code)
            forbidden.append(s)

    # size 1: every ill-sorted single point
    slots1 = [(si, (0,) * arity) for si, (_, arity) in enumerate(sig.symbols)]
    for mask in itertools.product((False, True), repeat=len(slots1)):
        rels = [[] for _ in sig.symbols]
        for on, (si, t) in zip(mask, slots1):
            if on:
                rels[si].append(t)
        s = FinStructure(sig, 1, [tuple(x) for x in rels])
        if not checker.valid(s):
            note(s)

    # size 2: record invalid structures, keep the valid cross-configurations
    # (per ordered kind pair) to compose candidates of size 3
    valid_cross = {}
    for k1, k2 in itertools.product(valid_one, repeat=2):
        good = []
        for s, mask in _kind_structures(sig, (k1, k2), 2, with_mask=True):
            if checker.valid(s):
                good.append(mask)
            elif valid_one.index(k1) <= valid_one.index(k2):
                note(s)
        valid_cross[(k1, k2)] = good

    # size 3: compose pairwise-valid cross data; anything invalid is minimal
    pairs3 = ((0, 1), (0, 2), (1, 2))
    for kinds in itertools.combinations_with_replacement(valid_one, 3):
        base3 = [set() for _ in sig.symbols]
        for p, one in enumerate(kinds):
            for si, tuples in enumerate(one.rels):
                for t in tuples:
                    base3[si].add(tuple(p for _ in t))
        choices = [valid_cross[(kinds[p], kinds[q])] for p, q in pairs3]
        for combo in itertools.product(*choices):
            rels = [set(r) for r in base3]
            for (p, q), mask in zip(pairs3, combo):
                relabel = {0: p, 1: q}
                for si, t in mask:
                    rels[si].add(tuple(relabel[x] for x in t))
            s = FinStructure(sig, 3, [tuple(r) for r in rels])
            if not checker.valid(s):
                note(s)

    merged = ClassPresentation(
        sig,
        "forbidden",
        tuple(forbidden),
        homogeneous=True,
        transitive=False,
        name=(pres.name + "_merged") if pres.name else "merged",
    )
    out = MergedPresentation(merged, pres, True, r, v_name, in_name, tuple(r_names))
    out_checker[out.presentation] = checker
    return out


# semantic checkers for merged presentations, used by tests as an oracle
out_checker = {}


@dataclass(frozen=True)
class AlgebraicityWitness:
    base: TupleType
    extension: ExtensionCount
    size: int
    via: str  # "paper-construction" | "search"

    def describe(self):
        return (
            f"|A| = {self.size} ({self.via}): over {self.base.describe()} the point "
            f"{self.extension.ext.describe()} is unique (multiplicity 1)"
        )


def _paper_witness(minfo, bound):
    """The canonical witness: one component-sharing pair per 1-orbit, and the
    selection assembling the shared components as the definable point."""
    pres = minfo.presentation
    sig = pres.sig
    r = minfo.orbit_count
    v_i = sig.index(minfo.v_symbol)
    r_is = [sig.index(n) for n in minfo.r_symbols]
    size = 2 * r
    rels = [set() for _ in sig.symbols]
    for p in range(size):
        rels[v_i].add((p,))
    for i in range(r):
        a, b = 2 * i, 2 * i + 1
        rels[r_is[i]].update({(a, b), (b, a)})
    base_carrier = FinStructure(sig, size, [tuple(x) for x in rels])
    if not valid_structure(pres, base_carrier):
        return None
    base = TupleType(tuple(range(size)), base_carrier)
    ext_rels = [set(x) for x in rels]
    c = size
    ext_rels[v_i].add((c,))
    for i in range(r):
        ext_rels[r_is[i]].update({(c, 2 * i), (2 * i, c), (c, 2 * i + 1), (2 * i + 1, c)})
    ext_carrier = FinStructure(sig, size + 1, [tuple(x) for x in ext_rels])
    if not valid_structure(pres, ext_carrier):
        return None
    from .orbits import _greedy_extension_count

    count = _greedy_extension_count(pres, base_carrier, ext_carrier, bound)
    if count != 1:
        return None
    ext = TupleType(tuple(range(size)) + (size,), ext_carrier)
    return AlgebraicityWitness(base, ExtensionCount(ext, 1, True), size, "paper-construction")


def find_algebraicity_witness(merged, bound=8, max_size=6):
    """A definable-closure witness (A, c): c outside A with extension
    multiplicity exactly 1 over A.

    On a merge output the construction mirroring the source's 1-orbit pairs
    is tried first; otherwise (and as a fallback) small parameter orbits are
    searched by brute force up to ``max_size``.  Returns (witness, exhausted):
    ``exhausted`` is True when a None result is backed by a full search.
    """
    if isinstance(merged, MergedPresentation):
        minfo = merged
        pres = merged.presentation
        if minfo.merged:
            w = _paper_witness(minfo, bound)
            if w is not None:
                return w, False
        v_index = pres.sig.index(minfo.v_symbol) if minfo.merged else None
    else:
        pres = merged
        v_index = None

    def all_v(struct):
        if v_index is None:
            return True
        return all((p,) in struct.rels[v_index] for p in range(struct.size))

    for a in range(1, max_size + 1):
        for base in enumerate_orbits(pres, a).orbits:
            if base.distinct != a or not all_v(base.carrier):
                continue
            prof = extension_profile(pres, base, bound)
            for e in prof.entries:
                if e.ext.distinct != a + 1 or not (e.exact and e.count == 1):
                    continue
                if not all_v(e.ext.carrier):
                    continue
                return AlgebraicityWitness(base, e, a, "search"), False
    return None, True
