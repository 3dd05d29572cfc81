"""Presentation file grammar: parsing, serialization, corpus access.

Grammar (line oriented; ``#`` starts a comment, blank lines ignored,
indentation is not significant)::

    signature:
        <name>/<arity>
        ...
    flags: [homogeneous] [transitive]          # optional
    forbid:                                    # or:  age: bound=<N>
        structure size=<m>
            <name>: (t1,...,tk); (u1,...,uk)
            ...
        structure size=<m>
        ...

Exactly one of ``forbid:`` / ``age:`` may appear; a presentation with
neither is a forbidden-mode presentation with no patterns.  Structures list
relation rows per symbol; omitted symbols are empty.  The serializer emits
the same grammar, so files round-trip.
"""

from __future__ import annotations

import importlib.resources
import re

from .errors import ParseError, ValidationError
from .structures import ClassPresentation, FinStructure, Signature

_SYMBOL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)/(\d+)$")
_TUPLE_RE = re.compile(r"\(\s*([0-9,\s]*?)\s*\)")


def parse_presentation(text, name=""):
    """Parse presentation text into a validated ClassPresentation."""
    sig = None
    mode = None
    bound = 0
    flags = set()
    structures = []  # under the current mode
    cur = None  # (size, {symbol: [tuples]}) being filled

    def close_structure(lineno):
        nonlocal cur
        if cur is None:
            return
        size, rels = cur
        try:
            structures.append(FinStructure(sig, size, rels))
        except ValidationError as e:
            raise ParseError(str(e), lineno)
        cur = None

    lines = text.splitlines()
    section = None
    sig_symbols = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "signature:":
            if sig is not None:
                raise ParseError("duplicate signature block", lineno)
            section = "signature"
            continue
        if line.startswith("flags:"):
            for f in line[len("flags:"):].split():
                if f not in ("homogeneous", "transitive"):
                    raise ParseError(f"unknown flag {f!r}", lineno)
                flags.add(f)
            continue
        if line == "forbid:" or line.startswith("age:"):
            if sig is None:
                sig = Signature(tuple(sig_symbols))
            if mode is not None:
                raise ParseError("duplicate forbid/age block", lineno)
            close_structure(lineno)
            if line == "forbid:":
                mode = "forbidden"
            else:
                m = re.match(r"^age:\s*bound\s*=\s*(\d+)$", line)
                if not m:
                    raise ParseError("age block must read 'age: bound=<N>'", lineno)
                mode = "age"
                bound = int(m.group(1))
            section = "structures"
            continue
        if section == "signature":
            if sig is not None:
                raise ParseError("symbol after signature closed", lineno)
            m = _SYMBOL_RE.match(line)
            if not m:
                raise ParseError(f"bad symbol line {line!r}", lineno)
            sig_symbols.append((m.group(1), int(m.group(2))))
            continue
        if section == "structures":
            m = re.match(r"^structure\s+size\s*=\s*(\d+)$", line)
            if m:
                close_structure(lineno)
                cur = (int(m.group(1)), {})
                continue
            m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.*)$", line)
            if m and cur is not None:
                symbol, rest = m.group(1), m.group(2)
                if symbol not in sig.names:
                    raise ParseError(f"unknown symbol {symbol!r}", lineno)
                arity = sig.arities[sig.index(symbol)]
                tuples = []
                covered = _TUPLE_RE.sub("", rest).replace(";", "").strip()
                if covered:
                    raise ParseError(f"unparsed relation text {covered!r}", lineno)
                for grp in _TUPLE_RE.findall(rest):
                    entries = [e for e in (x.strip() for x in grp.split(",")) if e]
                    if len(entries) != arity:
                        raise ParseError(f"tuple ({grp}) has arity {len(entries)}, expected {arity}", lineno)
                    tuples.append(tuple(int(e) for e in entries))
                cur[1].setdefault(symbol, []).extend(tuples)
                continue
            raise ParseError(f"unexpected line {line!r}", lineno)
        raise ParseError(f"unexpected line {line!r} before any block", lineno)

    if sig is None:
        sig = Signature(tuple(sig_symbols))
    close_structure(len(lines))
    if mode is None:
        mode = "forbidden"
    kwargs = dict(
        homogeneous="homogeneous" in flags or not flags,
        transitive="transitive" in flags,
        name=name,
    )
    if mode == "forbidden":
        return ClassPresentation(sig, "forbidden", tuple(structures), **kwargs)
    return ClassPresentation(sig, "age", (), tuple(structures), bound, **kwargs)


def serialize_structure(struct, indent="    "):
    lines = [f"{indent}structure size={struct.size}"]
    for (name, _), tuples in zip(struct.sig.symbols, struct.rels):
        if tuples:
            body = "; ".join("(" + ",".join(map(str, t)) + ")" for t in sorted(tuples))
            lines.append(f"{indent}    {name}: {body}")
    return lines


def serialize_presentation(pres):
    lines = ["signature:"]
    for name, arity in pres.sig.symbols:
        lines.append(f"    {name}/{arity}")
    flags = []
    if pres.homogeneous:
        flags.append("homogeneous")
    if pres.transitive:
        flags.append("transitive")
    if flags:
        lines.append("flags: " + " ".join(flags))
    if pres.mode == "forbidden":
        lines.append("forbid:")
        for s in pres.forbidden:
            lines.extend(serialize_structure(s))
    else:
        lines.append(f"age: bound={pres.age_bound}")
        for s in pres.age_list:
            lines.extend(serialize_structure(s))
    return "\n".join(lines) + "\n"


def load_presentation(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    name = str(path).rsplit("/", 1)[-1]
    if name.endswith(".pres"):
        name = name[: -len(".pres")]
    return parse_presentation(text, name=name)


CORPUS_NAMES = (
    "pure_set",
    "pure_set_redundant",
    "dlo",
    "random_graph",
    "cycle_k2",
    "cycle_k3",
    "two_sorted_set",
)


def corpus_path(name):
    if name not in CORPUS_NAMES:
        raise ValidationError(f"unknown corpus presentation {name!r}; have {CORPUS_NAMES}")
    return importlib.resources.files("oligo").joinpath("corpus").joinpath(f"{name}.pres")


def load_corpus(name):
    return parse_presentation(corpus_path(name).read_text(encoding="utf-8"), name=name)
