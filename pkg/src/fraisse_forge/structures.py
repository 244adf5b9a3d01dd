"""Finite relational structures and the constructions built from them.

Carriers are always ``range(size)``.  Every construction that glues or
relabels carriers returns explicit witness maps instead of sharing
elements implicitly.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .config import DEFAULT_CAPS, CapExceeded, Caps

Tuple = tuple[int, ...]

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class SignatureMismatch(ValueError):
    pass


class MorphismError(ValueError):
    """A map claimed to be a morphism fails verification."""


@dataclass(frozen=True)
class Signature:
    symbols: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [n for n, _ in self.symbols]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate relation symbol in {names}")
        for name, arity in self.symbols:
            if not _IDENT.match(name):
                raise ValueError(f"relation name {name!r} is not an identifier")
            if not isinstance(arity, int) or arity < 1:
                raise ValueError(f"arity of {name} must be a positive integer")

    @classmethod
    def of(cls, **arities: int) -> "Signature":
        return cls(tuple(arities.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.symbols)

    def arity(self, name: str) -> int:
        for n, a in self.symbols:
            if n == name:
                return a
        raise KeyError(name)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __len__(self):
        return len(self.symbols)


BINARY = Signature.of(E=2)


@dataclass(frozen=True)
class RelStructure:
    signature: Signature
    size: int
    relations: tuple[frozenset, ...]

    @classmethod
    def build(
        cls,
        signature: Signature,
        size: int,
        relations: Mapping[str, Iterable[Sequence[int]]] | None = None,
    ) -> "RelStructure":
        relations = relations or {}
        unknown = set(relations) - set(signature.names)
        if unknown:
            raise SignatureMismatch(f"relations for undeclared symbols {sorted(unknown)}")
        rels = tuple(
            frozenset(tuple(int(x) for x in t) for t in relations.get(name, ()))
            for name in signature.names
        )
        return cls(signature, int(size), rels)

    @classmethod
    def empty(cls, signature: Signature = BINARY) -> "RelStructure":
        return cls(signature, 0, tuple(frozenset() for _ in signature.symbols))

    def __getitem__(self, name: str) -> frozenset:
        return self.relations[self.signature.index(name)]

    @property
    def carrier(self) -> range:
        return range(self.size)

    def items(self):
        for (name, arity), rel in zip(self.signature.symbols, self.relations):
            yield name, arity, rel

    def as_dict(self) -> dict[str, list[Tuple]]:
        return {name: sorted(rel) for name, _, rel in self.items()}

    def relabel(self, perm: Sequence[int], size: int | None = None) -> "RelStructure":
        """Image of the structure under an injective relabeling ``perm``."""
        n = self.size if size is None else size
        rels = tuple(frozenset(tuple(perm[x] for x in t) for t in rel) for rel in self.relations)
        return RelStructure(self.signature, n, rels)

    def __repr__(self):
        body = ", ".join(f"{n}={sorted(r)}" for n, _, r in self.items())
        return f"RelStructure(size={self.size}, {body})"


@dataclass(frozen=True)
class Verdict:
    ok: bool
    message: str = "ok"
    witness: object = None

    def __bool__(self):
        return self.ok


# --------------------------------------------------------------------------
# small constructors used throughout tests and demos


def graph(n: int, edges: Iterable[tuple[int, int]] = (), symbol: str = "E") -> RelStructure:
    """Simple graph: the edge relation is stored symmetrically."""
    rel = set()
    for a, b in edges:
        rel.add((a, b))
        rel.add((b, a))
    return RelStructure.build(Signature.of(**{symbol: 2}), n, {symbol: rel})


def digraph(n: int, arcs: Iterable[tuple[int, int]] = (), symbol: str = "E") -> RelStructure:
    return RelStructure.build(Signature.of(**{symbol: 2}), n, {symbol: arcs})


def complete_graph(n: int) -> RelStructure:
    return graph(n, itertools.combinations(range(n), 2))


def path_graph(n: int) -> RelStructure:
    return graph(n, [(i, i + 1) for i in range(n - 1)])


def chain(n: int, symbol: str = "lt") -> RelStructure:
    """Strict linear order 0 < 1 < ... < n-1."""
    return RelStructure.build(
        Signature.of(**{symbol: 2}), n, {symbol: itertools.combinations(range(n), 2)}
    )


# --------------------------------------------------------------------------
# validation


def validate_structure(s) -> Verdict:
    """Check the carrier/arity/duplicate invariants.

    Accepts a :class:`RelStructure` or the raw JSON-like mapping
    ``{"signature": [...], "size": n, "relations": {...}}``; only the raw
    form can carry duplicate tuples.
    """
    if isinstance(s, RelStructure):
        sig, size = s.signature, s.size
        rels = {name: list(rel) for name, _, rel in s.items()}
    else:
        try:
            sig = Signature(tuple((d["name"], d["arity"]) for d in s["signature"]))
        except (KeyError, TypeError, ValueError) as exc:
            return Verdict(False, f"bad signature: {exc}")
        size = s.get("size")
        rels = s.get("relations", {})
    if not isinstance(size, int) or size < 0:
        return Verdict(False, f"size {size!r} is not a non-negative integer")
    for name in rels:
        if name not in sig.names:
            return Verdict(False, f"undeclared symbol {name}", name)
    for name, arity in sig.symbols:
        seen = set()
        for t in rels.get(name, []):
            t = tuple(t)
            if len(t) != arity:
                return Verdict(False, f"arity mismatch: {name}{t} has length {len(t)}, expected {arity}", (name, t))
            for x in t:
                if not isinstance(x, int) or x < 0:
                    return Verdict(False, f"entry {x!r} of {name}{t} is not a carrier element", (name, t))
                if x >= size:
                    return Verdict(False, f"entry {x} ≥ size {size} in {name}{t}", (name, t))
            if t in seen:
                return Verdict(False, f"duplicate tuple {name}{t}", (name, t))
            seen.add(t)
    return Verdict(True)


# --------------------------------------------------------------------------
# morphisms

KINDS = ("hom", "embedding", "iso")


def is_homomorphism(a: RelStructure, b: RelStructure, m: Sequence[int]) -> bool:
    if a.signature != b.signature or len(m) != a.size:
        return False
    if any(not (0 <= y < b.size) for y in m):
        return False
    for ra, rb in zip(a.relations, b.relations):
        for t in ra:
            if tuple(m[x] for x in t) not in rb:
                return False
    return True


def is_embedding(a: RelStructure, b: RelStructure, m: Sequence[int]) -> bool:
    if not is_homomorphism(a, b, m) or len(set(m)) != len(m):
        return False
    image = set(m)
    for ra, rb in zip(a.relations, b.relations):
        # injective + preserving: reflecting <=> equal tuple counts on the image
        if sum(1 for t in rb if all(x in image for x in t)) != len(ra):
            return False
    return True


def is_isomorphism(a: RelStructure, b: RelStructure, m: Sequence[int]) -> bool:
    return a.size == b.size and is_embedding(a, b, m)


_CHECKS = {"hom": is_homomorphism, "embedding": is_embedding, "iso": is_isomorphism}


def check_kind(a: RelStructure, b: RelStructure, m: Sequence[int], kind: str) -> bool:
    return _CHECKS[kind](a, b, m)


@dataclass(frozen=True)
class Morphism:
    source: RelStructure = field(repr=False)
    target: RelStructure = field(repr=False)
    map: Tuple
    kind: str = "hom"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown morphism kind {self.kind!r}")

    @classmethod
    def checked(cls, source, target, m: Sequence[int], kind: str = "hom") -> "Morphism":
        m = tuple(int(x) for x in m)
        if not check_kind(source, target, m, kind):
            raise MorphismError(f"map {m} is not a {kind}")
        return cls(source, target, m, kind)

    @classmethod
    def identity(cls, a: RelStructure) -> "Morphism":
        return cls(a, a, tuple(range(a.size)), "iso")

    def verify(self) -> bool:
        return check_kind(self.source, self.target, self.map, self.kind)

    def __call__(self, x: int) -> int:
        return self.map[x]

    def then(self, g: "Morphism") -> "Morphism":
        """``g ∘ self``; the kind is the weaker of the two."""
        if g.source != self.target:
            raise MorphismError("composition: codomain/domain mismatch")
        kind = KINDS[min(KINDS.index(self.kind), KINDS.index(g.kind))]
        return Morphism(self.source, g.target, tuple(g.map[x] for x in self.map), kind)


def compose(g: Morphism, f: Morphism) -> Morphism:
    """``g ∘ f``."""
    return f.then(g)


# --------------------------------------------------------------------------
# constructions


def _same_signature(a: RelStructure, b: RelStructure):
    if a.signature != b.signature:
        raise SignatureMismatch(f"{a.signature.names} vs {b.signature.names}")


def direct_product(a: RelStructure, b: RelStructure, caps: Caps = DEFAULT_CAPS) -> RelStructure:
    """Categorical product; element ``(x, y)`` has index ``x * |b| + y``."""
    _same_signature(a, b)
    n = a.size * b.size
    if n > caps.carrier:
        raise CapExceeded(f"carrier cap exceeded ({n} > {caps.carrier})")
    nb = b.size
    rels = tuple(
        frozenset(tuple(x * nb + y for x, y in zip(ta, tb)) for ta in ra for tb in rb)
        for ra, rb in zip(a.relations, b.relations)
    )
    return RelStructure(a.signature, n, rels)


def projections(a: RelStructure, b: RelStructure, prod: RelStructure) -> tuple[Morphism, Morphism]:
    nb = b.size
    p1 = Morphism(prod, a, tuple(i // nb for i in range(prod.size)), "hom")
    p2 = Morphism(prod, b, tuple(i % nb for i in range(prod.size)), "hom")
    return p1, p2


def power(a: RelStructure, n: int, caps: Caps = DEFAULT_CAPS) -> RelStructure:
    """``a ** n`` indexed by argument tuples in lexicographic order."""
    if n < 1:
        raise ValueError("power exponent must be positive")
    total = a.size ** n
    if total > caps.carrier:
        raise CapExceeded(f"carrier cap exceeded ({total} > {caps.carrier})")
    if n == 1:
        return a
    return direct_product(a, power(a, n - 1, caps), caps)


def induced_substructure(a: RelStructure, subset: Iterable[int]) -> tuple[RelStructure, Morphism]:
    """Substructure on ``subset`` relabeled in increasing order, with its inclusion."""
    elems = sorted(set(subset))
    for x in elems:
        if not 0 <= x < a.size:
            raise ValueError(f"vertex {x} out of range for size {a.size}")
    pos = {x: i for i, x in enumerate(elems)}
    rels = tuple(
        frozenset(tuple(pos[x] for x in t) for t in rel if all(x in pos for x in t))
        for rel in a.relations
    )
    sub = RelStructure(a.signature, len(elems), rels)
    return sub, Morphism(sub, a, tuple(elems), "embedding")


def free_amalgam(
    a: RelStructure, b1: RelStructure, b2: RelStructure, f1: Morphism, f2: Morphism
) -> tuple[RelStructure, Morphism, Morphism]:
    """Glue ``b1`` and ``b2`` along the images of ``a``; no tuples are added.

    The carrier is ``b1`` followed by the elements of ``b2`` outside
    ``f2(a)`` in increasing order.
    """
    _same_signature(b1, b2)
    for f, tgt in ((f1, b1), (f2, b2)):
        if f.source != a or f.target != tgt or not is_embedding(a, tgt, f.map):
            raise MorphismError("free_amalgam needs embeddings of a into b1 and b2")
    glue = {f2.map[x]: f1.map[x] for x in range(a.size)}
    g2 = []
    nxt = b1.size
    for y in range(b2.size):
        if y in glue:
            g2.append(glue[y])
        else:
            g2.append(nxt)
            nxt += 1
    rels = tuple(
        r1 | frozenset(tuple(g2[x] for x in t) for t in r2)
        for r1, r2 in zip(b1.relations, b2.relations)
    )
    c = RelStructure(b1.signature, nxt, rels)
    g1m = Morphism(b1, c, tuple(range(b1.size)), "embedding")
    g2m = Morphism(b2, c, tuple(g2), "embedding")
    return c, g1m, g2m


def disjoint_union(b1: RelStructure, b2: RelStructure) -> tuple[RelStructure, Morphism, Morphism]:
    e = RelStructure.empty(b1.signature)
    return free_amalgam(e, b1, b2, Morphism(e, b1, (), "embedding"), Morphism(e, b2, (), "embedding"))


# --------------------------------------------------------------------------
# canonical form


def _refine(s: RelStructure) -> list[int]:
    """Colour refinement; colours depend only on the isomorphism type."""
    n = s.size
    colour = [0] * n
    incident: list[list[tuple[int, int, Tuple]]] = [[] for _ in range(n)]
    for k, rel in enumerate(s.relations):
        for t in rel:
            for pos, x in enumerate(t):
                incident[x].append((k, pos, t))
    classes = 1 if n else 0
    while True:
        sigs = [
            (colour[v], tuple(sorted((k, pos, tuple(colour[y] for y in t)) for k, pos, t in incident[v])))
            for v in range(n)
        ]
        ranks = {sig: i for i, sig in enumerate(sorted(set(sigs)))}
        new = [ranks[sig] for sig in sigs]
        if len(ranks) == classes:
            return new
        colour, classes = new, len(ranks)


def _encode(s: RelStructure, perm: Sequence[int]) -> tuple[int, ...]:
    n = s.size
    out = []
    for (_, arity), rel in zip(s.signature.symbols, s.relations):
        total = n ** arity
        v = 0
        for t in rel:
            rank = 0
            for x in t:
                rank = rank * n + perm[x]
            v |= 1 << (total - 1 - rank)
        out.append(v)
    return tuple(out)


def canonical_labeling(s: RelStructure, caps: Caps = DEFAULT_CAPS) -> tuple[bytes, tuple[int, ...]]:
    """Canonical code together with a relabeling ``old -> new`` attaining it."""
    if s.size > caps.canonical:
        raise CapExceeded(f"canonicalisation cap exceeded ({s.size} > {caps.canonical})")
    colour = _refine(s)
    cells: dict[int, list[int]] = {}
    for v, c in enumerate(colour):
        cells.setdefault(c, []).append(v)
    ordered = [cells[c] for c in sorted(cells)]
    best = None
    best_perm: tuple[int, ...] = ()
    for choice in itertools.product(*(itertools.permutations(cell) for cell in ordered)):
        perm = [0] * s.size
        nxt = 0
        for cell in choice:
            for v in cell:
                perm[v] = nxt
                nxt += 1
        code = _encode(s, perm)
        if best is None or code < best:
            best, best_perm = code, tuple(perm)
    if best is None:
        best = _encode(s, [])
    parts = [s.size.to_bytes(4, "big")]
    for (_, arity), v in zip(s.signature.symbols, best):
        width = max(1, math.ceil(s.size ** arity / 8))
        parts.append(v.to_bytes(width, "big"))
    return b"".join(parts), best_perm


def canonical_form(s: RelStructure, caps: Caps = DEFAULT_CAPS) -> bytes:
    """Byte string equal for two structures iff they are isomorphic."""
    return canonical_labeling(s, caps)[0]


def canonical_structure(s: RelStructure, caps: Caps = DEFAULT_CAPS) -> RelStructure:
    _, perm = canonical_labeling(s, caps)
    return s.relabel(perm)
