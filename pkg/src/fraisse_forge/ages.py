"""Classes of finite structures and bounded checks of their amalgamation properties.

A class is given by forbidden induced substructures, an explicit catalogue,
or a named membership oracle.  Every check enumerates its instances up to
isomorphism, searches a witness per instance and reports the first failure
in instance order.  A positive verdict is always bounded.

Amalgam search for forbidden and oracle classes (both hereditary) only
considers amalgams generated by the two images: any amalgam in a
hereditary class restricts to one of that shape, so the search stays
complete.  Catalogue classes are searched member by member instead.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from .config import DEFAULT_CAPS, CapExceeded, Caps, parallel_map, worker_count
from .search import InconsistentSeed, automorphisms, iter_morphisms
from .structures import (
    RelStructure,
    Signature,
    Verdict,
    canonical_form,
    graph,
    induced_substructure,
    is_embedding,
    is_homomorphism,
    Morphism,
)

HOLDS = "holds_up_to_bound"
FAILS = "fails"


# --------------------------------------------------------------------------
# built-in membership oracles


def _binary(s: RelStructure) -> frozenset:
    return s.relations[0]


def _irreflexive(rel) -> bool:
    return all(x != y for x, y in rel)


def _symmetric(rel) -> bool:
    return all((y, x) in rel for x, y in rel)


def _transitive(rel) -> bool:
    succ: dict[int, set] = {}
    for x, y in rel:
        succ.setdefault(x, set()).add(y)
    return all((x, z) in rel for x, y in rel for z in succ.get(y, ()))


def _acyclic(n: int, rel) -> bool:
    indeg = [0] * n
    for _, y in rel:
        indeg[y] += 1
    stack = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    succ: dict[int, list] = {}
    for x, y in rel:
        succ.setdefault(x, []).append(y)
    while stack:
        v = stack.pop()
        seen += 1
        for w in succ.get(v, ()):
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    return seen == n


def _is_graph(s):
    r = _binary(s)
    return _irreflexive(r) and _symmetric(r)


def _is_triangle_free(s):
    r = _binary(s)
    if not _is_graph(s):
        return False
    return not any((y, z) in r and (x, z) in r for x, y in r for z in range(s.size) if x < y < z)


def _is_poset(s):
    r = _binary(s)
    return _irreflexive(r) and _transitive(r)


def _is_chain(s):
    r = _binary(s)
    return _is_poset(s) and all((x, y) in r or (y, x) in r for x in range(s.size) for y in range(x))


def _is_matching(s):
    """Graphs in which every vertex has at most one neighbour."""
    if not _is_graph(s):
        return False
    deg = [0] * s.size
    for x, _ in _binary(s):
        deg[x] += 1
    return max(deg, default=0) <= 1


def _is_digraph(s):
    return _irreflexive(_binary(s))


def _is_dag(s):
    r = _binary(s)
    return _irreflexive(r) and _acyclic(s.size, r)


def _closure(n: int, rel) -> set | None:
    """Transitive closure, or None when it creates a loop."""
    succ = [set() for _ in range(n)]
    for x, y in rel:
        succ[x].add(y)
    out = set()
    for x in range(n):
        stack, seen = list(succ[x]), set()
        while stack:
            y = stack.pop()
            if y in seen:
                continue
            seen.add(y)
            stack.extend(succ[y])
        if x in seen:
            return None
        out.update((x, y) for y in seen)
    return out


def _linear_extensions(n: int, rel: set) -> Iterator[list[int]]:
    below = [0] * n
    succ = [[] for _ in range(n)]
    for x, y in rel:
        below[y] += 1
        succ[x].append(y)
    order: list[int] = []
    placed = [False] * n

    def rec():
        if len(order) == n:
            yield list(order)
            return
        for v in range(n):
            if not placed[v] and below[v] == 0:
                placed[v] = True
                order.append(v)
                for w in succ[v]:
                    below[w] -= 1
                yield from rec()
                for w in succ[v]:
                    below[w] += 1
                order.pop()
                placed[v] = False

    yield from rec()


def _poset_completion(c0: RelStructure, free: set):
    closed = _closure(c0.size, c0.relations[0])
    if closed is not None and all((0, t) in free for t in closed - c0.relations[0]):
        yield RelStructure(c0.signature, c0.size, (frozenset(closed),))


def _chain_completions(c0: RelStructure, free: set):
    closed = _closure(c0.size, c0.relations[0])
    if closed is None:
        return
    for order in _linear_extensions(c0.size, closed):
        rel = {(order[i], order[j]) for i in range(len(order)) for j in range(i + 1, len(order))}
        if all((0, t) in free for t in rel - c0.relations[0]):
            yield RelStructure(c0.signature, c0.size, (frozenset(rel),))


@dataclass(frozen=True)
class Completion:
    """Class-specific amalgam candidates tried before the generic search.

    ``exhaustive`` means the generator already lists every candidate, so
    the generic search is skipped.
    """

    generate: Callable[[RelStructure, set], Iterator[RelStructure]]
    exhaustive: bool = False


@dataclass(frozen=True)
class Oracle:
    name: str
    signature: Signature
    predicate: Callable[[RelStructure], bool] = field(compare=False)
    symmetric: bool = False  # binary relation stored in both directions
    irreflexive: bool = False
    free: bool | None = None
    products: bool | None = None
    complete: Completion | None = field(default=None, compare=False)
    monotone: bool = False  # closed under deleting tuples


_E = Signature.of(E=2)
_LT = Signature.of(lt=2)

ORACLES: dict[str, Oracle] = {
    o.name: o
    for o in (
        Oracle("graphs", _E, _is_graph, True, True, True, True, monotone=True),
        Oracle("triangle_free", _E, _is_triangle_free, True, True, True, True, monotone=True),
        Oracle("matchings", _E, _is_matching, True, True, False, False, monotone=True),
        Oracle("posets", _LT, _is_poset, False, True, False, True, Completion(_poset_completion)),
        Oracle("chains", _LT, _is_chain, False, True, False, False, Completion(_chain_completions, True)),
        Oracle("digraphs", _E, _is_digraph, False, True, True, True, monotone=True),
        Oracle("dags", _E, _is_dag, False, True, True, True, monotone=True),
    )
}


# --------------------------------------------------------------------------
# class descriptions

MODES = ("forbidden", "catalogue", "oracle")


@dataclass(frozen=True)
class AgeSpec:
    signature: Signature
    mode: str
    patterns: tuple[RelStructure, ...] = ()
    oracle: str | None = None
    closed_under_free_amalgam: bool | None = None
    closed_under_products: bool | None = None
    _memo: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "oracle":
            if self.oracle not in ORACLES:
                raise ValueError(f"unknown oracle {self.oracle!r}; known: {sorted(ORACLES)}")
            if ORACLES[self.oracle].signature != self.signature:
                raise ValueError(f"oracle {self.oracle} expects signature {ORACLES[self.oracle].signature}")
        for p in self.patterns:
            if p.signature != self.signature:
                raise ValueError("pattern signature differs from the class signature")

    # constructors

    @classmethod
    def from_oracle(cls, name: str) -> "AgeSpec":
        o = ORACLES[name] if name in ORACLES else None
        if o is None:
            raise ValueError(f"unknown oracle {name!r}; known: {sorted(ORACLES)}")
        return cls(o.signature, "oracle", (), name, o.free, o.products)

    @classmethod
    def forbidding(cls, signature: Signature, patterns: Iterable[RelStructure], **flags) -> "AgeSpec":
        return cls(signature, "forbidden", tuple(patterns), None, **flags)

    @classmethod
    def catalogue_of(cls, members: Iterable[RelStructure], signature: Signature | None = None, **flags) -> "AgeSpec":
        members = tuple(members)
        if signature is None:
            if not members:
                raise ValueError("empty catalogue needs an explicit signature")
            signature = members[0].signature
        return cls(signature, "catalogue", members, None, **flags)

    # membership

    @property
    def name(self) -> str:
        if self.mode == "oracle":
            return self.oracle
        return f"{self.mode}[{len(self.patterns)}]"

    @functools.cached_property
    def _codes(self) -> frozenset:
        return frozenset(canonical_form(p) for p in self.patterns)

    @property
    def hereditary_by_construction(self) -> bool:
        return self.mode != "catalogue"

    @property
    def symmetric(self) -> bool:
        return self.mode == "oracle" and ORACLES[self.oracle].symmetric

    @property
    def monotone(self) -> bool:
        """Membership survives deleting tuples (forbidden-pattern classes need not)."""
        return self.mode == "oracle" and ORACLES[self.oracle].monotone

    @property
    def irreflexive(self) -> bool:
        return self.mode == "oracle" and ORACLES[self.oracle].irreflexive

    def contains(self, s: RelStructure) -> bool:
        if s.signature != self.signature:
            return False
        hit = self._memo.get(s)
        if hit is not None:
            return hit
        if self.mode == "oracle":
            ok = ORACLES[self.oracle].predicate(s)
        elif self.mode == "catalogue":
            ok = canonical_form(s) in self._codes
        else:
            ok = all(next(iter_morphisms(p, s, "embedding"), None) is None for p in self.patterns)
        if s.size <= 16 and len(self._memo) < 200_000:
            self._memo[s] = ok
        return ok

    __contains__ = contains


def graphs() -> AgeSpec:
    return AgeSpec.from_oracle("graphs")


def triangle_free() -> AgeSpec:
    return AgeSpec.from_oracle("triangle_free")


def matchings() -> AgeSpec:
    """Graphs of maximum degree at most one."""
    return AgeSpec.from_oracle("matchings")


def posets() -> AgeSpec:
    return AgeSpec.from_oracle("posets")


def chains() -> AgeSpec:
    return AgeSpec.from_oracle("chains")


def digraphs() -> AgeSpec:
    return AgeSpec.from_oracle("digraphs")


def dags() -> AgeSpec:
    return AgeSpec.from_oracle("dags")


def matchings_catalogue(max_size: int = 3) -> AgeSpec:
    """Graphs of maximum degree at most one, truncated at ``max_size`` vertices."""
    out = []
    for n in range(max_size + 1):
        for k in range(n // 2 + 1):
            out.append(graph(n, [(2 * i, 2 * i + 1) for i in range(k)]))
    return AgeSpec.catalogue_of(out, _E)


# --------------------------------------------------------------------------
# member enumeration


def _one_point_units(spec: AgeSpec, m: int) -> list[list[tuple[int, tuple]]]:
    """Groups of tuples over ``range(m + 1)`` that contain ``m``; a group is added or left out as a whole."""
    units: list[list[tuple[int, tuple]]] = []
    seen = set()
    for k, (_, arity) in enumerate(spec.signature.symbols):
        for t in itertools.product(range(m + 1), repeat=arity):
            if m not in t or (k, t) in seen:
                continue
            if spec.irreflexive and len(set(t)) < len(t):
                continue
            unit = [(k, t)]
            if spec.symmetric and arity == 2 and t[0] != t[1]:
                unit.append((k, (t[1], t[0])))
            seen.update(unit)
            units.append(unit)
    return units


def _with(s: RelStructure, size: int, extra: Iterable[tuple[int, tuple]]) -> RelStructure:
    rels = [set(r) for r in s.relations]
    for k, t in extra:
        rels[k].add(t)
    return RelStructure(s.signature, size, tuple(frozenset(r) for r in rels))


def _subsets(n: int) -> Iterator[tuple[int, ...]]:
    for r in range(n + 1):
        yield from itertools.combinations(range(n), r)


@functools.lru_cache(maxsize=256)
def _members_cached(spec: AgeSpec, n: int, caps: Caps) -> tuple[RelStructure, ...]:
    if spec.mode == "catalogue":
        seen = {}
        for p in spec.patterns:
            if p.size <= n:
                seen.setdefault(canonical_form(p, caps), p)
        return tuple(seen[c] for c in sorted(seen, key=lambda c: (len(c), c)))
    empty = RelStructure.empty(spec.signature)
    level = [empty] if spec.contains(empty) else []
    out = list(level)
    for m in range(n):
        units = _one_point_units(spec, m)
        if 2 ** len(units) > caps.one_point_options:
            raise CapExceeded(f"one-point options cap exceeded ({2 ** len(units)} > {caps.one_point_options})")
        found: dict[bytes, RelStructure] = {}
        for b in level:
            for choice in _subsets(len(units)):
                c = _with(b, m + 1, (pair for i in choice for pair in units[i]))
                if spec.contains(c):
                    found.setdefault(canonical_form(c, caps), c)
        level = [found[c] for c in sorted(found)]
        out.extend(level)
    return tuple(out)


def enumerate_members(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> list[RelStructure]:
    """One representative per isomorphism class of members of size 0..n.

    Ordered by size, then canonical code.  For forbidden and oracle classes
    members of size m+1 are grown from members of size m, which is complete
    because those classes are hereditary.
    """
    if n > caps.member_size:
        raise CapExceeded(f"member size cap exceeded ({n} > {caps.member_size})")
    return list(_members_cached(spec, n, caps))


# --------------------------------------------------------------------------
# reports


@dataclass
class CheckReport:
    property: str
    bound: int
    verdict: str
    witness: dict | None = None
    witnesses: list[dict] = field(default_factory=list)
    instances: int = 0
    notes: list[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def __bool__(self):
        return self.holds

    def summary(self) -> str:
        if self.holds:
            return f"{self.property}: holds up to {self.bound} ({self.instances} instances)"
        return f"{self.property}: fails at bound {self.bound}: {self.witness.get('reason', '') if self.witness else ''}"


def run_instances(prop: str, bound: int, instances: Iterable, solve, notes=(), params=None) -> CheckReport:
    """Apply ``solve`` to each instance; ``solve`` returns (ok, witness dict).

    The first failing instance in enumeration order decides the verdict,
    whether or not the instances were solved in parallel.
    """
    params = params or {}
    witnesses: list[dict] = []
    count = 0
    if worker_count() == 1:
        for inst in instances:
            count += 1
            ok, w = solve(inst)
            if not ok:
                return CheckReport(prop, bound, FAILS, w, witnesses, count, list(notes), params)
            if w is not None:
                witnesses.append(w)
        return CheckReport(prop, bound, HOLDS, None, witnesses, count, list(notes), params)
    results = parallel_map(solve, list(instances))
    for i, (ok, w) in enumerate(results):
        if not ok:
            return CheckReport(prop, bound, FAILS, w, witnesses, i + 1, list(notes), params)
        if w is not None:
            witnesses.append(w)
    return CheckReport(prop, bound, HOLDS, None, witnesses, len(results), list(notes), params)


# --------------------------------------------------------------------------
# instance enumeration


def _orbit_min_subsets(b: RelStructure, auts: list[tuple]) -> Iterator[tuple[int, ...]]:
    for s in _subsets(b.size):
        if all(tuple(sorted(a[x] for x in s)) >= s for a in auts):
            yield s


def _orbit_min(maps: Iterable[tuple], auts: list[tuple]) -> Iterator[tuple]:
    for m in maps:
        if all(tuple(a[x] for x in m) >= m for a in auts):
            yield m


@functools.lru_cache(maxsize=4096)
def _auts(b: RelStructure) -> list[tuple]:
    return [m.map for m in automorphisms(b)]


@dataclass(frozen=True)
class Square:
    """``A = B1[s]`` included in ``B1`` and mapped into ``B2`` by ``f2``."""

    b1: RelStructure
    s: tuple[int, ...]
    b2: RelStructure
    f2: tuple[int, ...]

    @functools.cached_property
    def a(self) -> RelStructure:
        return induced_substructure(self.b1, self.s)[0]

    def legs(self, f2_kind: str = "embedding") -> dict:
        a = self.a
        return {
            "A": a,
            "B1": self.b1,
            "B2": self.b2,
            "f1": Morphism(a, self.b1, self.s, "embedding"),
            "f2": Morphism(a, self.b2, self.f2, f2_kind),
        }


def squares(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS, f2_kind: str = "embedding", proper: bool = False) -> Iterator[Square]:
    """All spans ``B1 <- A -> B2`` of members up to isomorphism.

    ``A`` is an induced substructure of ``B1`` (one subset per orbit of
    Aut(B1)); ``f2`` ranges over embeddings, or homomorphisms when
    ``f2_kind="hom"``, taken one per orbit of Aut(B2).
    """
    members = enumerate_members(spec, n, caps)
    for b1 in members:
        auts1 = _auts(b1)
        for s in _orbit_min_subsets(b1, auts1):
            if proper and len(s) == b1.size:
                continue
            a = induced_substructure(b1, s)[0]
            if not spec.contains(a) and not (a.size == 0):
                continue
            for b2 in members:
                if f2_kind == "embedding" and b2.size < a.size:
                    continue
                maps = sorted(m.map for m in iter_morphisms(a, b2, f2_kind))
                for f2 in _orbit_min(maps, _auts(b2)):
                    yield Square(b1, s, b2, f2)


# --------------------------------------------------------------------------
# amalgam search


def _extend_dfs(spec: AgeSpec, base: RelStructure, total: int, decide, caps: Caps) -> Iterator[RelStructure]:
    """Grow ``base`` to ``total`` elements one element at a time.

    ``decide(k, t)`` returns True/False for tuples whose value is forced and
    None for free ones; free tuple groups are tried by increasing number,
    and every prefix must be a member (hereditary pruning).
    """
    steps = []
    for e in range(base.size, total):
        forced, free = [], []
        for unit in _one_point_units_any(spec, e):
            vals = {decide(k, t) for k, t in unit}
            if True in vals:
                forced.extend(unit)
            elif None in vals and False not in vals:
                free.append(unit)
        if spec.irreflexive and any(len(set(t)) < len(t) for _, t in forced):
            return  # a forced loop survives every choice of free tuples
        steps.append((forced, free))

    def rec(i: int, cur: RelStructure):
        if i == len(steps):
            yield cur
            return
        forced, free = steps[i]
        for tried, choice in enumerate(_subsets(len(free))):
            if tried >= caps.one_point_options:
                raise CapExceeded(f"one-point options cap exceeded (> {caps.one_point_options} tuple sets for one element)")
            nxt = _with(cur, cur.size + 1, itertools.chain(forced, (p for j in choice for p in free[j])))
            if spec.contains(nxt):
                yield from rec(i + 1, nxt)
            elif tried == 0 and spec.monotone:
                return  # the forced tuples alone already fail

    if spec.contains(base):
        yield from rec(0, base)


def completions(spec: AgeSpec, base: RelStructure, total: int, decide, caps: Caps = DEFAULT_CAPS) -> Iterator[RelStructure]:
    """Members on ``range(total)`` extending ``base`` and agreeing with ``decide``.

    Class-specific candidates (transitive closure for posets, linear
    extensions for chains) come first; the generic element-by-element
    search follows unless the class-specific list is exhaustive.
    """
    hook = ORACLES[spec.oracle].complete if spec.mode == "oracle" else None
    if hook is not None:
        forced, free = [], set()
        for e in range(base.size, total):
            for unit in _one_point_units_any(spec, e):
                vals = {decide(k, t) for k, t in unit}
                if True in vals:
                    forced.extend(unit)
                elif None in vals and False not in vals:
                    free.update(unit)
        c0 = _with(base, total, forced)
        for c in hook.generate(c0, free):
            if spec.contains(c):
                yield c
        if hook.exhaustive:
            return
    yield from _extend_dfs(spec, base, total, decide, caps)


def _one_point_units_any(spec: AgeSpec, m: int):
    """Like :func:`_one_point_units` but keeps loops: forced loops must stay visible."""
    units = []
    seen = set()
    for k, (_, arity) in enumerate(spec.signature.symbols):
        for t in itertools.product(range(m + 1), repeat=arity):
            if m not in t or (k, t) in seen:
                continue
            unit = [(k, t)]
            if spec.symmetric and arity == 2 and t[0] != t[1]:
                unit.append((k, (t[1], t[0])))
            seen.update(unit)
            units.append(unit)
    return units


def _matchings(left: list[int], right: list[int]) -> Iterator[dict[int, int]]:
    for r in range(min(len(left), len(right)) + 1):
        for ys in itertools.combinations(left, r):
            for xs in itertools.permutations(right, r):
                yield dict(zip(ys, xs))


def union_amalgams(spec: AgeSpec, sq: Square, caps: Caps = DEFAULT_CAPS) -> Iterator[tuple[RelStructure, tuple, tuple]]:
    """Amalgams ``(C, g1, g2)`` of an embedding square, in a fixed order.

    Catalogue classes: every catalogue member with commuting embeddings.
    Other classes: ``C`` is generated by the images; ``g1`` is the identity
    of ``B1``; no identifications and no extra tuples come first, so the free
    amalgam is the first candidate whenever it is a member.
    """
    b1, b2, s, f2 = sq.b1, sq.b2, sq.s, sq.f2
    if spec.mode == "catalogue":
        yield from _catalogue_amalgams(spec, sq, caps)
        return
    img = {f2[i]: s[i] for i in range(len(s))}
    outside2 = [y for y in range(b2.size) if y not in img]
    rest1 = [x for x in range(b1.size) if x not in s]
    for match in _matchings(outside2, rest1):
        g2 = [0] * b2.size
        nxt = b1.size
        for y in range(b2.size):
            if y in img:
                g2[y] = img[y]
            elif y in match:
                g2[y] = match[y]
            else:
                g2[y] = nxt
                nxt += 1
        inside = [y for y in range(b2.size) if g2[y] < b1.size]
        inside_img = {g2[y] for y in inside}
        ok = True
        for r1, r2 in zip(b1.relations, b2.relations):
            mapped = {tuple(g2[x] for x in t) for t in r2 if all(g2[x] < b1.size for x in t)}
            local = {t for t in r1 if all(x in inside_img for x in t)}
            if mapped != local:
                ok = False
                break
        if not ok:
            continue
        inv = {g2[y]: y for y in range(b2.size)}
        b2rels = b2.relations

        def decide(k, t, inv=inv):
            if all(x in inv for x in t):
                return tuple(inv[x] for x in t) in b2rels[k]
            return None

        g1, g2t = tuple(range(b1.size)), tuple(g2)
        for c in completions(spec, b1, nxt, decide, caps):
            yield c, g1, g2t


def _catalogue_amalgams(spec: AgeSpec, sq: Square, caps: Caps):
    b1, b2, s, f2 = sq.b1, sq.b2, sq.s, sq.f2
    limit = b1.size + b2.size - len(s)
    for c in enumerate_members(spec, min(limit, caps.member_size), caps):
        if c.size < max(b1.size, b2.size):
            continue
        for g1 in iter_morphisms(b1, c, "embedding"):
            seed = {f2[i]: g1.map[s[i]] for i in range(len(s))}
            try:
                for g2 in iter_morphisms(b2, c, "embedding", seed=seed):
                    yield c, g1.map, g2.map
            except InconsistentSeed:
                continue


def hap_amalgams(spec: AgeSpec, sq: Square, caps: Caps = DEFAULT_CAPS) -> Iterator[tuple[RelStructure, tuple, tuple]]:
    """Completions ``(C, g1 hom, g2 embedding)`` of a span whose right leg is a homomorphism."""
    b1, b2, s, f2 = sq.b1, sq.b2, sq.s, sq.f2
    if spec.mode == "catalogue":
        limit = b1.size + b2.size - len(s)
        for c in enumerate_members(spec, min(limit, caps.member_size), caps):
            if c.size < b2.size:
                continue
            for g2 in iter_morphisms(b2, c, "embedding"):
                seed = {s[i]: g2.map[f2[i]] for i in range(len(s))}
                try:
                    for g1 in iter_morphisms(b1, c, "hom", seed=seed):
                        yield c, g1.map, g2.map
                except InconsistentSeed:
                    continue
        return
    rest = [x for x in range(b1.size) if x not in s]
    fixed = {s[i]: f2[i] for i in range(len(s))}

    def assignments(i: int, cur: dict, used_new: int):
        if i == len(rest):
            yield dict(cur), used_new
            return
        x = rest[i]
        for v in range(b2.size + used_new + 1):
            cur[x] = v
            yield from assignments(i + 1, cur, max(used_new, v - b2.size + 1))
        del cur[x]

    for g1, new in assignments(0, dict(fixed), 0):
        required = [set() for _ in b1.relations]
        bad = False
        for k, rel in enumerate(b1.relations):
            for t in rel:
                u = tuple(g1[x] for x in t)
                if all(y < b2.size for y in u):
                    if u not in b2.relations[k]:
                        bad = True
                        break
                else:
                    required[k].add(u)
            if bad:
                break
        if bad:
            continue

        def decide(k, t, required=required):
            return True if t in required[k] else None

        for c in completions(spec, b2, b2.size + new, decide, caps):
            yield c, tuple(g1[x] for x in range(b1.size)), tuple(range(b2.size))


# --------------------------------------------------------------------------
# the checks


def _bound_note(spec: AgeSpec) -> list[str]:
    notes = []
    if spec.mode == "catalogue":
        notes.append("catalogue class: amalgams searched among catalogue members")
    else:
        notes.append("amalgams searched among structures generated by the two images (complete for hereditary classes)")
    return notes


def hp_instances(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> Iterator[tuple]:
    """Pairs (member, proper subset), larger subsets first."""
    for b in enumerate_members(spec, n, caps):
        for r in range(b.size - 1, -1, -1):
            for sub in itertools.combinations(range(b.size), r):
                yield b, sub


def check_hp(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> CheckReport:
    """Every induced substructure of a member of size <= n is a member.

    Subsets are visited largest first, so a failure names a maximal
    non-member substructure.
    """

    def solve(inst):
        b, sub = inst
        a = induced_substructure(b, sub)[0]
        if spec.contains(a):
            return True, None
        return False, {"B": b, "subset": list(sub), "sub": a, "reason": f"induced substructure on {list(sub)} is not a member"}

    notes = ["hereditary by construction"] if spec.hereditary_by_construction else []
    return run_instances("hp", n, hp_instances(spec, n, caps), solve, notes)


def _amalgam_witness(sq: Square, c, g1, g2) -> dict:
    w = sq.legs()
    w.update(C=c, g1=Morphism(sq.b1, c, tuple(g1), "embedding"), g2=Morphism(sq.b2, c, tuple(g2), "embedding"))
    return w


def _fail(sq: Square, reason: str, kind: str = "embedding") -> dict:
    w = sq.legs(kind)
    w["reason"] = reason
    return w


def find_amalgam(spec: AgeSpec, sq: Square, caps: Caps = DEFAULT_CAPS):
    """First amalgam ``(C, g1, g2)`` in search order, or None."""
    return next(union_amalgams(spec, sq, caps), None)


def check_ap(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> CheckReport:
    def solve(sq: Square):
        hit = find_amalgam(spec, sq, caps)
        if hit is None:
            return False, _fail(sq, "no amalgam in the class")
        return True, _amalgam_witness(sq, *hit)

    return run_instances("ap", n, squares(spec, n, caps), solve, _bound_note(spec))


def jep_instances(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> Iterator[Square]:
    members = enumerate_members(spec, n, caps)
    for b1 in members:
        for b2 in members:
            yield Square(b1, (), b2, ())


def check_jep(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> CheckReport:
    """Joint embedding, searched as amalgamation over the empty structure."""

    def solve(sq: Square):
        hit = find_amalgam(spec, sq, caps)
        if hit is None:
            return False, _fail(sq, "no joint embedding in the class")
        return True, _amalgam_witness(sq, *hit)

    return run_instances("jep", n, jep_instances(spec, n, caps), solve, _bound_note(spec))


def _homs_by_restriction(b: RelStructure, d: RelStructure, s: tuple) -> dict[tuple, list[tuple]]:
    out: dict[tuple, list[tuple]] = {}
    for h in iter_morphisms(b, d, "hom"):
        out.setdefault(tuple(h.map[x] for x in s), []).append(h.map)
    return out


def _mediates(c: RelStructure, g1, g2, h1, h2, d: RelStructure) -> bool:
    m = [-1] * c.size
    for x, y in enumerate(g1):
        m[y] = h1[x]
    for x, y in enumerate(g2):
        if m[y] not in (-1, h2[x]):
            return False
        m[y] = h2[x]
    if -1 in m:
        return False  # an element outside both images admits no unique mediator
    return is_homomorphism(c, d, m)


def _pushout_refutation(spec, sq: Square, c, g1, g2, tests: list[RelStructure]):
    """A test pair (D, h1, h2) with no mediating map from C, or None."""
    for d in tests:
        by_a = _homs_by_restriction(sq.b1, d, sq.s)
        for h2 in iter_morphisms(sq.b2, d, "hom"):
            key = tuple(h2.map[y] for y in sq.f2)
            for h1 in by_a.get(key, ()):
                if not _mediates(c, g1, g2, h1, h2.map, d):
                    return d, h1, h2.map
    return None


def check_strict_ap(spec: AgeSpec, n: int, d: int | None = None, caps: Caps = DEFAULT_CAPS) -> CheckReport:
    """Amalgams that are pushouts against every test member of size <= d.

    Candidates are generated by the two images, so a mediating map, when
    it exists, is unique; only existence has to be searched.
    """
    d = n if d is None else d
    tests = enumerate_members(spec, d, caps)

    def solve(sq: Square):
        last = None
        for c, g1, g2 in union_amalgams(spec, sq, caps):
            ref = _pushout_refutation(spec, sq, c, g1, g2, tests)
            if ref is None:
                w = _amalgam_witness(sq, c, g1, g2)
                w["d"] = d
                return True, w
            last = (c, ref)
        w = _fail(sq, "no amalgam mediates uniquely against the test members")
        if last is not None:
            c, (dd, h1, h2) = last
            w.update(lastC=c, D=dd, h1=Morphism(sq.b1, dd, tuple(h1)), h2=Morphism(sq.b2, dd, tuple(h2)))
        return False, w

    notes = _bound_note(spec) + [f"uniqueness tested against members of size <= {d} only"]
    return run_instances("strict_ap", n, squares(spec, n, caps), solve, notes, {"d": d})


def check_hap(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> CheckReport:
    """Spans with an embedding leg and a homomorphism leg complete with g2 an embedding."""

    def solve(sq: Square):
        hit = next(hap_amalgams(spec, sq, caps), None)
        if hit is None:
            return False, _fail(sq, "no completion in the class", "hom")
        c, g1, g2 = hit
        w = sq.legs("hom")
        w.update(C=c, g1=Morphism(sq.b1, c, g1, "hom"), g2=Morphism(sq.b2, c, g2, "embedding"))
        return True, w

    return run_instances("hap", n, squares(spec, n, caps, "hom"), solve, _bound_note(spec))


def _glue(c_size, g1, g2, h1, h2):
    h = [-1] * c_size
    for x, y in enumerate(g1):
        h[y] = h1[x]
    for x, y in enumerate(g2):
        if h[y] not in (-1, h2[x]):
            return None
        h[y] = h2[x]
    return h


def amalg_ext_instances(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> Iterator[tuple]:
    """Squares with a member ``T`` and a commuting pair ``h1: B1 -> T``, ``h2: B2 -> T``."""
    members = enumerate_members(spec, n, caps)
    for sq in squares(spec, n, caps):
        for t in members:
            by_a = _homs_by_restriction(sq.b1, t, sq.s)
            for h2 in iter_morphisms(sq.b2, t, "hom"):
                key = tuple(h2.map[y] for y in sq.f2)
                for h1 in by_a.get(key, ()):
                    yield sq, t, h1, h2.map


def check_amalg_ext(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> CheckReport:
    """Amalgamated extension property at bound n (A, B1, B2, T all of size <= n).

    For hereditary classes the enlarged target can be taken equal to ``T``
    with ``k`` the identity (restrict any witness to the images); the search
    therefore only varies ``C``.  Catalogue classes also search ``T'``.
    """
    def solve(inst):
        sq, t, h1, h2 = inst
        for c, g1, g2 in union_amalgams(spec, sq, caps):
            h = _glue(c.size, g1, g2, h1, h2)
            if h is None:
                continue
            if spec.mode != "catalogue":
                if is_homomorphism(c, t, h):
                    return True, _ext_witness(sq, t, h1, h2, c, g1, g2, t, h, tuple(range(t.size)))
                continue
            for t2 in enumerate_members(spec, min(caps.member_size, c.size + t.size), caps):
                for k in iter_morphisms(t, t2, "embedding"):
                    seed = {y: k.map[v] for y, v in enumerate(h)}
                    if is_homomorphism(c, t2, [seed[y] for y in range(c.size)]):
                        return True, _ext_witness(sq, t, h1, h2, c, g1, g2, t2, [seed[y] for y in range(c.size)], k.map)
        w = _fail(sq, "no amalgam with an extension into an enlarged target")
        w.update(T=t, h1=Morphism(sq.b1, t, tuple(h1)), h2=Morphism(sq.b2, t, tuple(h2)))
        return False, w

    return run_instances("amalg_ext", n, amalg_ext_instances(spec, n, caps), solve, _bound_note(spec))


def _ext_witness(sq, t, h1, h2, c, g1, g2, t2, h, k) -> dict:
    w = _amalgam_witness(sq, c, g1, g2)
    w.update(
        T=t,
        h1=Morphism(sq.b1, t, tuple(h1)),
        h2=Morphism(sq.b2, t, tuple(h2)),
        T2=t2,
        h=Morphism(c, t2, tuple(h)),
        k=Morphism(t, t2, tuple(k), "embedding"),
    )
    return w


def check_instances(prop: str, spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> Iterator:
    """The instance sequence each check walks through, in order."""
    if prop == "hp":
        return hp_instances(spec, n, caps)
    if prop == "jep":
        return jep_instances(spec, n, caps)
    if prop in ("ap", "strict_ap"):
        return squares(spec, n, caps)
    if prop == "hap":
        return squares(spec, n, caps, "hom")
    if prop == "amalg_ext":
        return amalg_ext_instances(spec, n, caps)
    raise ValueError(f"unknown property {prop!r}")


def run_check(prop: str, spec: AgeSpec, n: int, params: dict | None = None, caps: Caps = DEFAULT_CAPS) -> CheckReport:
    if prop == "strict_ap":
        return check_strict_ap(spec, n, (params or {}).get("d"), caps)
    return CHECKS[prop](spec, n, caps=caps)


CHECKS = {
    "hp": check_hp,
    "jep": check_jep,
    "ap": check_ap,
    "strict_ap": check_strict_ap,
    "hap": check_hap,
    "amalg_ext": check_amalg_ext,
}


def check_all(spec: AgeSpec, n: int, caps: Caps = DEFAULT_CAPS) -> dict[str, CheckReport]:
    return {name: fn(spec, n, caps=caps) for name, fn in CHECKS.items()}


# --------------------------------------------------------------------------
# independent re-verification


def _brute_homs(a: RelStructure, b: RelStructure) -> Iterator[tuple]:
    for m in itertools.product(range(b.size), repeat=a.size):
        if is_homomorphism(a, b, m):
            yield m


def _is(m: Morphism, kind: str) -> bool:
    if kind == "hom":
        return is_homomorphism(m.source, m.target, m.map)
    return is_embedding(m.source, m.target, m.map)


def _commutes(p: Morphism, q: Morphism, r: Morphism, s: Morphism) -> bool:
    """``q ∘ p == s ∘ r`` pointwise."""
    return all(q.map[p.map[x]] == s.map[r.map[x]] for x in range(p.source.size))


def verify_witness(prop: str, w: dict, spec: AgeSpec, caps: Caps = DEFAULT_CAPS) -> Verdict:
    """Re-check one success witness with map-level verification only."""
    try:
        if prop == "hp":
            return Verdict(spec.contains(w["sub"]), "substructure membership")
        for key in ("B1", "B2", "C"):
            if not spec.contains(w[key]):
                return Verdict(False, f"{key} is not a member")
        f2_kind = "hom" if prop == "hap" else "embedding"
        g1_kind = "hom" if prop == "hap" else "embedding"
        checks = [("f1", "embedding"), ("f2", f2_kind), ("g1", g1_kind), ("g2", "embedding")]
        for key, kind in checks:
            m = w[key]
            if not _is(m, kind):
                return Verdict(False, f"{key} is not a {kind}", key)
        if w["f1"].target != w["B1"] or w["f2"].target != w["B2"] or w["g1"].source != w["B1"] or w["g2"].source != w["B2"]:
            return Verdict(False, "square legs do not match the structures")
        if w["g1"].target != w["C"] or w["g2"].target != w["C"] or w["f1"].source != w["A"] or w["f2"].source != w["A"]:
            return Verdict(False, "square legs do not match the structures")
        if not _commutes(w["f1"], w["g1"], w["f2"], w["g2"]):
            return Verdict(False, "square does not commute")
        if prop == "strict_ap":
            for d in enumerate_members(spec, w["d"], caps):
                homs1 = list(_brute_homs(w["B1"], d))
                for h2 in _brute_homs(w["B2"], d):
                    for h1 in homs1:
                        if all(h1[w["f1"].map[x]] == h2[w["f2"].map[x]] for x in range(w["A"].size)):
                            if not _mediates(w["C"], w["g1"].map, w["g2"].map, h1, h2, d):
                                return Verdict(False, f"no mediating map into {d!r}", (d, h1, h2))
        if prop == "amalg_ext":
            for key in ("T", "T2"):
                if not spec.contains(w[key]):
                    return Verdict(False, f"{key} is not a member")
            for key, kind in (("h1", "hom"), ("h2", "hom"), ("h", "hom"), ("k", "embedding")):
                if not _is(w[key], kind):
                    return Verdict(False, f"{key} is not a {kind}", key)
            if not _commutes(w["f1"], w["h1"], w["f2"], w["h2"]):
                return Verdict(False, "input pair does not commute")
            if not _commutes(w["g1"], w["h"], w["h1"], w["k"]) or not _commutes(w["g2"], w["h"], w["h2"], w["k"]):
                return Verdict(False, "extension square does not commute")
    except (KeyError, AttributeError, IndexError, TypeError) as exc:
        return Verdict(False, f"malformed witness: {exc!r}")
    return Verdict(True)


def reverify(report: CheckReport, spec: AgeSpec, caps: Caps = DEFAULT_CAPS) -> Verdict:
    """Independent re-check of every witness in a report."""
    for i, w in enumerate(report.witnesses):
        v = verify_witness(report.property, w, spec, caps)
        if not v:
            return Verdict(False, f"witness {i}: {v.message}", i)
    if not report.holds:
        again = run_check(report.property, spec, report.bound, report.params, caps)
        if again.holds:
            return Verdict(False, "failure does not reproduce")
    return Verdict(True)
