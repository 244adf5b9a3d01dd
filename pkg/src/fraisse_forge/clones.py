"""Operations on a finite carrier, clone fragments and polymorphism decomposition.

Tables are indexed lexicographically, most significant argument first:
the value at ``(x_1, ..., x_k)`` sits at ``sum x_j * q ** (k - j)``.  This is
the same order in which :func:`structures.power` numbers the elements of a
power, so a homomorphism ``power(a, k) -> a`` is literally a table.

Terms are nested tuples: ``("proj", n, i)`` is the i-th of n projections
(1-based), ``("gen", name)`` a named generator, and
``("apply", head, arg_1, ..., arg_n)`` the superposition of ``head`` with
the arguments.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .ages import graphs
from .comma import Scenario, build_universal_hom, extract_section
from .config import DEFAULT_CAPS, CapExceeded, Caps
from .limits import saturate_limit
from .search import iter_morphisms
from .structures import (
    Morphism,
    MorphismError,
    RelStructure,
    direct_product,
    is_homomorphism,
    power,
)


# --------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class OpTable:
    q: int
    arity: int
    table: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(int(v) for v in self.table))
        if self.q < 1 or self.arity < 0:
            raise ValueError("carrier size must be positive and arity non-negative")
        if len(self.table) != self.q ** self.arity:
            raise ValueError(f"table length {len(self.table)} != {self.q}^{self.arity}")
        if any(not 0 <= v < self.q for v in self.table):
            raise ValueError("table entry outside the carrier")

    @classmethod
    def from_function(cls, q: int, arity: int, fn: Callable[..., int]) -> "OpTable":
        return cls(q, arity, tuple(fn(*xs) for xs in itertools.product(range(q), repeat=arity)))

    def __call__(self, *xs: int) -> int:
        idx = 0
        for x in xs:
            idx = idx * self.q + x
        return self.table[idx]

    def array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.int64)

    def depends_on(self) -> list[int]:
        """Coordinates (0-based) the operation actually depends on."""
        a = self.array().reshape((self.q,) * self.arity) if self.arity else self.array()
        out = []
        for j in range(self.arity):
            first = np.take(a, 0, axis=j)
            if any(not np.array_equal(first, np.take(a, v, axis=j)) for v in range(1, self.q)):
                out.append(j)
        return out


def projection(q: int, n: int, i: int) -> OpTable:
    """The i-th n-ary projection (1-based)."""
    if not 1 <= i <= n:
        raise ValueError(f"projection index {i} outside 1..{n}")
    return OpTable(q, n, tuple(xs[i - 1] for xs in itertools.product(range(q), repeat=n)))


def projections(q: int, n: int) -> frozenset[OpTable]:
    return frozenset(projection(q, n, i) for i in range(1, n + 1))


@functools.lru_cache(maxsize=64)
def _weights(q: int, n: int) -> np.ndarray:
    return np.array([q ** (n - 1 - j) for j in range(n)], dtype=np.int64)


def superpose(f: OpTable, gs: Iterable[OpTable]) -> OpTable:
    """``f ∘ <g_1, ..., g_n>``, evaluated pointwise."""
    gs = list(gs)
    if len(gs) != f.arity:
        raise ValueError(f"head has arity {f.arity} but {len(gs)} arguments were given")
    if any(g.q != f.q for g in gs):
        raise ValueError("carrier mismatch")
    if f.arity == 0:
        raise ValueError("a nullary head has no inner arity")
    m = gs[0].arity
    if any(g.arity != m for g in gs):
        raise ValueError("arguments must share one arity")
    stack = np.stack([g.array() for g in gs])
    idx = _weights(f.q, f.arity) @ stack
    return OpTable(f.q, m, tuple(f.array()[idx]))


# --------------------------------------------------------------------------
# fragments


@dataclass(frozen=True)
class CloneFragment:
    q: int
    ops: frozenset[OpTable] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "ops", frozenset(self.ops))
        if any(op.q != self.q for op in self.ops):
            raise ValueError("operation carrier differs from the fragment carrier")

    def of_arity(self, k: int) -> list[OpTable]:
        return sorted((op for op in self.ops if op.arity == k), key=lambda o: o.table)

    @property
    def arities(self) -> list[int]:
        return sorted({op.arity for op in self.ops})

    def __contains__(self, op: OpTable) -> bool:
        return op in self.ops

    def __len__(self):
        return len(self.ops)

    def __iter__(self):
        return iter(sorted(self.ops, key=lambda o: (o.arity, o.table)))

    def __or__(self, other: "CloneFragment") -> "CloneFragment":
        return CloneFragment(self.q, self.ops | other.ops)

    def __le__(self, other: "CloneFragment") -> bool:
        return self.ops <= other.ops


def all_tables(q: int, k: int) -> frozenset[OpTable]:
    return frozenset(OpTable(q, k, t) for t in itertools.product(range(q), repeat=q ** k))


def _heads_times(heads: Iterable[OpTable], args: list[OpTable], q: int, caps: Caps) -> set[tuple]:
    """Tables of every ``f ∘ <g_1..g_n>`` with ``f`` in heads and each ``g_j`` in ``args``."""
    heads = list(heads)
    if not args:
        return set()
    m = args[0].arity
    arr = np.stack([g.array() for g in args])  # (len(args), q^m)
    total = sum(len(args) ** f.arity for f in heads if f.arity > 0)
    if total > caps.superpositions:
        raise CapExceeded(f"superposition cap exceeded ({total} > {caps.superpositions})")
    out: set[tuple] = set()
    for f in heads:
        n = f.arity
        if n == 0:
            continue
        ftab = f.array()
        w = _weights(q, n)
        # leading argument varies over a chunk; the rest by broadcasting
        rest = np.zeros((1, q ** m), dtype=np.int64)
        for j in range(1, n):
            rest = (rest[:, None, :] + w[j] * arr[None, :, :]).reshape(-1, q ** m)
        for g0 in range(len(args)):
            idx = rest + w[0] * arr[g0]
            vals = ftab[idx]
            out.update(map(tuple, np.unique(vals, axis=0).tolist()))
    return out


def complex_product(u1: CloneFragment, u2: CloneFragment, arity_cap: int | None = None, caps: Caps = DEFAULT_CAPS) -> CloneFragment:
    """``U1 · U2``: heads from ``U1`` applied to equal-arity arguments from ``U2``.

    Only arguments of arity <= ``arity_cap`` (default ``caps.arity``) are used.
    """
    if u1.q != u2.q:
        raise ValueError("carrier mismatch")
    cap = caps.arity if arity_cap is None else arity_cap
    ops: set[OpTable] = set()
    for m in u2.arities:
        if m > cap:
            continue
        tabs = _heads_times(u1.ops, u2.of_arity(m), u1.q, caps)
        ops.update(OpTable(u1.q, m, t) for t in tabs)
    return CloneFragment(u1.q, frozenset(ops))


# --------------------------------------------------------------------------
# bracket sets


_BRACKETS: dict[tuple, list[frozenset[OpTable]]] = {}


def bracket(u: CloneFragment, k: int, i: int, caps: Caps = DEFAULT_CAPS) -> frozenset[OpTable]:
    """``U^[k,i]``: k-ary projections at level 0, then ``U · U^[k,i] ∪ U^[k,i]``."""
    key = (u, k)
    levels = _BRACKETS.setdefault(key, [projections(u.q, k)])
    while len(levels) <= i:
        prev = levels[-1]
        if len(levels) >= 2 and levels[-2] == prev:
            levels.append(prev)  # stable from here on
            continue
        tabs = _heads_times(u.ops, sorted(prev, key=lambda o: o.table), u.q, caps)
        levels.append(prev | frozenset(OpTable(u.q, k, t) for t in tabs))
    return levels[i]


def cayley_depth(u: CloneFragment, k: int, target: Iterable[OpTable], caps: Caps = DEFAULT_CAPS) -> int | None:
    """Least ``n`` with ``target ⊆ U^[k,n]``.

    Returns None when the bracket sets stop growing short of the target.
    Raises CapExceeded when ``caps.depth`` levels pass while they still grow.
    """
    target = frozenset(target)
    if any(t.arity != k or t.q != u.q for t in target):
        raise ValueError("target tables must be k-ary over the same carrier")
    i = 0
    while True:
        cur = bracket(u, k, i, caps)
        if target <= cur:
            return i
        if i >= 1 and bracket(u, k, i - 1, caps) == cur:
            return None
        if i >= caps.depth:
            raise CapExceeded(f"depth cap exceeded ({caps.depth}) with U^[{k},{i}] still growing")
        i += 1


@dataclass
class GenerationReport:
    per_arity: dict[int, dict] = field(default_factory=dict)

    @property
    def stabilized(self) -> bool:
        return all(v["stabilized"] for v in self.per_arity.values())


def generate_clone(u: CloneFragment, arity_cap: int | None = None, depth_cap: int | None = None, caps: Caps = DEFAULT_CAPS):
    """Closure of ``U`` and the projections under superposition, arity by arity.

    The k-ary part of the generated clone is the union of the bracket sets
    ``U^[k,i]``; each arity is iterated until it stops growing or the depth
    cap is reached.  Returns ``(fragment, report)``.
    """
    arity_cap = caps.arity if arity_cap is None else arity_cap
    depth_cap = caps.depth if depth_cap is None else depth_cap
    report = GenerationReport()
    ops: set[OpTable] = set()
    for k in range(1, arity_cap + 1):
        i = 0
        while i < depth_cap and bracket(u, k, i + 1, caps) != bracket(u, k, i, caps):
            i += 1
        final = bracket(u, k, i, caps)
        stable = bracket(u, k, i + 1, caps) == final if i == depth_cap else True
        report.per_arity[k] = {"depth": i, "size": len(final), "stabilized": stable}
        ops.update(final)
    return CloneFragment(u.q, frozenset(ops)), report


# --------------------------------------------------------------------------
# polymorphisms


def iter_polymorphisms(a: RelStructure, n: int, caps: Caps = DEFAULT_CAPS) -> Iterator[OpTable]:
    """n-ary polymorphisms of ``a`` in search order."""
    p = power(a, n, caps)
    for m in iter_morphisms(p, a, "hom"):
        yield OpTable(a.size, n, m.map)


def polymorphisms(a: RelStructure, n: int, caps: Caps = DEFAULT_CAPS) -> CloneFragment:
    """Every n-ary polymorphism; more than ``caps.polymorphisms`` raises CapExceeded."""
    out = []
    for op in iter_polymorphisms(a, n, caps):
        out.append(op)
        if len(out) > caps.polymorphisms:
            raise CapExceeded(f"polymorphism cap exceeded (> {caps.polymorphisms})")
    return CloneFragment(a.size, frozenset(out))


def first_polymorphisms(a: RelStructure, n: int, count: int, caps: Caps = DEFAULT_CAPS) -> list[OpTable]:
    return list(itertools.islice(iter_polymorphisms(a, n, caps), count))


# --------------------------------------------------------------------------
# terms


def _proj(n: int, i: int) -> tuple:
    return ("proj", n, i)


def term_arity(term: tuple, gen_arity: Mapping[str, int]) -> int:
    tag = term[0]
    if tag == "proj":
        return term[1]
    if tag == "gen":
        return gen_arity[term[1]]
    if tag == "apply":
        head, args = term[1], term[2:]
        if term_arity(head, gen_arity) != len(args):
            raise ValueError(f"head of arity {term_arity(head, gen_arity)} applied to {len(args)} arguments")
        ars = {term_arity(t, gen_arity) for t in args}
        if len(ars) != 1:
            raise ValueError("arguments of different arities")
        return ars.pop()
    raise ValueError(f"unknown term node {tag!r}")


def evaluate(term: tuple, gens: Mapping[str, Callable[..., int | None]], args: tuple[int, ...]) -> int | None:
    """Value of ``term`` at ``args``; None where a partial generator is undefined."""
    tag = term[0]
    if tag == "proj":
        n, i = term[1], term[2]
        if len(args) != n:
            raise ValueError(f"projection of arity {n} at {len(args)} arguments")
        return args[i - 1]
    if tag == "gen":
        return gens[term[1]](*args)
    if tag == "apply":
        vals = []
        for t in term[2:]:
            v = evaluate(t, gens, args)
            if v is None:
                return None
            vals.append(v)
        return evaluate(term[1], gens, tuple(vals))
    raise ValueError(f"unknown term node {tag!r}")


def term_depth(term: tuple) -> int:
    if term[0] == "apply":
        return 1 + max(term_depth(t) for t in term[1:])
    return 0 if term[0] == "proj" else 1


def _table_gen(op: OpTable) -> Callable[..., int]:
    return lambda *xs: op(*xs)


def _partial_gen(values: Mapping[tuple, int]) -> Callable[..., int | None]:
    return lambda *xs: values.get(xs)


# --------------------------------------------------------------------------
# staged retractions


@dataclass(frozen=True)
class StagedRetraction:
    """Stages ``small ⊆ big`` (via ``incl``) with ``r: big -> small²`` and ``eps: small² -> big``."""

    small: RelStructure
    big: RelStructure
    r: Morphism
    eps: Morphism
    incl: Morphism

    @property
    def square(self) -> RelStructure:
        return self.r.target

    def pair(self, z: int) -> tuple[int, int]:
        """``r(z)`` as a pair of small-stage elements."""
        return divmod(self.r.map[z], self.small.size)

    def check(self) -> None:
        """Raise MorphismError with a witness point unless every leg verifies and ``r ∘ eps = 1``."""
        n = self.small.size
        if self.square != direct_product(self.small, self.small):
            raise MorphismError("r must map into the square of the small stage")
        for name, m in (("r", self.r), ("eps", self.eps), ("incl", self.incl)):
            if not m.verify():
                raise MorphismError(f"{name} is not a verified {m.kind}")
        for p in range(n * n):
            if self.r.map[self.eps.map[p]] != p:
                raise MorphismError(f"r(eps{divmod(p, n)}) = {divmod(self.r.map[self.eps.map[p]], n)}")


def staged_retraction(small: RelStructure | None = None, caps: Caps = DEFAULT_CAPS) -> StagedRetraction:
    """Build ``U_m ⊆ U_M`` with a retraction onto the square of ``U_m``.

    ``U_m`` defaults to the graph stage saturated at bound 2.  The comma
    builder for the target ``T = U_m²`` starts from ``(U_m, diagonal)`` and
    is asked for the single task that embeds ``(T, 1_T)`` over the diagonal.
    The section of the resulting map ``u`` is ``eps`` and ``u`` itself is ``r``.
    """
    if small is None:
        small = saturate_limit(graphs(), 2, 100, caps).final
    n = small.size
    t = direct_product(small, small, caps)
    diag = tuple(x * n + x for x in range(n))
    sc = Scenario(graphs(), t, k=0, budget=1, caps=caps)
    task = (t, diag, tuple(range(t.size)), tuple(range(n)))
    res = build_universal_hom(sc, initial=small, initial_u=diag, required=[task])
    big, u = res.final, res.u
    eps = extract_section(res, sc)
    if eps is None:
        raise MorphismError("the stage holds no copy of the square over the diagonal")
    sr = StagedRetraction(small, big, Morphism(big, t, u), eps, res.link(0, len(res) - 1))
    sr.check()
    return sr


@dataclass
class ChainLevel:
    """``eps_i`` on its tracked domain, ``r_i`` on the whole big stage, and the term for ``eps_i``."""

    i: int
    eps: dict[tuple, int]  # tracked domain (small^(i+1)) -> big
    r: tuple[tuple, ...]  # big -> small^(i+1)
    term: tuple

    @property
    def domain(self) -> list[tuple]:
        return sorted(self.eps)


def build_eps_chain(sr: StagedRetraction, depth: int) -> list[ChainLevel]:
    """``eps_{i+1}(x, y) = eps(eps_i(x), y)`` and ``r_{i+1} = (r_i × 1) ∘ r`` on finite stages.

    ``eps`` only accepts small-stage elements, so ``eps_{i+1}`` is defined
    where ``eps_i`` lands in the small stage.  ``r_i ∘ eps_i = 1`` is checked
    at every tracked point; an empty domain before ``depth`` raises.
    """
    sr.check()
    n = sr.small.size
    back = {z: x for x, z in enumerate(sr.incl.map)}
    eps1 = {divmod(p, n): sr.eps.map[p] for p in range(n * n)}
    r1 = tuple(sr.pair(z) for z in range(sr.big.size))
    levels = [ChainLevel(1, eps1, r1, ("gen", "eps"))]
    while len(levels) < depth:
        prev = levels[-1]
        j = prev.i
        eps_next = {}
        for xs, z in prev.eps.items():
            if z in back:
                for y in range(n):
                    eps_next[xs + (y,)] = sr.eps.map[back[z] * n + y]
        if not eps_next:
            raise ValueError(f"tracked domain empties at level {j + 1}: the stage is too small")
        r_next = tuple(prev.r[sr.incl.map[a]] + (b,) for a, b in (sr.pair(z) for z in range(sr.big.size)))
        inner = ("apply", prev.term) + tuple(_proj(j + 2, t) for t in range(1, j + 2))
        term = ("apply", ("gen", "eps"), inner, _proj(j + 2, j + 2))
        levels.append(ChainLevel(j + 1, eps_next, r_next, term))
    for lv in levels:
        for xs, z in lv.eps.items():
            if lv.r[z] != xs:
                raise AssertionError(f"r_{lv.i}(eps_{lv.i}{xs}) = {lv.r[z]}")
    return levels


def chain_generators(sr: StagedRetraction) -> dict[str, Callable]:
    """``eps`` as a partial binary operation on the big stage."""
    n = sr.small.size
    table = {(sr.incl.map[a], sr.incl.map[b]): sr.eps.map[a * n + b] for a in range(n) for b in range(n)}
    return {"eps": _partial_gen(table)}


def check_chain_terms(sr: StagedRetraction, levels: list[ChainLevel]) -> bool:
    """Every level's term, evaluated on the big stage, reproduces ``eps_i`` on its domain."""
    gens = chain_generators(sr)
    for lv in levels:
        for xs, z in lv.eps.items():
            if evaluate(lv.term, gens, tuple(sr.incl.map[x] for x in xs)) != z:
                return False
    return True


@dataclass
class Decomposition:
    term: tuple
    endo: Morphism  # incl ∘ f ∘ r_i, an endomorphism of the big stage
    level: ChainLevel

    def generators(self, sr: StagedRetraction) -> dict[str, Callable]:
        gens = chain_generators(sr)
        gens["endo"] = lambda z: self.endo.map[z]
        return gens


def decompose_polymorphism(f: OpTable, sr: StagedRetraction, levels: list[ChainLevel]) -> Decomposition:
    """``f = (f ∘ r_i) ∘ eps_i`` as a term over ``endo`` and ``eps``.

    The head ``endo = incl ∘ f ∘ r_i`` is unary; the term evaluated at
    ``incl(x)`` returns ``incl(f(x))`` for every tracked ``x``, which is
    checked before returning.
    """
    i = f.arity - 1
    if i < 1:
        raise ValueError("decomposition needs arity at least 2")
    if i > len(levels):
        raise ValueError(f"chain too shallow: arity {f.arity} needs depth {i}, chain has {len(levels)}")
    if f.q != sr.small.size or not is_homomorphism(power(sr.small, f.arity), sr.small, f.table):
        raise ValueError("not a polymorphism of the small stage")
    lv = levels[i - 1]
    endo_map = tuple(sr.incl.map[f(*lv.r[z])] for z in range(sr.big.size))
    endo = Morphism.checked(sr.big, sr.big, endo_map, "hom")
    term = ("apply", ("gen", "endo"), lv.term)
    d = Decomposition(term, endo, lv)
    gens = d.generators(sr)
    for xs in lv.eps:
        got = evaluate(term, gens, tuple(sr.incl.map[x] for x in xs))
        if got != sr.incl.map[f(*xs)]:
            raise AssertionError(f"decomposition differs from f at {xs}")
    return d
