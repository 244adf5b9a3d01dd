"""Backtracking search for homomorphisms, embeddings and isomorphisms.

The solver keeps one domain per source element and maintains generalised
arc consistency over the relation tuples of the source.  Variables are
chosen most-constrained first (smallest domain, then highest degree, then
lowest index); values are tried in ascending order.  The first solution
returned is therefore a function of the inputs alone.
"""

from __future__ import annotations

import itertools
from typing import Iterator, Mapping, Sequence

from .config import DEFAULT_CAPS, CapExceeded, Caps
from .structures import (
    Morphism,
    MorphismError,
    RelStructure,
    SignatureMismatch,
    Verdict,
    check_kind,
)

PartialMap = Mapping[int, int]


class InconsistentSeed(ValueError):
    pass


class _Solver:
    def __init__(self, a: RelStructure, b: RelStructure, injective: bool, reflect: bool):
        if a.signature != b.signature:
            raise SignatureMismatch(f"{a.signature.names} vs {b.signature.names}")
        self.a, self.b = a, b
        self.injective, self.reflect = injective, reflect
        self.cons: list[tuple[int, tuple[int, ...], list[tuple[int, ...]]]] = []
        self.watch: list[list[int]] = [[] for _ in range(a.size)]
        for k, rel in enumerate(a.relations):
            targets = sorted(b.relations[k])
            for t in sorted(rel):
                ci = len(self.cons)
                self.cons.append((k, t, targets))
                for x in set(t):
                    self.watch[x].append(ci)
        self.degree = [len(w) for w in self.watch]

    # -- propagation ------------------------------------------------------

    def _revise(self, ci: int, dom: list[set]) -> list[int] | None:
        """Prune the domains of one constraint; return changed vars or None on wipe-out."""
        _, t, targets = self.cons[ci]
        r = len(t)
        support = [set() for _ in range(r)]
        for s in targets:
            ok = True
            for i in range(r):
                if s[i] not in dom[t[i]]:
                    ok = False
                    break
                for j in range(i):
                    if t[j] == t[i] and s[j] != s[i]:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                for i in range(r):
                    support[i].add(s[i])
        changed = []
        for i, x in enumerate(t):
            if x in changed:
                continue
            keep = dom[x] & support[i]
            if not keep:
                return None
            if len(keep) != len(dom[x]):
                dom[x] = keep
                changed.append(x)
        return changed

    def _propagate(self, dom: list[set], dirty: Sequence[int]) -> bool:
        queue = list(dict.fromkeys(ci for x in dirty for ci in self.watch[x]))
        if self.injective:
            singles = list(dirty)
        while queue or (self.injective and singles):
            if self.injective and singles:
                x = singles.pop()
                if len(dom[x]) == 1:
                    (v,) = dom[x]
                    for y in range(len(dom)):
                        if y != x and v in dom[y]:
                            dom[y] = dom[y] - {v}
                            if not dom[y]:
                                return False
                            singles.append(y)
                            queue.extend(self.watch[y])
                continue
            ci = queue.pop(0)
            changed = self._revise(ci, dom)
            if changed is None:
                return False
            for x in changed:
                if self.injective:
                    singles.append(x)
                for cj in self.watch[x]:
                    if cj != ci and cj not in queue:
                        queue.append(cj)
        return True

    def _reflect_ok(self, dom: list[set], fresh: list[int], fixed: list[int]) -> bool:
        """Embeddings must not map a non-tuple of ``a`` onto a tuple of ``b``."""
        val = {x: next(iter(dom[x])) for x in fixed}
        for k, (rel_a, rel_b) in enumerate(zip(self.a.relations, self.b.relations)):
            arity = self.a.signature.symbols[k][1]
            for t in itertools.product(fixed, repeat=arity):
                if not any(x in fresh for x in t):
                    continue
                if t not in rel_a and tuple(val[x] for x in t) in rel_b:
                    return False
        return True

    # -- search ------------------------------------------------------------

    def initial(self, seed: PartialMap | None, domains: Mapping[int, Sequence[int]] | None):
        full = set(range(self.b.size))
        dom = [set(full) for _ in range(self.a.size)]
        if domains:
            for x, vals in domains.items():
                dom[x] &= set(vals)
        if seed:
            for x, v in seed.items():
                if not (0 <= x < self.a.size and 0 <= v < self.b.size):
                    raise InconsistentSeed(f"seed pair {x}->{v} out of range")
                dom[x] &= {v}
        if self.reflect:
            # diagonal non-tuples constrain single variables
            for k, (rel_a, rel_b) in enumerate(zip(self.a.relations, self.b.relations)):
                arity = self.a.signature.symbols[k][1]
                for x in range(self.a.size):
                    if (x,) * arity not in rel_a:
                        dom[x] -= {v for v in list(dom[x]) if (v,) * arity in rel_b}
        return dom

    def solutions(self, seed=None, domains=None) -> Iterator[tuple[int, ...]]:
        if seed:
            self._check_seed(seed)
        if self.injective and self.a.size > self.b.size:
            return
        dom = self.initial(seed, domains)
        if any(not d for d in dom):
            return
        if not self._propagate(dom, range(self.a.size)):
            return
        fixed = [x for x in range(self.a.size) if len(dom[x]) == 1]
        if self.reflect and not self._reflect_ok(dom, fixed, fixed):
            return
        yield from self._search(dom, fixed)

    def _check_seed(self, seed: PartialMap):
        for k, rel in enumerate(self.a.relations):
            for t in rel:
                if all(x in seed for x in t) and tuple(seed[x] for x in t) not in self.b.relations[k]:
                    raise InconsistentSeed(f"seed maps tuple {t} outside the target relation")
        if self.injective and len(set(seed.values())) != len(seed):
            raise InconsistentSeed("seed is not injective")

    def _search(self, dom: list[set], fixed: list[int]) -> Iterator[tuple[int, ...]]:
        best = None
        for x in range(self.a.size):
            n = len(dom[x])
            if n > 1:
                key = (n, -self.degree[x], x)
                if best is None or key < best:
                    best = key
        if best is None:
            yield tuple(next(iter(d)) for d in dom)
            return
        x = best[2]
        fixed_set = set(fixed)
        for v in sorted(dom[x]):
            child = list(dom)
            child[x] = {v}
            if not self._propagate(child, [x]):
                continue
            now = [y for y in range(self.a.size) if len(child[y]) == 1]
            fresh = [y for y in now if y not in fixed_set]
            if self.reflect and not self._reflect_ok(child, fresh, now):
                continue
            yield from self._search(child, now)


_MODES = {"hom": (False, False), "embedding": (True, True), "iso": (True, True)}


def iter_morphisms(
    a: RelStructure,
    b: RelStructure,
    kind: str = "hom",
    seed: PartialMap | None = None,
    domains: Mapping[int, Sequence[int]] | None = None,
) -> Iterator[Morphism]:
    """All morphisms of the given kind, in search order."""
    if kind == "iso" and a.size != b.size:
        return
    injective, reflect = _MODES[kind]
    solver = _Solver(a, b, injective, reflect)
    for m in solver.solutions(seed, domains):
        if not check_kind(a, b, m, kind):  # cheap guard, never expected to trip
            raise AssertionError(f"solver produced a non-{kind} {m}")
        yield Morphism(a, b, m, kind)


def _first(it):
    return next(it, None)


def find_homomorphism(a, b, seed: PartialMap | None = None, domains=None) -> Morphism | None:
    """A homomorphism extending ``seed`` or ``None`` if none exists."""
    return _first(iter_morphisms(a, b, "hom", seed, domains))


def find_embedding(a, b, seed: PartialMap | None = None, domains=None) -> Morphism | None:
    return _first(iter_morphisms(a, b, "embedding", seed, domains))


def find_isomorphism(a, b) -> Morphism | None:
    return _first(iter_morphisms(a, b, "iso"))


def _enumerate(a, b, kind, caps: Caps):
    space = b.size ** a.size
    if space > caps.enumeration:
        raise CapExceeded(f"enumeration cap exceeded ({space} > {caps.enumeration})")
    return sorted(iter_morphisms(a, b, kind), key=lambda m: m.map)


def enumerate_homomorphisms(a, b, caps: Caps = DEFAULT_CAPS) -> list[Morphism]:
    """Every homomorphism ``a -> b`` sorted by map."""
    return _enumerate(a, b, "hom", caps)


def enumerate_embeddings(a, b, caps: Caps = DEFAULT_CAPS) -> list[Morphism]:
    return _enumerate(a, b, "embedding", caps)


def automorphisms(a: RelStructure) -> list[Morphism]:
    return sorted(iter_morphisms(a, a, "iso"), key=lambda m: m.map)


def is_retraction_pair(r: Morphism, s: Morphism) -> Verdict:
    """ok iff ``r ∘ s`` is the identity of ``s.source``."""
    if r.target != s.source or s.target != r.source:
        raise MorphismError("retraction pair: domain/codomain mismatch")
    for b in range(s.source.size):
        if r.map[s.map[b]] != b:
            return Verdict(False, f"r(s({b})) = {r.map[s.map[b]]} ≠ {b}", b)
    return Verdict(True)


def find_section(r: Morphism) -> Morphism | None:
    """A homomorphism ``s`` with ``r ∘ s = 1``; searched fibre by fibre."""
    a, b = r.source, r.target
    fibres: dict[int, list[int]] = {y: [] for y in range(b.size)}
    for x, y in enumerate(r.map):
        fibres[y].append(x)
    if any(not f for f in fibres.values()):
        return None
    s = find_homomorphism(b, a, domains=fibres)
    if s is None:
        return None
    # sections of homomorphisms are embeddings
    return Morphism(b, a, s.map, "embedding" if check_kind(b, a, s.map, "embedding") else "hom")
