"""Homomorphisms into a fixed target: comma-category amalgamation and universal stages.

Objects are pairs ``(A, h)`` with ``h: A -> T`` a homomorphism into the
scenario's target ``T``; arrows are embeddings commuting with the maps to
``T``.  A universal homogeneous homomorphism ``u: U -> T`` is approached by
the same FIFO saturation as plain limits, with every task carrying a
colouring of its big structure and every amalgam required to carry a
glued map into ``T``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .ages import (
    FAILS,
    HOLDS,
    AgeSpec,
    CheckReport,
    Square,
    _auts,
    _glue,
    _orbit_min_subsets,
    enumerate_members,
    hap_amalgams,
    run_instances,
    squares,
    union_amalgams,
)
from .config import DEFAULT_CAPS, Caps
from .limits import (
    AmalgamationError,
    ChainStage,
    SaturationResult,
    partial_isomorphisms,
    saturate,
    saturate_limit,
    survival_depth,
    _partial_iso_ok,
)
from .search import find_embedding, find_homomorphism, find_section, is_retraction_pair, iter_morphisms
from .structures import (
    Morphism,
    MorphismError,
    RelStructure,
    canonical_form,
    induced_substructure,
    is_embedding,
    is_homomorphism,
    validate_structure,
)


class NoCommaAmalgam(AmalgamationError):
    """No amalgam in the class carries a map into the target commuting with both legs."""


# --------------------------------------------------------------------------
# objects and arrows


@dataclass(frozen=True)
class CommaObject:
    dom: RelStructure
    map: tuple[int, ...]
    target: RelStructure

    def __post_init__(self):
        object.__setattr__(self, "map", tuple(self.map))
        if not is_homomorphism(self.dom, self.target, self.map):
            raise MorphismError(f"{self.map} is not a homomorphism into the target")


@dataclass(frozen=True)
class CommaMorphism:
    source: CommaObject
    target: CommaObject
    emb: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "emb", tuple(self.emb))
        if not self.verify():
            raise MorphismError(f"{self.emb} is not a colour-preserving embedding")

    def verify(self) -> bool:
        a, b = self.source, self.target
        return (
            a.target == b.target
            and is_embedding(a.dom, b.dom, self.emb)
            and all(b.map[self.emb[x]] == a.map[x] for x in range(a.dom.size))
        )


@dataclass(frozen=True)
class Scenario:
    """A class ``spec`` together with a target ``T`` and the working bounds."""

    spec: AgeSpec
    target: RelStructure
    k: int = 3
    budget: int = 200
    caps: Caps = field(default=DEFAULT_CAPS)

    def __post_init__(self):
        v = validate_structure(self.target)
        if not v:
            raise ValueError(f"invalid target: {v.message}")
        if self.target.signature != self.spec.signature:
            raise ValueError("target signature differs from the class signature")

    def with_target(self, target: RelStructure) -> "Scenario":
        return Scenario(self.spec, target, self.k, self.budget, self.caps)

    def target_in_closure(self) -> bool:
        """Is every finite induced substructure of ``T`` a member?"""
        t = self.target
        if self.spec.hereditary_by_construction:
            return self.spec.contains(t)
        return all(
            self.spec.contains(induced_substructure(t, s)[0])
            for r in range(t.size + 1)
            for s in itertools.combinations(range(t.size), r)
        )


def _stage_parts(stage) -> tuple[RelStructure, tuple[int, ...]]:
    if isinstance(stage, SaturationResult):
        stage = stage.stages[-1]
    if isinstance(stage, ChainStage):
        return stage.structure, stage.u
    u_struct, u = stage
    return u_struct, tuple(u)


def _orbit_min_colourings(maps, auts):
    """Maps out of a structure, one per orbit of its automorphisms acting by precomposition."""
    for m in maps:
        if all(tuple(m[a[x]] for x in range(len(m))) >= m for a in auts):
            yield m


def _fibres(u: tuple, t_size: int) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {c: [] for c in range(t_size)}
    for x, c in enumerate(u):
        out[c].append(x)
    return out


# --------------------------------------------------------------------------
# amalgamation over T


def amalgams_over_target(spec: AgeSpec, sq: Square, h1, h2, target: RelStructure, caps: Caps = DEFAULT_CAPS):
    """Amalgams ``(C, g1, g2, h)`` of ``sq`` with ``h: C -> target`` agreeing with ``h1``, ``h2``."""
    for c, g1, g2 in union_amalgams(spec, sq, caps):
        h = _glue(c.size, g1, g2, h1, h2)
        if h is not None and -1 not in h and is_homomorphism(c, target, h):
            yield c, g1, g2, tuple(h)


def comma_amalgamate(
    a: CommaObject,
    b1: CommaObject,
    b2: CommaObject,
    f1: CommaMorphism,
    f2: CommaMorphism,
    spec: AgeSpec,
    caps: Caps = DEFAULT_CAPS,
) -> tuple[CommaObject, CommaMorphism, CommaMorphism]:
    """Amalgamate ``b1 <- a -> b2`` inside the comma category over ``T``.

    The free amalgam is tried first; the glued map ``h1 ∪ h2`` is then the
    map into ``T``.  Otherwise identifications and extra tuples are searched
    in the fixed order of :func:`union_amalgams`.
    """
    if f1.source != a or f2.source != a or f1.target != b1 or f2.target != b2:
        raise ValueError("legs do not form a span over a")
    t = a.target
    pairs = sorted((f1.emb[x], f2.emb[x]) for x in range(a.dom.size))
    sq = Square(b1.dom, tuple(p[0] for p in pairs), b2.dom, tuple(p[1] for p in pairs))
    hit = next(amalgams_over_target(spec, sq, b1.map, b2.map, t, caps), None)
    if hit is None:
        raise NoCommaAmalgam(f"no amalgam of {b1.dom!r} and {b2.dom!r} over {a.dom!r} maps into the target")
    c, g1, g2, h = hit
    co = CommaObject(c, h, t)
    return co, CommaMorphism(b1, co, g1), CommaMorphism(b2, co, g2)


# --------------------------------------------------------------------------
# bounded checks of the two conditions


def _amalgam_instances(sc: Scenario, n: int):
    t = sc.target
    for sq in squares(sc.spec, n, sc.caps):
        for h2 in iter_morphisms(sq.b2, t, "hom"):
            seed = {sq.s[i]: h2.map[sq.f2[i]] for i in range(len(sq.s))}
            for h1 in iter_morphisms(sq.b1, t, "hom", seed=seed):
                yield sq, h1.map, h2.map


def _target_ap_witness(sq, t, h1, h2, hit=None):
    w = sq.legs()
    w.update(T=t, h1=Morphism(sq.b1, t, tuple(h1)), h2=Morphism(sq.b2, t, tuple(h2)))
    if hit is not None:
        c, g1, g2, h = hit
        w.update(
            C=c,
            g1=Morphism(sq.b1, c, tuple(g1), "embedding"),
            g2=Morphism(sq.b2, c, tuple(g2), "embedding"),
            h=Morphism(c, t, tuple(h)),
        )
    return w


def check_target_ap(sc: Scenario, n: int) -> CheckReport:
    """Amalgamation over ``T``: every coloured span of members of size <= n completes."""
    t = sc.target

    def solve(inst):
        sq, h1, h2 = inst
        hit = next(amalgams_over_target(sc.spec, sq, h1, h2, t, sc.caps), None)
        w = _target_ap_witness(sq, t, h1, h2, hit)
        if hit is None:
            w["reason"] = "no amalgam carries a map into the target agreeing with both colourings"
            return False, w
        return True, w

    return run_instances("target_ap", n, _amalgam_instances(sc, n), solve, params={"target_size": t.size})


def _extension_templates(sc: Scenario, n: int):
    out = []
    for b in enumerate_members(sc.spec, n, sc.caps):
        code = canonical_form(b, sc.caps) if b.size <= sc.caps.canonical else b""
        for s in _orbit_min_subsets(b, _auts(b)):
            out.append((b.size, len(s), code, s, b))
    out.sort(key=lambda r: r[:4])
    return [(r[4], r[3]) for r in out]


def check_target_extension(sc: Scenario, n: int) -> CheckReport:
    """Every colouring of an induced A <= B (|B| <= n) extends to a map B -> T.

    Instances are ordered by |B|, then |A|, then the canonical code of B,
    then the subset, then the colouring of A.
    """
    t = sc.target

    def instances():
        for b, s in _extension_templates(sc, n):
            a, inc = induced_substructure(b, s)
            for h in sorted(m.map for m in iter_morphisms(a, t, "hom")):
                yield b, a, inc, h

    def solve(inst):
        b, a, inc, h = inst
        ext = find_homomorphism(b, t, seed={inc.map[i]: h[i] for i in range(a.size)})
        w = {"A": a, "B": b, "T": t, "f": inc, "h": Morphism(a, t, h)}
        if ext is None:
            w["reason"] = f"colouring {h} of {a!r} does not extend over {b!r}"
            return False, w
        w["ext"] = ext
        return True, w

    return run_instances("target_extension", n, instances(), solve, params={"target_size": t.size})


MIXED_STAGE_BUDGET = 8


def check_mixed_ap(sc: Scenario, n: int, stage: RelStructure | None = None) -> CheckReport:
    """Homomorphism amalgamation against a stage of the plain limit.

    For A <= B (|B| <= n) and a homomorphism ``h: A -> U`` into the stage,
    look for a member ``C`` containing the stage and a homomorphism
    ``B -> C`` that agrees with ``h`` on ``A``.  Without a stage, the
    limit of the class is saturated at bound ``min(n, 2)`` for at most
    ``MIXED_STAGE_BUDGET`` stages first (every instance keeps its amalgam,
    so the stage is kept small).
    """
    if stage is None:
        stage = saturate_limit(sc.spec, min(n, 2), min(sc.budget, MIXED_STAGE_BUDGET), sc.caps).final

    def instances():
        for b in enumerate_members(sc.spec, n, sc.caps):
            for s in _orbit_min_subsets(b, _auts(b)):
                if len(s) == b.size:
                    continue
                a = induced_substructure(b, s)[0]
                for h in sorted(m.map for m in iter_morphisms(a, stage, "hom")):
                    yield Square(b, s, stage, h)

    def solve(sq: Square):
        w = sq.legs("hom")
        hit = next(hap_amalgams(sc.spec, sq, sc.caps), None)
        if hit is None:
            w["reason"] = "no member containing the stage receives B compatibly"
            return False, w
        c, g1, g2 = hit
        w.update(C=c, g1=Morphism(sq.b1, c, g1, "hom"), g2=Morphism(sq.b2, c, g2, "embedding"))
        return True, w

    rep = run_instances("mixed_ap", n, instances(), solve, params={"stage_size": stage.size})
    rep.notes.append(f"stage of {stage.size} elements; the stage may be enlarged by the completion")
    return rep


# --------------------------------------------------------------------------
# universal stages


def comma_templates(sc: Scenario, k: int | None = None) -> list[tuple]:
    """Coloured extension tasks ``(B, S, hB)``: S proper and orbit-minimal, hB every map into T."""
    k = sc.k if k is None else k
    out = []
    for b in enumerate_members(sc.spec, k, sc.caps):
        colourings = sorted(m.map for m in iter_morphisms(b, sc.target, "hom"))
        for s in _orbit_min_subsets(b, _auts(b)):
            if len(s) == b.size:
                continue
            for hb in colourings:
                out.append((b, s, hb))
    return out


def build_universal_hom(
    sc: Scenario,
    initial: RelStructure | None = None,
    initial_u: tuple | None = None,
    required: list[tuple] = (),
) -> SaturationResult:
    """Stages ``(U_i, u_i)`` approaching a universal homogeneous map into ``T``.

    Every stage carries ``u_i`` in ``stages[i].u`` and ``u_j`` restricted
    along the link from stage i is ``u_i``.  ``required`` lists extra tasks
    ``(B, S, hB, anchor)`` against stage 0 that are served first.
    """
    if initial is not None and not is_homomorphism(initial, sc.target, initial_u or ()):
        raise MorphismError("initial colouring is not a homomorphism into the target")
    try:
        return saturate(
            sc.spec,
            comma_templates(sc),
            sc.budget,
            sc.caps,
            initial,
            tuple(initial_u) if initial is not None else (),
            sc.target,
            required,
            k=sc.k,
        )
    except AmalgamationError as e:
        raise NoCommaAmalgam(str(e)) from None


def verify_universality(stage, sc: Scenario, k: int | None = None) -> CheckReport:
    """Every member ``A`` (|A| <= k) with every ``h: A -> T`` embeds with ``u ∘ ι = h``."""
    k = sc.k if k is None else k
    u_struct, u = _stage_parts(stage)
    fib = _fibres(u, sc.target.size)

    def instances():
        for a in enumerate_members(sc.spec, k, sc.caps):
            maps = sorted(m.map for m in iter_morphisms(a, sc.target, "hom"))
            for h in _orbit_min_colourings(maps, _auts(a)):
                yield a, h

    def solve(inst):
        a, h = inst
        iota = find_embedding(a, u_struct, domains={x: fib[h[x]] for x in range(a.size)})
        w = {"A": a, "h": Morphism(a, sc.target, h)}
        if iota is None:
            w["reason"] = f"{a!r} coloured {h} has no colour-compatible embedding"
            return False, w
        w["iota"] = iota
        return True, w

    return run_instances("universality", k, instances(), solve, params={"stage_size": u_struct.size})


def verify_comma_homogeneity(stage, sc: Scenario, k: int, steps: int) -> CheckReport:
    """Back-and-forth survival of colour-preserving partial isomorphisms of size <= k."""
    u_struct, u = _stage_parts(stage)

    def ok(s, p, x, y):
        return u[x] == u[y] and _partial_iso_ok(s, p, x, y)

    depths = []

    def solve(p):
        d = survival_depth(u_struct, p, steps, ok)
        depths.append(d)
        if d < steps:
            return False, {"iso": sorted(p.items()), "depth": d, "reason": f"colour-preserving map {sorted(p.items())} fails in round {d + 1}"}
        return True, None

    rep = run_instances("comma_homogeneity", k, partial_isomorphisms(u_struct, k, ok), solve, params={"steps": steps})
    rep.params["depth"] = min(depths) if depths else steps
    rep.notes.append("survival depth of colour-preserving back-and-forth; full homogeneity is not claimed")
    return rep


def extract_section(stage, sc: Scenario) -> Morphism | None:
    """An embedding ``ι: T -> U`` with ``u ∘ ι`` the identity of ``T``, or None.

    Raises ValueError when ``T`` itself is outside the class, since then no
    stage can contain a copy of it.
    """
    if not sc.target_in_closure():
        raise ValueError("target has a finite substructure outside the class")
    u_struct, u = _stage_parts(stage)
    t = sc.target
    fib = _fibres(u, t.size)
    return find_embedding(t, u_struct, domains={x: fib[x] for x in range(t.size)})


# --------------------------------------------------------------------------
# transport along a retraction of the target


def _compose(outer, inner) -> tuple[int, ...]:
    return tuple(outer[x] for x in inner)


def subretract_transfer(stage, sc: Scenario, s: Morphism, t: Morphism | None = None, n: int | None = None) -> CheckReport:
    """Carry both conditions and universality from ``T`` to a retract ``W``.

    ``s: T -> W`` is a homomorphism with section ``t`` (found when not
    given).  Each instance over ``W`` is pushed into ``T`` along ``t``,
    solved there, and pulled back with ``s``; the pulled-back witness is
    then re-checked on ``W`` alone.  The stage ``(U, u)`` yields ``s ∘ u``,
    which is checked for universality over ``W``.  Direct runs of the two
    checks on ``W`` are recorded in ``params`` for comparison.
    """
    n = sc.k if n is None else n
    if s.source != sc.target:
        raise MorphismError("retraction must start at the scenario target")
    if t is None:
        t = find_section(s)
        if t is None:
            raise ValueError("map has no section: not a retraction")
    v = is_retraction_pair(s, t)
    if not v:
        raise ValueError(f"not a retraction pair: {v.message}")
    w_target = s.target
    wsc = sc.with_target(w_target)
    T = sc.target

    def ap_solve(inst):
        sq, h1, h2 = inst
        lifted = next(amalgams_over_target(sc.spec, sq, _compose(t.map, h1), _compose(t.map, h2), T, sc.caps), None)
        w = _target_ap_witness(sq, w_target, h1, h2)
        if lifted is None:
            w["reason"] = "the lifted instance has no amalgam over the larger target"
            return False, w
        c, g1, g2, h = lifted
        hw = _compose(s.map, h)
        w.update(
            C=c,
            g1=Morphism(sq.b1, c, tuple(g1), "embedding"),
            g2=Morphism(sq.b2, c, tuple(g2), "embedding"),
            h=Morphism(c, w_target, hw),
        )
        good = (
            is_homomorphism(c, w_target, hw)
            and all(hw[g1[x]] == h1[x] for x in range(sq.b1.size))
            and all(hw[g2[y]] == h2[y] for y in range(sq.b2.size))
        )
        if not good:
            w["reason"] = "pulled-back amalgam does not verify over the retract"
        return good, w

    def ext_solve(inst):
        b, a, inc, h = inst
        lifted = find_homomorphism(b, T, seed={inc.map[i]: t.map[h[i]] for i in range(a.size)})
        w = {"A": a, "B": b, "T": w_target, "f": inc, "h": Morphism(a, w_target, h)}
        if lifted is None:
            w["reason"] = "the lifted colouring does not extend over the larger target"
            return False, w
        hw = _compose(s.map, lifted.map)
        w["ext"] = Morphism(b, w_target, hw)
        good = is_homomorphism(b, w_target, hw) and all(hw[inc.map[i]] == h[i] for i in range(a.size))
        if not good:
            w["reason"] = "pulled-back extension does not verify over the retract"
        return good, w

    def ext_instances():
        for b, sub in _extension_templates(wsc, n):
            a, inc = induced_substructure(b, sub)
            for h in sorted(m.map for m in iter_morphisms(a, w_target, "hom")):
                yield b, a, inc, h

    parts = [
        run_instances("transported_target_ap", n, _amalgam_instances(wsc, n), ap_solve),
        run_instances("transported_target_extension", n, ext_instances(), ext_solve),
    ]
    u_struct, u = _stage_parts(stage)
    parts.append(verify_universality((u_struct, _compose(s.map, u)), wsc, n))
    direct = {"target_ap": check_target_ap(wsc, n).verdict, "target_extension": check_target_extension(wsc, n).verdict}
    failed = next((p for p in parts if not p.holds), None)
    # a transported success must never contradict a direct failure
    for p, name in zip(parts, ("target_ap", "target_extension")):
        if p.holds and direct[name] != HOLDS:
            failed = p
            p.witness = {"reason": f"transport holds but the direct {name} check fails"}
    witnesses = [w for p in parts for w in p.witnesses]
    return CheckReport(
        "subretract_transfer",
        n,
        FAILS if failed else HOLDS,
        failed.witness if failed else None,
        witnesses,
        sum(p.instances for p in parts),
        [p.summary() for p in parts],
        {
            "retract_size": w_target.size,
            "section": t.map,
            "retraction": s.map,
            "direct": direct,
            "transported": {p.property: p.verdict for p in parts},
        },
    )
