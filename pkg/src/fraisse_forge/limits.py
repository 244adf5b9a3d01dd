"""Finite stages of Fraïssé limits built by FIFO saturation of extension tasks."""

from __future__ import annotations

import functools
import itertools
from collections import deque
from dataclasses import dataclass, field

from .ages import (
    AgeSpec,
    CheckReport,
    Square,
    _auts,
    _glue,
    _orbit_min_subsets,
    enumerate_members,
    run_instances,
    union_amalgams,
)
from .config import DEFAULT_CAPS, CapExceeded, Caps
from .search import InconsistentSeed, find_embedding, iter_morphisms
from .structures import Morphism, RelStructure, induced_substructure, is_homomorphism


class AmalgamationError(RuntimeError):
    """An extension task has no amalgam in the class."""


@dataclass(frozen=True)
class ChainStage:
    index: int
    structure: RelStructure
    link: Morphism | None  # embedding from the previous stage
    u: tuple[int, ...] | None = None  # map into the target, comma stages only


@dataclass(frozen=True)
class ExtensionTask:
    id: int
    small: RelStructure
    big: RelStructure
    emb: Morphism  # small -> big, inclusion of a subset
    anchor: tuple[int, ...]  # small -> stage `stage`
    stage: int
    colour: tuple[int, ...] | None = None  # big -> target, comma tasks only


@dataclass
class SaturationResult:
    stages: list[ChainStage]
    audit: list[dict] = field(default_factory=list)
    open_tasks: list[ExtensionTask] = field(default_factory=list)
    exhausted: bool = False
    k: int = 0
    budget: int = 0
    target: RelStructure | None = None

    @property
    def final(self) -> RelStructure:
        return self.stages[-1].structure

    @property
    def u(self) -> tuple[int, ...] | None:
        return self.stages[-1].u

    def link(self, i: int, j: int) -> Morphism:
        """Composed embedding from stage i into stage j (i <= j)."""
        m = tuple(range(self.stages[i].structure.size))
        for st in self.stages[i + 1 : j + 1]:
            m = tuple(st.link.map[x] for x in m)
        return Morphism(self.stages[i].structure, self.stages[j].structure, m, "embedding")

    def __len__(self):
        return len(self.stages)

    def __iter__(self):
        return iter(self.stages)

    def __getitem__(self, i):
        return self.stages[i]


Template = tuple  # (B, S, colour of B or None)


def task_templates(spec: AgeSpec, k: int, caps: Caps = DEFAULT_CAPS) -> list[Template]:
    """Triples (B, S, None): B a member of size <= k, S a proper subset, one per Aut(B)-orbit."""
    out = []
    for b in enumerate_members(spec, k, caps):
        for s in _orbit_min_subsets(b, _auts(b)):
            if len(s) < b.size:
                out.append((b, s, None))
    return out


def _fibres(colouring: tuple | None, size: int) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    if colouring is not None:
        for x, c in enumerate(colouring):
            out.setdefault(c, []).append(x)
    return out


def _extends(b, s, u, anchor, colour=None, fibres=None) -> Morphism | None:
    domains = None
    if colour is not None:
        domains = {x: fibres.get(colour[x], ()) for x in range(b.size)}
    return find_embedding(b, u, seed={s[i]: anchor[i] for i in range(len(s))}, domains=domains)


def _anchored_square(u: RelStructure, b: RelStructure, s: tuple, anchor: tuple) -> Square:
    pairs = sorted(zip(anchor, s))
    return Square(u, tuple(p[0] for p in pairs), b, tuple(p[1] for p in pairs))


def amalgamate_coloured(spec, u, ucol, b, bcol, s, anchor, target, caps):
    """First amalgam of stage ``u`` with ``b`` over the anchored subset whose glued colouring maps into ``target``."""
    sq = _anchored_square(u, b, s, anchor)
    for c, g1, g2 in union_amalgams(spec, sq, caps):
        if target is None:
            return c, g1, g2, None
        h = _glue(c.size, g1, g2, ucol, bcol)
        if h is not None and -1 not in h and is_homomorphism(c, target, h):
            return c, g1, g2, tuple(h)
    return None


def _new_anchors(a, u, new, colour_dom) -> list[tuple]:
    """Embeddings of ``a`` into ``u`` touching at least one element of ``new``."""
    found = set()
    for i in range(a.size):
        for v in new:
            if colour_dom is not None and v not in colour_dom[i]:
                continue
            try:
                for m in iter_morphisms(a, u, "embedding", seed={i: v}, domains=colour_dom):
                    found.add(m.map)
            except InconsistentSeed:
                continue
    return sorted(found)


def saturate(
    spec: AgeSpec,
    templates: list[Template],
    budget: int,
    caps: Caps = DEFAULT_CAPS,
    initial: RelStructure | None = None,
    initial_u: tuple | None = None,
    target: RelStructure | None = None,
    required: list[tuple] = (),
    k: int = 0,
) -> SaturationResult:
    """FIFO saturation engine shared by plain and comma stages.

    Tasks against a stage are generated when the queue reaches that stage's
    marker, which keeps the FIFO order of eager generation without paying
    for stages the budget never reaches.  ``required`` holds extra tasks
    ``(B, S, colour, anchor)`` against stage 0 that go first.
    """
    u0 = initial if initial is not None else RelStructure.empty(spec.signature)
    if target is not None and initial_u is None:
        initial_u = ()
    result = SaturationResult([ChainStage(0, u0, None, initial_u)], k=k, budget=budget, target=target)
    queue: deque = deque()
    counter = itertools.count()
    subs = {}
    for b, s, _ in templates:
        if (b, s) not in subs:
            subs[(b, s)] = induced_substructure(b, s)

    def tasks_for(stage_idx: int) -> list[ExtensionTask]:
        st = result.stages[stage_idx]
        u = st.structure
        new = range(u.size) if st.link is None else [x for x in range(u.size) if x not in set(st.link.map)]
        fib = _fibres(st.u, u.size)
        out = []
        for b, s, col in templates:
            a, inc = subs[(b, s)]
            dom = None if col is None else {i: fib.get(col[s[i]], ()) for i in range(a.size)}
            if stage_idx == 0 or a.size > 0:
                anchors = _new_anchors(a, u, new, dom) if stage_idx > 0 else [m.map for m in iter_morphisms(a, u, "embedding", domains=dom)]
            else:
                anchors = []
            for anchor in anchors:
                out.append(ExtensionTask(next(counter), a, b, inc, anchor, stage_idx, col))
        return out

    for b, s, col, anchor in required:
        a, inc = induced_substructure(b, s)
        queue.append(ExtensionTask(next(counter), a, b, inc, tuple(anchor), 0, col))
    queue.append(("stage", 0))
    while queue:
        head = queue[0]
        if isinstance(head, tuple):
            queue.popleft()
            fresh = tasks_for(head[1])
            for t in fresh:
                result.audit.append({"task": t.id, "event": "enqueued", "stage": head[1]})
            queue.extendleft(reversed(fresh))
            continue
        cur = len(result.stages) - 1
        st = result.stages[cur]
        u = st.structure
        task = head
        carried = result.link(task.stage, cur).map
        anchor = tuple(carried[x] for x in task.anchor)
        s = task.emb.map
        fib = _fibres(st.u, u.size)
        if _extends(task.big, s, u, anchor, task.colour, fib) is not None:
            queue.popleft()
            result.audit.append({"task": task.id, "event": "satisfied", "stage": cur})
            continue
        if cur >= budget:
            result.exhausted = True
            result.open_tasks = [t for t in queue if not isinstance(t, tuple)]
            break
        queue.popleft()
        hit = amalgamate_coloured(spec, u, st.u, task.big, task.colour, s, anchor, target, caps)
        if hit is None:
            raise AmalgamationError(
                f"amalgamation instance has no witness: stage of size {u.size}, B={task.big!r}, anchor={anchor}"
            )
        c, g1, _, h = hit
        if c.size > caps.carrier:
            raise CapExceeded(f"carrier cap exceeded ({c.size} > {caps.carrier})")
        result.stages.append(ChainStage(cur + 1, c, Morphism(u, c, tuple(g1), "embedding"), h))
        result.audit.append({"task": task.id, "event": "discharged", "stage": cur + 1})
        queue.append(("stage", cur + 1))
    return result


def saturate_limit(
    spec: AgeSpec,
    k: int,
    budget: int,
    caps: Caps = DEFAULT_CAPS,
    initial: RelStructure | None = None,
) -> SaturationResult:
    """Finite stages of the limit of ``spec``: extension tasks of size <= k, oldest first.

    Stage 0 is ``initial`` (default: the empty structure).  A task is an
    anchored pair A <= B with |B| <= k; it is dropped if the current stage
    already extends the anchor, and otherwise discharged by amalgamating
    the stage with B over A.  Stops when no task is left or after
    ``budget`` new stages (``exhausted`` is then set and the remaining
    tasks are listed).
    """
    return saturate(spec, task_templates(spec, k, caps), budget, caps, initial, k=k)


# --------------------------------------------------------------------------
# verification


def verify_extension_property(u: RelStructure, spec: AgeSpec, k: int, caps: Caps = DEFAULT_CAPS) -> CheckReport:
    """Every anchored A <= B (|B| <= k) extends inside ``u``."""

    def instances():
        for b, s, _ in task_templates(spec, k, caps):
            a, inc = induced_substructure(b, s)
            for anchor in iter_morphisms(a, u, "embedding"):
                yield a, b, inc, anchor

    def solve(inst):
        a, b, inc, anchor = inst
        ext = _extends(b, inc.map, u, anchor.map)
        w = {"A": a, "B": b, "U": u, "f": inc, "anchor": anchor}
        if ext is None:
            w["reason"] = f"anchor {anchor.map} of {a!r} does not extend to {b!r}"
            return False, w
        w["ext"] = ext
        return True, w

    return run_instances("extension", k, instances(), solve)


def _partial_iso_ok(u: RelStructure, p: dict[int, int], x: int, y: int) -> bool:
    """Can the partial isomorphism ``p`` be extended by ``x -> y``?"""
    if x in p or y in p.values():
        return False
    q = dict(p)
    q[x] = y
    dom = list(q)
    for (_, arity), rel in zip(u.signature.symbols, u.relations):
        for t in itertools.product(dom, repeat=arity):
            if x not in t:
                continue
            if (t in rel) != (tuple(q[z] for z in t) in rel):
                return False
    return True


def survival_depth(u: RelStructure, p: dict[int, int], steps: int, ok=_partial_iso_ok) -> int:
    """Number of back-and-forth rounds (at most ``steps``) the partial map survives."""

    @functools.lru_cache(maxsize=None)
    def survives(key: frozenset, r: int) -> bool:
        if r == 0:
            return True
        q = dict(key)
        rng = set(q.values())
        for x in range(u.size):
            if x in q:
                continue
            if not any(ok(u, q, x, y) and survives(key | {(x, y)}, r - 1) for y in range(u.size) if y not in rng):
                return False
        for y in range(u.size):
            if y in rng:
                continue
            if not any(ok(u, q, x, y) and survives(key | {(x, y)}, r - 1) for x in range(u.size) if x not in q):
                return False
        return True

    key = frozenset(p.items())
    depth = 0
    while depth < steps and survives(key, depth + 1):
        depth += 1
    return depth


def partial_isomorphisms(u: RelStructure, k: int, ok=_partial_iso_ok):
    """Nonempty isomorphisms between induced substructures of size <= k."""
    for j in range(1, k + 1):
        for dom in itertools.combinations(range(u.size), j):
            for rng in itertools.permutations(range(u.size), j):
                p: dict[int, int] = {}
                good = True
                for x, y in zip(dom, rng):
                    if not ok(u, p, x, y):
                        good = False
                        break
                    p[x] = y
                if good:
                    yield p


def verify_partial_homogeneity(
    u: RelStructure, spec: AgeSpec, k: int, steps: int, caps: Caps = DEFAULT_CAPS
) -> CheckReport:
    """Back-and-forth survival of every partial isomorphism of size <= k.

    A finite stage is never fully homogeneous; the report states the number
    of rounds every partial isomorphism survived (``params["depth"]``).
    """
    depths = []

    def solve(p):
        d = survival_depth(u, p, steps)
        depths.append(d)
        w = {"iso": sorted(p.items()), "depth": d}
        if d < steps:
            w["reason"] = f"partial isomorphism {sorted(p.items())} fails in round {d + 1}"
            return False, w
        return True, None

    rep = run_instances("partial_homogeneity", k, partial_isomorphisms(u, k), solve, params={"steps": steps})
    rep.params["depth"] = min(depths) if depths else steps
    rep.notes.append("survival depth of back-and-forth rounds; full homogeneity is not claimed")
    return rep
