"""Self-contained certificates and their verifier.

A certificate records a claim, its parameters, the verdict, the bound and
full witnesses.  :func:`verify` re-derives the instance set from the
parameters and re-checks every witness with map-level checks
(``is_homomorphism`` / ``is_embedding`` and pointwise composition).  The
search code that produced the witnesses is only consulted to reproduce
failures, since a missing witness cannot be checked pointwise.
"""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field

from . import __version__
from .ages import FAILS, HOLDS, AgeSpec, check_instances, run_check, verify_witness
from .clones import OpTable, evaluate
from .comma import Scenario, extract_section, verify_universality
from .formats import (
    ParseError,
    dumps_json,
    loads_json,
    spec_from_obj,
    spec_to_obj,
    value_from_obj,
    value_to_obj,
)
from .limits import task_templates, verify_extension_property
from .structures import (
    Morphism,
    RelStructure,
    Verdict,
    induced_substructure,
    is_embedding,
    is_homomorphism,
    power,
)

KINDS = ("age", "extension", "universality", "section", "decomposition", "bracket")


@dataclass
class Certificate:
    kind: str
    claim: str
    params: dict
    verdict: str
    bound: int
    witnesses: list = field(default_factory=list)
    instances: int = 0
    tool_version: str = __version__

    def to_obj(self) -> dict:
        return {
            "kind": self.kind,
            "claim": self.claim,
            "params": value_to_obj(self.params),
            "verdict": self.verdict,
            "bound": self.bound,
            "instances": self.instances,
            "tool_version": self.tool_version,
            "witnesses": value_to_obj(self.witnesses),
        }

    @classmethod
    def from_obj(cls, v) -> "Certificate":
        keys = {"kind", "claim", "params", "verdict", "bound", "instances", "tool_version", "witnesses"}
        if not isinstance(v, dict) or set(v) != keys:
            raise ParseError(f"at $: certificate needs exactly the keys {sorted(keys)}")
        if v["kind"] not in KINDS:
            raise ParseError(f"at $.kind: unknown certificate kind {v['kind']!r}")
        return cls(
            v["kind"],
            v["claim"],
            value_from_obj(v["params"], "$.params"),
            v["verdict"],
            v["bound"],
            value_from_obj(v["witnesses"], "$.witnesses"),
            v["instances"],
            v["tool_version"],
        )

    def emit(self) -> str:
        return dumps_json(self.to_obj())

    @classmethod
    def parse(cls, text: str) -> "Certificate":
        return cls.from_obj(loads_json(text))


def _light(w: dict | None) -> dict | None:
    """Drop keys that are not part of a re-checkable witness."""
    if w is None:
        return None
    return {k: v for k, v in w.items() if k != "lastC"}


# --------------------------------------------------------------------------
# emitters


def age_certificate(report, spec: AgeSpec) -> Certificate:
    ws = report.witnesses if report.holds else [report.witness]
    params = {"spec": spec_to_obj(spec), "property": report.property}
    if "d" in report.params:
        params["d"] = report.params["d"]
    return Certificate("age", report.summary(), params, report.verdict, report.bound, [_light(w) for w in ws], report.instances)


def extension_certificate(report, spec: AgeSpec, u: RelStructure) -> Certificate:
    ws = report.witnesses if report.holds else [report.witness]
    return Certificate("extension", report.summary(), {"spec": spec_to_obj(spec), "U": u}, report.verdict, report.bound, ws, report.instances)


def universality_certificate(report, sc: Scenario, u_struct: RelStructure, u: tuple) -> Certificate:
    ws = report.witnesses if report.holds else [report.witness]
    params = {"spec": spec_to_obj(sc.spec), "T": sc.target, "U": u_struct, "u": tuple(u)}
    return Certificate("universality", report.summary(), params, report.verdict, report.bound, ws, report.instances)


def section_certificate(iota: Morphism | None, sc: Scenario, u_struct: RelStructure, u: tuple) -> Certificate:
    params = {"spec": spec_to_obj(sc.spec), "T": sc.target, "U": u_struct, "u": tuple(u)}
    if iota is None:
        return Certificate("section", "no section in the stage", params, FAILS, sc.target.size, [], 1)
    return Certificate("section", "u has a section", params, HOLDS, sc.target.size, [{"iota": iota}], 1)


def decomposition_certificate(sr, depth: int, items: list[tuple[OpTable, object]]) -> Certificate:
    """``items`` pairs each polymorphism with its :class:`clones.Decomposition`."""
    params = {"small": sr.small, "big": sr.big, "r": sr.r, "eps": sr.eps, "incl": sr.incl}
    ws = [{"f": f, "term": d.term, "endo": d.endo} for f, d in items]
    return Certificate("decomposition", f"{len(ws)} polymorphisms factor through eps_i", params, HOLDS, depth, ws, len(ws))


def bracket_certificate(gens: list[OpTable], q: int, k: int, target: str, depth: int | None, sizes: list[int]) -> Certificate:
    params = {"q": q, "k": k, "generators": list(gens), "target": target}
    verdict = HOLDS if depth is not None else FAILS
    w = [{"depth": depth, "sizes": list(sizes)}]
    claim = f"U^[{k},{depth}] contains the target" if depth is not None else "bracket sets stop short of the target"
    return Certificate("bracket", claim, params, verdict, len(sizes) - 1, w, len(sizes))


# --------------------------------------------------------------------------
# verification


def verify(cert: Certificate) -> Verdict:
    """Accept iff the certificate's claim re-checks from its own contents."""
    if cert.verdict not in (HOLDS, FAILS):
        return Verdict(False, f"unknown verdict {cert.verdict!r}")
    if not isinstance(cert.bound, int) or isinstance(cert.bound, bool) or cert.bound < 0:
        return Verdict(False, "bound must be a non-negative integer")
    try:
        return _VERIFIERS[cert.kind](cert)
    except (KeyError, TypeError, AttributeError, IndexError, ValueError) as exc:
        return Verdict(False, f"malformed certificate: {exc!r}")


def _spec(cert) -> AgeSpec:
    return spec_from_obj(cert.params["spec"])


def _square_key(w: dict) -> tuple:
    return (w["B1"], w["f1"].map, w["B2"], w["f2"].map)


def _instance_key(prop: str, inst) -> tuple:
    if prop == "amalg_ext":
        sq, t, h1, h2 = inst
        return (sq.b1, sq.s, sq.b2, sq.f2, t, tuple(h1), tuple(h2))
    return (inst.b1, inst.s, inst.b2, inst.f2)


def _witness_key(prop: str, w: dict) -> tuple:
    if prop == "amalg_ext":
        return _square_key(w) + (w["T"], w["h1"].map, w["h2"].map)
    return _square_key(w)


def _rerun_matches(cert, report) -> Verdict:
    if report.verdict != cert.verdict:
        return Verdict(False, f"re-run gives {report.verdict}, certificate says {cert.verdict}")
    if report.instances != cert.instances:
        return Verdict(False, f"re-run stops after {report.instances} instances, certificate says {cert.instances}")
    if len(cert.witnesses) != 1 or value_to_obj(_light(report.witness)) != value_to_obj(cert.witnesses[0]):
        return Verdict(False, "failing instance differs from the re-run", cert.witnesses[:1])
    return Verdict(True)


def _verify_age(cert) -> Verdict:
    spec, prop, n = _spec(cert), cert.params["property"], cert.bound
    if cert.verdict == FAILS:
        return _rerun_matches(cert, run_check(prop, spec, n, cert.params))
    insts = list(check_instances(prop, spec, n))
    if len(insts) != cert.instances:
        return Verdict(False, f"{len(insts)} instances at bound {n}, certificate says {cert.instances}")
    if prop == "hp":
        if cert.witnesses:
            return Verdict(False, "hereditary checks carry no witnesses")
        for b, sub in insts:
            if not spec.contains(induced_substructure(b, sub)[0]):
                return Verdict(False, f"substructure {sub} of {b!r} is not a member", (b, sub))
        return Verdict(True)
    if len(cert.witnesses) != len(insts):
        return Verdict(False, f"{len(cert.witnesses)} witnesses for {len(insts)} instances")
    for i, (inst, w) in enumerate(zip(insts, cert.witnesses)):
        if _instance_key(prop, inst) != _witness_key(prop, w):
            return Verdict(False, f"witness {i} answers a different instance", i)
        if prop == "strict_ap" and w.get("d") != cert.params.get("d"):
            return Verdict(False, f"witness {i} tested against a different bound", i)
        v = verify_witness(prop, w, spec)
        if not v:
            return Verdict(False, f"witness {i}: {v.message}", w)
    return Verdict(True)


def _brute_embeddings(a: RelStructure, b: RelStructure):
    for m in itertools.permutations(range(b.size), a.size):
        if is_embedding(a, b, m):
            yield m


def _keyed(cert, insts: list, key_of_witness) -> Verdict | dict:
    if len(insts) != cert.instances:
        return Verdict(False, f"{len(insts)} instances, certificate says {cert.instances}")
    if len(cert.witnesses) != len(insts):
        return Verdict(False, f"{len(cert.witnesses)} witnesses for {len(insts)} instances")
    by_key = {}
    for w in cert.witnesses:
        by_key.setdefault(key_of_witness(w), []).append(w)
    if sorted(by_key, key=repr) != sorted(set(insts), key=repr) or any(len(v) != 1 for v in by_key.values()):
        return Verdict(False, "witnesses do not match the instance set one to one")
    return by_key


def _verify_extension(cert) -> Verdict:
    spec, u, k = _spec(cert), cert.params["U"], cert.bound
    if cert.verdict == FAILS:
        return _rerun_matches(cert, verify_extension_property(u, spec, k))
    insts = []
    for b, s, _ in task_templates(spec, k):
        a, _inc = induced_substructure(b, s)
        insts.extend((b, s, m) for m in _brute_embeddings(a, u))
    got = _keyed(cert, insts, lambda w: (w["B"], w["f"].map, w["anchor"].map))
    if isinstance(got, Verdict):
        return got
    for (b, s, anchor), (w,) in got.items():
        a, inc = induced_substructure(b, s)
        if w["A"] != a or w["U"] != u or w["f"] != inc or w["anchor"].source != a or w["anchor"].target != u:
            return Verdict(False, f"witness for anchor {anchor} does not describe its instance", w)
        ext = w["ext"]
        if ext.source != b or ext.target != u or not is_embedding(b, u, ext.map):
            return Verdict(False, f"extension of {anchor} is not an embedding into the stage", w)
        if any(ext.map[s[i]] != anchor[i] for i in range(len(s))):
            return Verdict(False, f"extension does not restrict to the anchor {anchor}", w)
    return Verdict(True)


def _brute_autos(a: RelStructure) -> list[tuple]:
    return [m for m in itertools.permutations(range(a.size)) if is_embedding(a, a, m)]


def _scenario(cert) -> Scenario:
    return Scenario(_spec(cert), cert.params["T"], k=cert.bound)


def _verify_universality(cert) -> Verdict:
    from .ages import enumerate_members

    sc = _scenario(cert)
    u_struct, u = cert.params["U"], cert.params["u"]
    t = sc.target
    if len(u) != u_struct.size or not is_homomorphism(u_struct, t, u):
        return Verdict(False, "u is not a homomorphism from the stage into the target")
    if cert.verdict == FAILS:
        return _rerun_matches(cert, verify_universality((u_struct, u), sc, cert.bound))
    insts = []
    for a in enumerate_members(sc.spec, cert.bound):
        autos = _brute_autos(a)
        for h in itertools.product(range(t.size), repeat=a.size):
            if is_homomorphism(a, t, h) and all(tuple(h[s[x]] for x in range(a.size)) >= h for s in autos):
                insts.append((a, h))
    got = _keyed(cert, insts, lambda w: (w["A"], w["h"].map))
    if isinstance(got, Verdict):
        return got
    for (a, h), (w,) in got.items():
        iota = w["iota"]
        if w["h"].source != a or w["h"].target != t:
            return Verdict(False, "h does not run from A into the target", w)
        if iota.source != a or iota.target != u_struct or not is_embedding(a, u_struct, iota.map):
            return Verdict(False, "iota is not an embedding into the stage", w)
        if any(u[iota.map[x]] != h[x] for x in range(a.size)):
            return Verdict(False, f"u ∘ iota differs from {h}", w)
    return Verdict(True)


def _verify_section(cert) -> Verdict:
    sc = _scenario(cert)
    u_struct, u, t = cert.params["U"], cert.params["u"], sc.target
    if cert.bound != t.size or cert.instances != 1:
        return Verdict(False, "section certificates are bound to the target size")
    if len(u) != u_struct.size or not is_homomorphism(u_struct, t, u):
        return Verdict(False, "u is not a homomorphism from the stage into the target")
    if cert.verdict == FAILS:
        if cert.witnesses:
            return Verdict(False, "a failed section carries no witness")
        if extract_section((u_struct, u), sc) is not None:
            return Verdict(False, "a section exists after all")
        return Verdict(True)
    if len(cert.witnesses) != 1:
        return Verdict(False, "expected exactly one section")
    iota = cert.witnesses[0]["iota"]
    if iota.source != t or iota.target != u_struct or not is_embedding(t, u_struct, iota.map):
        return Verdict(False, "iota is not an embedding of the target into the stage")
    if any(u[iota.map[x]] != x for x in range(t.size)):
        return Verdict(False, "u ∘ iota is not the identity")
    return Verdict(True)


def _tracked_domain(n: int, eps: tuple, incl: tuple, depth: int) -> dict[tuple, int]:
    """``eps_depth`` on its tracked domain, recomputed from the two maps alone."""
    back = {z: x for x, z in enumerate(incl)}
    cur = {(a, b): eps[a * n + b] for a in range(n) for b in range(n)}
    for _ in range(depth - 1):
        cur = {xs + (y,): eps[back[z] * n + y] for xs, z in cur.items() if z in back for y in range(n)}
    return cur


def _verify_decomposition(cert) -> Verdict:
    p = cert.params
    small, big, r, eps, incl = p["small"], p["big"], p["r"], p["eps"], p["incl"]
    n = small.size
    if cert.verdict != HOLDS:
        return Verdict(False, "decomposition certificates only certify successes")
    for name, m, src, kind in (("r", r, big, "hom"), ("eps", eps, r.target, "embedding"), ("incl", incl, small, "embedding")):
        if m.source != src:
            return Verdict(False, f"{name} starts at the wrong structure")
        ok = is_homomorphism(m.source, m.target, m.map) if kind == "hom" else is_embedding(m.source, m.target, m.map)
        if not ok:
            return Verdict(False, f"{name} is not a {kind}")
    if eps.target != big or incl.target != big or r.target.size != n * n:
        return Verdict(False, "retraction legs do not fit together")
    for q in range(n * n):
        if r.map[eps.map[q]] != q:
            return Verdict(False, f"r ∘ eps moves {divmod(q, n)}")
    if len(cert.witnesses) != cert.instances:
        return Verdict(False, f"{len(cert.witnesses)} witnesses, certificate says {cert.instances}")
    if max(w["f"].arity for w in cert.witnesses) - 1 != cert.bound:
        return Verdict(False, "bound is not the deepest arity certified")
    eps_gen = {(incl.map[a], incl.map[b]): eps.map[a * n + b] for a in range(n) for b in range(n)}
    for i, w in enumerate(cert.witnesses):
        f, endo, term = w["f"], w["endo"], w["term"]
        if f.q != n or f.arity - 1 > cert.bound or f.arity < 2:
            return Verdict(False, f"witness {i}: arity outside the certified depth")
        if not is_homomorphism(power(small, f.arity), small, f.table):
            return Verdict(False, f"witness {i}: f is not a polymorphism")
        if endo.source != big or endo.target != big or not is_homomorphism(big, big, endo.map):
            return Verdict(False, f"witness {i}: endo is not an endomorphism of the big stage")
        gens = {"eps": lambda a, b: eps_gen.get((a, b)), "endo": lambda z, e=endo.map: e[z]}
        dom = _tracked_domain(n, eps.map, incl.map, f.arity - 1)
        if not dom:
            return Verdict(False, f"witness {i}: empty tracked domain")
        for xs in dom:
            if evaluate(term, gens, tuple(incl.map[x] for x in xs)) != incl.map[f(*xs)]:
                return Verdict(False, f"witness {i}: term differs from f at {xs}", w)
    return Verdict(True)


def _plain_levels(q: int, k: int, gens: list[OpTable], target: frozenset, max_depth: int) -> tuple[list[int], int | None]:
    """Bracket-set sizes by plain set iteration, independent of the numpy code."""
    idx = list(itertools.product(range(q), repeat=k))
    level = {tuple(x[i] for x in idx) for i in range(k)}
    sizes = [len(level)]
    for depth in range(max_depth + 1):
        if target <= level:
            return sizes, depth
        new = set(level)
        for f in gens:
            for args in itertools.product(sorted(level), repeat=f.arity):
                new.add(tuple(f(*(a[j] for a in args)) for j in range(len(idx))))
        if new == level:
            return sizes, None
        level = new
        sizes.append(len(level))
    return sizes, None


def _verify_bracket(cert) -> Verdict:
    p = cert.params
    q, k, gens = p["q"], p["k"], p["generators"]
    if p["target"] != "all":
        return Verdict(False, "only the full k-ary target is certified")
    target = frozenset(itertools.product(range(q), repeat=q ** k))
    w = cert.witnesses
    if len(w) != 1:
        return Verdict(False, "expected one witness")
    sizes, depth = _plain_levels(q, k, gens, target, cert.bound)
    if depth is not None:
        sizes = sizes[: depth + 1]
    if w[0]["sizes"] != sizes or w[0]["depth"] != depth:
        return Verdict(False, f"recomputed depth {depth} with sizes {sizes}")
    if (depth is not None) != (cert.verdict == HOLDS) or cert.bound != len(sizes) - 1 or cert.instances != len(sizes):
        return Verdict(False, "verdict or bound disagrees with the recomputation")
    return Verdict(True)


_VERIFIERS = {
    "age": _verify_age,
    "extension": _verify_extension,
    "universality": _verify_universality,
    "section": _verify_section,
    "decomposition": _verify_decomposition,
    "bracket": _verify_bracket,
}


# --------------------------------------------------------------------------
# tampering, for testing the verifier


_PROPERTY_SWAP = {"hp": "jep", "jep": "ap", "ap": "amalg_ext", "strict_ap": "hap", "hap": "jep", "amalg_ext": "ap"}


def _first(obj, pred, path=()):
    """Path to the first node (depth-first, keys in order) satisfying ``pred``."""
    if pred(obj):
        return path
    if isinstance(obj, dict):
        for k, v in obj.items():
            hit = _first(v, pred, path + (k,))
            if hit is not None:
                return hit
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            hit = _first(v, pred, path + (i,))
            if hit is not None:
                return hit
    return None


def _get(obj, path):
    for p in path:
        obj = obj[p]
    return obj


def _structure_obj(v):
    """The raw structure object behind ``v``, tagged or nested in a morphism."""
    if isinstance(v, dict) and "$structure" in v:
        return v["$structure"]
    if isinstance(v, dict) and set(v) == {"signature", "size", "relations"}:
        return v
    return None


def _has_tuple(v) -> bool:
    s = _structure_obj(v)
    return s is not None and any(s["relations"].values())


def _has_map(v) -> bool:
    if not (isinstance(v, dict) and "$morphism" in v):
        return False
    return len(set(v["$morphism"]["map"])) >= 2


def _has_table(v) -> bool:
    return isinstance(v, dict) and "$table" in v and v["$table"]["q"] >= 2


def _tamper_params(obj: dict) -> bool:
    p = obj["params"]
    if obj["kind"] == "age":
        p["property"] = _PROPERTY_SWAP[p["property"]]
        return True
    if obj["kind"] in ("universality", "section"):
        u = p["u"]["$tuple"]
        ws = obj["witnesses"]
        pos = ws[0]["iota"]["$morphism"]["map"][0] if ws and "iota" in ws[0] and ws[0]["iota"]["$morphism"]["map"] else 0
        t_size = p["T"]["$structure"]["size"]
        if not u or t_size < 2:
            return False
        u[pos] = (u[pos] + 1) % t_size
        return True
    if obj["kind"] == "extension":
        rels = p["U"]["$structure"]["relations"]
        for ts in rels.values():
            if ts:
                ts.pop(0)
                return True
        return False
    if obj["kind"] == "decomposition":
        m = p["eps"]["$morphism"]["map"]
        m[0] = (m[0] + 1) % p["eps"]["$morphism"]["target"]["size"]
        return True
    if obj["kind"] == "bracket":
        p["k"] += 1
        return True
    return False


def mutations(cert: Certificate) -> dict[str, str]:
    """Single-field tamperings of an emitted certificate, by name; inapplicable ones are left out."""
    base = cert.to_obj()
    out: dict[str, str] = {}

    def add(name, fn):
        obj = copy.deepcopy(base)
        if fn(obj) is not False:
            out[name] = dumps_json(obj)

    def flip(o):
        o["verdict"] = FAILS if o["verdict"] == HOLDS else HOLDS

    def bump(o):
        # a failure certified at n usually also fails above n, so move down
        o["bound"] += 1 if o["verdict"] == HOLDS or o["bound"] == 0 else -1

    def delete_tuple(o):
        path = _first(o["witnesses"], _has_tuple)
        if path is None:
            return False
        rels = _structure_obj(_get(o["witnesses"], path))["relations"]
        next(ts for ts in rels.values() if ts).pop(0)

    def perturb(o):
        path = _first(o["witnesses"], _has_map)
        if path is not None:
            m = _get(o["witnesses"], path)["$morphism"]["map"]
            m[0] = next(x for x in m if x != m[0])
            return None
        path = _first(o["witnesses"], _has_table)
        if path is not None:
            t = _get(o["witnesses"], path)["$table"]
            t["table"][0] = (t["table"][0] + 1) % t["q"]
            return None
        path = _first(o["witnesses"], lambda v: isinstance(v, dict) and isinstance(v.get("sizes"), list) and v["sizes"])
        if path is None:
            return False
        _get(o["witnesses"], path)["sizes"][-1] += 1

    def drop(o):
        if not o["witnesses"]:
            return False
        o["witnesses"].pop(0)

    add("flip_verdict", flip)
    add("change_bound", bump)
    add("change_params", _tamper_params)
    add("delete_witness_tuple", delete_tuple)
    add("perturb_map_entry", perturb)
    add("drop_witness", drop)
    return out


def verify_text(text: str) -> Verdict:
    """Parse and verify; parse failures count as rejection."""
    try:
        cert = Certificate.parse(text)
    except ParseError as e:
        return Verdict(False, f"parse error: {e}")
    return verify(cert)
