"""Command-line front end.

Exit codes: 0 every claimed verdict verified, 1 a verification failed,
2 an input did not parse, 3 a cap or budget ran out (artifacts written so
far are flagged ``partial`` in the manifest and carry no certificate).
"""

from __future__ import annotations

import argparse
import json
import os
import random
import re
import sys
import tempfile
from pathlib import Path

from . import __version__
from .ages import CHECKS, AgeSpec, run_check
from .certificates import (
    Certificate,
    age_certificate,
    bracket_certificate,
    decomposition_certificate,
    extension_certificate,
    section_certificate,
    universality_certificate,
    verify,
    verify_text,
)
from .clones import (
    CloneFragment,
    OpTable,
    all_tables,
    bracket,
    build_eps_chain,
    cayley_depth,
    decompose_polymorphism,
    first_polymorphisms,
    staged_retraction,
)
from .comma import NoCommaAmalgam, Scenario, build_universal_hom, extract_section, verify_universality
from .config import CapExceeded, Caps
from .formats import ParseError, dumps_json, loads_json, optable_from_obj, spec_from_obj, structure_from_obj, structure_to_obj
from .limits import AmalgamationError, saturate_limit, verify_extension_property
from .structures import RelStructure, chain, complete_graph, digraph

OK, VERIFY_FAILED, PARSE_ERROR, CAP_EXHAUSTED = 0, 1, 2, 3


class UsageError(ValueError):
    """Bad flag values; reported like a parse error."""


# --------------------------------------------------------------------------
# inputs


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"{path}: {e.strerror}") from None
    try:
        return loads_json(text)
    except ParseError as e:
        raise ParseError(f"{path}: {e}") from None


def load_spec(arg: str) -> AgeSpec:
    """A class description file, or the bare name of a built-in oracle."""
    if not os.path.exists(arg) and re.fullmatch(r"[a-z_]+", arg):
        return spec_from_obj({"oracle": arg})
    return spec_from_obj(_read_json(arg))


def load_target(arg: str) -> RelStructure:
    """A structure file, or ``K<n>``, ``chain<n>`` (symbol lt) or ``tournament<n>`` (transitive, symbol E)."""
    if not os.path.exists(arg):
        m = re.fullmatch(r"(K|chain|tournament)(\d+)", arg)
        if m:
            n = int(m.group(2))
            if m.group(1) == "K":
                return complete_graph(n)
            if m.group(1) == "chain":
                return chain(n)
            return digraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    return structure_from_obj(_read_json(arg))


def load_generators(arg: str, q: int) -> list[OpTable]:
    """``binary`` / ``ternary`` for every table of that arity, or a JSON file listing tables."""
    named = {"unary": 1, "binary": 2, "ternary": 3}
    if arg in named:
        return sorted(all_tables(q, named[arg]), key=lambda o: o.table)
    v = _read_json(arg)
    if not isinstance(v, list):
        raise ParseError(f"{arg}: at $: expected a list of tables")
    return [optable_from_obj(x, f"$[{i}]") for i, x in enumerate(v)]


def _default(v: int | None, d: int) -> int:
    return d if v is None else v


def _positive(name: str, v: int | None) -> None:
    if v is not None and v <= 0:
        raise UsageError(f"--{name} must be positive")


# --------------------------------------------------------------------------
# outputs


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Output:
    """Collects artifacts; certificates are verified before they are written."""

    def __init__(self, out: str | None, command: str, args: dict):
        self.dir = Path(out) if out else None
        self.manifest = {"command": command, "tool_version": __version__, "args": args, "partial": False, "artifacts": [], "verdicts": {}}
        self.ok = True

    def put(self, name: str, text: str) -> None:
        if self.dir is not None:
            write_atomic(self.dir / name, text)
        self.manifest["artifacts"].append(name)

    def certificate(self, name: str, cert: Certificate) -> bool:
        v = verify(cert)
        self.manifest["verdicts"][name] = {"claim": cert.claim, "verdict": cert.verdict, "verified": bool(v)}
        print(f"{name}: {cert.claim} [{'verified' if v else 'NOT verified: ' + v.message}]")
        if not v:
            self.ok = False
            return False
        self.put(f"{name}.cert.json", cert.emit())
        return True

    def finish(self, partial: bool = False, note: str | None = None) -> None:
        self.manifest["partial"] = partial
        if note:
            self.manifest["note"] = note
        if self.dir is not None:
            write_atomic(self.dir / "manifest.json", json.dumps(self.manifest, indent=1, sort_keys=True))


def _stage_files(output: Output, res) -> None:
    for st in res.stages:
        obj = {"index": st.index, "structure": structure_to_obj(st.structure), "link": list(st.link.map) if st.link is not None else None}
        if st.u is not None:
            obj["u"] = list(st.u)
        output.put(f"stage_{st.index:03d}.json", dumps_json(obj))
    output.manifest["stages"] = len(res.stages)
    output.manifest["final_size"] = res.final.size
    output.manifest["exhausted"] = res.exhausted
    output.manifest["open_tasks"] = len(res.open_tasks)
    output.manifest["audit"] = res.audit


# --------------------------------------------------------------------------
# subcommands


def cmd_check_age(a) -> int:
    spec, caps = load_spec(a.spec), Caps.from_pairs(a.caps)
    n = a.k if a.k is not None else 3
    _positive("k", n)
    props = a.properties.split(",") if a.properties else list(CHECKS)
    for p in props:
        if p not in CHECKS:
            raise UsageError(f"unknown property {p!r}; known: {sorted(CHECKS)}")
    out = Output(a.out, "check-age", {"spec": a.spec, "n": n, "properties": props})
    for p in props:
        params = {"d": a.d} if (p == "strict_ap" and a.d) else None
        report = run_check(p, spec, n, params, caps)
        out.certificate(p, age_certificate(report, spec))
    out.finish()
    return OK if out.ok else VERIFY_FAILED


def cmd_build_limit(a) -> int:
    spec, caps = load_spec(a.spec), Caps.from_pairs(a.caps)
    k, budget = _default(a.k, 2), _default(a.budget, 100)
    _positive("k", k), _positive("budget", budget)
    out = Output(a.out, "build-limit", {"spec": a.spec, "k": k, "budget": budget})
    res = saturate_limit(spec, k, budget, caps)
    _stage_files(out, res)
    if res.exhausted:
        print(f"budget {budget} exhausted with {len(res.open_tasks)} open tasks; stages written, no certificate")
        out.finish(partial=True, note="budget exhausted")
        return CAP_EXHAUSTED
    print(f"converged after {len(res.stages)} stages, final size {res.final.size}")
    out.certificate("extension", extension_certificate(verify_extension_property(res.final, spec, k, caps), spec, res.final))
    out.finish()
    return OK if out.ok else VERIFY_FAILED


def cmd_build_universal_hom(a) -> int:
    spec, caps = load_spec(a.spec), Caps.from_pairs(a.caps)
    if not a.target:
        raise UsageError("--target is required")
    target = load_target(a.target)
    k, budget = _default(a.k, 3), _default(a.budget, 150)
    _positive("k", k), _positive("budget", budget)
    try:
        sc = Scenario(spec, target, k=k, budget=budget, caps=caps)
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = Output(a.out, "build-universal-hom", {"spec": a.spec, "target": a.target, "k": k, "budget": budget})
    res = build_universal_hom(sc)
    _stage_files(out, res)
    print(f"{len(res.stages)} stages, final size {res.final.size}, open tasks {len(res.open_tasks)}")
    out.certificate("universality", universality_certificate(verify_universality(res, sc, k), sc, res.final, res.u))
    if sc.target_in_closure():
        out.certificate("section", section_certificate(extract_section(res, sc), sc, res.final, res.u))
    out.finish(partial=res.exhausted, note="budget exhausted before saturation; certificates cover the final stage" if res.exhausted else None)
    return OK if out.ok else VERIFY_FAILED


def cmd_verify(a) -> int:
    worst = OK
    for path in a.files:
        try:
            text = Path(path).read_text()
        except OSError as e:
            print(f"{path}: {e.strerror}")
            worst = max(worst, PARSE_ERROR)
            continue
        try:
            Certificate.parse(text)
        except ParseError as e:
            print(f"{path}: parse error: {e}")
            worst = max(worst, PARSE_ERROR)
            continue
        v = verify_text(text)
        if v:
            print(f"{path}: verified")
        else:
            detail = f"\n  witness: {v.witness!r}" if v.witness is not None else ""
            print(f"{path}: REJECTED: {v.message}{detail}")
            worst = max(worst, VERIFY_FAILED)
    return worst


def cmd_clone_decompose(a) -> int:
    caps = Caps.from_pairs(a.caps)
    depth, count = a.depth, a.count
    _positive("depth", depth), _positive("count", count)
    out = Output(a.out, "clone-decompose", {"depth": depth, "count": count, "seed": a.seed})
    sr = staged_retraction(caps=caps)
    levels = build_eps_chain(sr, depth)
    pool = first_polymorphisms(sr.small, 2, max(count, a.pool), caps)
    fs = random.Random(a.seed).sample(pool, min(count, len(pool)))
    items = [(f, decompose_polymorphism(f, sr, levels)) for f in fs]
    print(f"stages {sr.small.size} -> {sr.big.size}; chain domains {[len(lv.eps) for lv in levels]}")
    out.certificate("decomposition", decomposition_certificate(sr, max(f.arity for f in fs) - 1, items))
    out.finish()
    return OK if out.ok else VERIFY_FAILED


def cmd_bracket_closure(a) -> int:
    caps = Caps.from_pairs(a.caps)
    q, k = a.q, _default(a.k, 3)
    _positive("q", q), _positive("k", k)
    gens = load_generators(a.generators, q)
    out = Output(a.out, "bracket-closure", {"q": q, "k": k, "generators": a.generators})
    u = CloneFragment(q, frozenset(gens))
    depth = cayley_depth(u, k, all_tables(q, k), caps)
    last = depth if depth is not None else next(i for i in range(caps.depth + 1) if bracket(u, k, i + 1, caps) == bracket(u, k, i, caps))
    sizes = [len(bracket(u, k, i, caps)) for i in range(last + 1)]
    print(f"depth {depth}; level sizes {sizes}")
    out.certificate("bracket", bracket_certificate(gens, q, k, "all", depth, sizes))
    out.finish()
    return OK if out.ok else VERIFY_FAILED


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fraisse-forge", description="Bounded amalgamation checks, finite limit stages and clone experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec=True):
        if spec:
            sp.add_argument("--spec", required=True, help="class description file or built-in oracle name")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--caps", nargs="*", default=[], metavar="KEY=VAL")

    sp = sub.add_parser("check-age", help="run the bounded age checks and emit certificates")
    common(sp)
    sp.add_argument("--k", type=int, help="size bound n (default 3)")
    sp.add_argument("--properties", help="comma-separated subset of " + ",".join(CHECKS))
    sp.add_argument("--d", type=int, help="test-structure bound for strict_ap")
    sp.set_defaults(fn=cmd_check_age)

    sp = sub.add_parser("build-limit", help="saturate finite stages of the limit")
    common(sp)
    sp.add_argument("--k", type=int)
    sp.add_argument("--budget", type=int)
    sp.set_defaults(fn=cmd_build_limit)

    sp = sub.add_parser("build-universal-hom", help="stages of a universal map into a target")
    common(sp)
    sp.add_argument("--target", help="structure file, K<n>, chain<n> or tournament<n>")
    sp.add_argument("--k", type=int)
    sp.add_argument("--budget", type=int)
    sp.set_defaults(fn=cmd_build_universal_hom)

    sp = sub.add_parser("verify", help="re-check certificates")
    sp.add_argument("files", nargs="+")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("clone-decompose", help="factor polymorphisms of a stage through the eps chain")
    common(sp, spec=False)
    sp.add_argument("--depth", type=int, default=2)
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--pool", type=int, default=40, help="polymorphisms searched before sampling")
    sp.set_defaults(fn=cmd_clone_decompose)

    sp = sub.add_parser("bracket-closure", help="bracket depth at which generators reach every k-ary table")
    common(sp, spec=False)
    sp.add_argument("--q", type=int, default=2)
    sp.add_argument("--k", type=int)
    sp.add_argument("--generators", default="binary", help="unary, binary, ternary or a JSON file listing tables")
    sp.set_defaults(fn=cmd_bracket_closure)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return PARSE_ERROR
    except ValueError as e:
        if "cap" in str(e):
            print(f"error: {e}", file=sys.stderr)
            return PARSE_ERROR
        raise
    except (CapExceeded, NoCommaAmalgam, AmalgamationError) as e:
        print(f"stopped: {e}", file=sys.stderr)
        if getattr(args, "out", None):
            write_atomic(Path(args.out) / "manifest.json", json.dumps({"command": args.command, "partial": True, "note": str(e)}, indent=1))
        return CAP_EXHAUSTED if isinstance(e, CapExceeded) else VERIFY_FAILED


if __name__ == "__main__":
    sys.exit(main())
