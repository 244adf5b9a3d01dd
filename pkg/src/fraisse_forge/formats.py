"""JSON formats for structures, maps, class descriptions, tables and terms.

Every ``emit_*`` output parses back to an equal object, and emitting the
parsed object reproduces the text byte for byte: relation tuples are
written sorted and keys in a fixed order.
"""

from __future__ import annotations

import json
from typing import Any

from .ages import MODES, AgeSpec
from .clones import OpTable
from .structures import Morphism, RelStructure, Signature, validate_structure


class ParseError(ValueError):
    """Malformed input; the message starts with the position (line/column or JSON path)."""


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def _loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno} column {e.colno}: {e.msg}") from None


def _need(cond: bool, path: str, msg: str):
    if not cond:
        raise ParseError(f"at {path}: {msg}")


def _int(v, path: str) -> int:
    _need(isinstance(v, int) and not isinstance(v, bool), path, "expected an integer")
    return v


def _obj(v, path: str, keys: set[str], optional: set[str] = frozenset()) -> dict:
    _need(isinstance(v, dict), path, "expected an object")
    extra = set(v) - keys - set(optional)
    _need(not extra, path, f"unknown keys {sorted(extra)}")
    missing = keys - set(v)
    _need(not missing, path, f"missing keys {sorted(missing)}")
    return v


# --------------------------------------------------------------------------
# structures and maps


def _signature_obj(sig: Signature) -> list:
    return [{"name": name, "arity": arity} for name, arity in sig.symbols]


def _signature_from_obj(sig, path: str) -> Signature:
    _need(isinstance(sig, list), path, "expected a list of {name, arity}")
    pairs = []
    for i, p in enumerate(sig):
        p = _obj(p, f"{path}[{i}]", {"name", "arity"})
        _need(isinstance(p["name"], str), f"{path}[{i}].name", "expected a string")
        pairs.append((p["name"], _int(p["arity"], f"{path}[{i}].arity")))
    try:
        return Signature(tuple(pairs))
    except ValueError as e:
        raise ParseError(f"at {path}: {e}") from None


def structure_to_obj(s: RelStructure) -> dict:
    return {
        "signature": _signature_obj(s.signature),
        "size": s.size,
        "relations": {name: sorted(list(t) for t in rel) for (name, _), rel in zip(s.signature.symbols, s.relations)},
    }


def structure_from_obj(v, path: str = "$") -> RelStructure:
    v = _obj(v, path, {"signature", "size", "relations"})
    signature = _signature_from_obj(v["signature"], f"{path}.signature")
    size = _int(v["size"], f"{path}.size")
    rels = v["relations"]
    _need(isinstance(rels, dict), f"{path}.relations", "expected an object")
    _need(set(rels) == set(signature.names), f"{path}.relations", "relation names differ from the signature")
    out = {}
    for name, arity in signature.symbols:
        ts = rels[name]
        _need(isinstance(ts, list), f"{path}.relations.{name}", "expected a list of tuples")
        for j, t in enumerate(ts):
            p = f"{path}.relations.{name}[{j}]"
            _need(isinstance(t, list) and len(t) == arity, p, f"expected a tuple of length {arity}")
            for x in t:
                _int(x, p)
        tuples = [tuple(t) for t in ts]
        _need(len(set(tuples)) == len(tuples), f"{path}.relations.{name}", "duplicate tuple")
        out[name] = tuples
    s = RelStructure.build(signature, size, out)
    ok = validate_structure(s)
    _need(bool(ok), path, ok.message)
    return s


def morphism_to_obj(m: Morphism) -> dict:
    return {"source": structure_to_obj(m.source), "target": structure_to_obj(m.target), "map": list(m.map), "kind": m.kind}


def morphism_from_obj(v, path: str = "$") -> Morphism:
    v = _obj(v, path, {"source", "target", "map", "kind"})
    src = structure_from_obj(v["source"], f"{path}.source")
    tgt = structure_from_obj(v["target"], f"{path}.target")
    _need(isinstance(v["map"], list), f"{path}.map", "expected a list")
    m = tuple(_int(x, f"{path}.map[{i}]") for i, x in enumerate(v["map"]))
    _need(v["kind"] in ("hom", "embedding", "iso"), f"{path}.kind", "unknown kind")
    try:
        return Morphism(src, tgt, m, v["kind"])
    except ValueError as e:
        raise ParseError(f"at {path}: {e}") from None


# --------------------------------------------------------------------------
# class descriptions


def spec_to_obj(spec: AgeSpec) -> dict:
    if spec.mode == "oracle":
        mode = {"oracle": spec.oracle}
    else:
        mode = {spec.mode: [structure_to_obj(p) for p in spec.patterns]}
    return {
        "signature": _signature_obj(spec.signature),
        "mode": mode,
        "flags": {"closed_under_free_amalgam": spec.closed_under_free_amalgam, "closed_under_products": spec.closed_under_products},
    }


def spec_from_obj(v, path: str = "$") -> AgeSpec:
    """Full form as emitted, or a short form ``{"oracle": name}``."""
    _need(isinstance(v, dict), path, "expected an object")
    if set(v) == {"oracle"}:
        try:
            return AgeSpec.from_oracle(v["oracle"])
        except ValueError as e:
            raise ParseError(f"at {path}.oracle: {e}") from None
    v = _obj(v, path, {"signature", "mode"}, {"flags"})
    sig = _signature_from_obj(v["signature"], f"{path}.signature")
    mode = v["mode"]
    _need(isinstance(mode, dict) and len(mode) == 1, f"{path}.mode", "expected one of {oracle}, {forbidden}, {catalogue}")
    ((name, body),) = mode.items()
    _need(name in MODES, f"{path}.mode", f"expected one of {list(MODES)}")
    oracle, pats = None, ()
    if name == "oracle":
        _need(isinstance(body, str), f"{path}.mode.oracle", "expected a name")
        oracle = body
    else:
        _need(isinstance(body, list), f"{path}.mode.{name}", "expected a list of structures")
        pats = tuple(structure_from_obj(p, f"{path}.mode.{name}[{i}]") for i, p in enumerate(body))
    flags = v.get("flags", {})
    _need(isinstance(flags, dict), f"{path}.flags", "expected an object")
    extra = set(flags) - {"closed_under_free_amalgam", "closed_under_products"}
    _need(not extra, f"{path}.flags", f"unknown keys {sorted(extra)}")
    for key, val in flags.items():
        _need(val is None or isinstance(val, bool), f"{path}.flags.{key}", "expected true, false or null")
    try:
        return AgeSpec(sig, name, pats, oracle, **flags)
    except ValueError as e:
        raise ParseError(f"at {path}: {e}") from None


# --------------------------------------------------------------------------
# tables and terms


def optable_to_obj(op: OpTable) -> dict:
    return {"q": op.q, "arity": op.arity, "table": list(op.table)}


def optable_from_obj(v, path: str = "$") -> OpTable:
    v = _obj(v, path, {"q", "arity", "table"})
    q, k = _int(v["q"], f"{path}.q"), _int(v["arity"], f"{path}.arity")
    _need(isinstance(v["table"], list), f"{path}.table", "expected a list")
    tab = [_int(x, f"{path}.table[{i}]") for i, x in enumerate(v["table"])]
    try:
        return OpTable(q, k, tuple(tab))
    except ValueError as e:
        raise ParseError(f"at {path}: {e}") from None


def term_to_obj(term: tuple) -> list:
    if term[0] == "apply":
        return ["apply"] + [term_to_obj(t) for t in term[1:]]
    return list(term)


def term_from_obj(v, path: str = "$") -> tuple:
    _need(isinstance(v, list) and v, path, "expected a non-empty array")
    tag = v[0]
    if tag == "proj":
        _need(len(v) == 3, path, "expected [\"proj\", n, i]")
        n, i = _int(v[1], f"{path}[1]"), _int(v[2], f"{path}[2]")
        _need(1 <= i <= n, path, "projection index out of range")
        return ("proj", n, i)
    if tag == "gen":
        _need(len(v) == 2 and isinstance(v[1], (str, int)) and not isinstance(v[1], bool), path, "expected [\"gen\", id]")
        return ("gen", v[1])
    if tag == "apply":
        _need(len(v) >= 3, path, "apply needs a head and at least one argument")
        return ("apply",) + tuple(term_from_obj(t, f"{path}[{j}]") for j, t in enumerate(v[1:], 1))
    raise ParseError(f"at {path}: unknown term node {tag!r}")


# --------------------------------------------------------------------------
# tagged values, used by certificates


def value_to_obj(v: Any):
    if isinstance(v, RelStructure):
        return {"$structure": structure_to_obj(v)}
    if isinstance(v, Morphism):
        return {"$morphism": morphism_to_obj(v)}
    if isinstance(v, OpTable):
        return {"$table": optable_to_obj(v)}
    if isinstance(v, tuple):
        return {"$tuple": [value_to_obj(x) for x in v]}
    if isinstance(v, list):
        return [value_to_obj(x) for x in v]
    if isinstance(v, dict):
        if not all(isinstance(k, str) and not k.startswith("$") for k in v):
            raise TypeError("only string keys not starting with '$' are serialisable")
        return {k: value_to_obj(x) for k, x in v.items()}
    if v is None or isinstance(v, (bool, int, str)):
        return v
    raise TypeError(f"cannot serialise {type(v).__name__}")


_TAGS = {
    "$structure": structure_from_obj,
    "$morphism": morphism_from_obj,
    "$table": optable_from_obj,
}


def value_from_obj(v, path: str = "$"):
    if isinstance(v, dict):
        if len(v) == 1:
            (key,) = v
            if key in _TAGS:
                return _TAGS[key](v[key], f"{path}.{key}")
            if key == "$tuple":
                _need(isinstance(v[key], list), f"{path}.$tuple", "expected a list")
                return tuple(value_from_obj(x, f"{path}.$tuple[{i}]") for i, x in enumerate(v[key]))
        _need(not any(k.startswith("$") for k in v), path, "unknown tag")
        return {k: value_from_obj(x, f"{path}.{k}") for k, x in v.items()}
    if isinstance(v, list):
        return [value_from_obj(x, f"{path}[{i}]") for i, x in enumerate(v)]
    return v


# --------------------------------------------------------------------------
# text entry points


def emit_structure(s: RelStructure) -> str:
    return _dumps(structure_to_obj(s))


def parse_structure(text: str) -> RelStructure:
    return structure_from_obj(_loads(text))


def emit_morphism(m: Morphism) -> str:
    return _dumps(morphism_to_obj(m))


def parse_morphism(text: str) -> Morphism:
    return morphism_from_obj(_loads(text))


def emit_spec(spec: AgeSpec) -> str:
    return _dumps(spec_to_obj(spec))


def parse_spec(text: str) -> AgeSpec:
    return spec_from_obj(_loads(text))


def emit_optable(op: OpTable) -> str:
    return _dumps(optable_to_obj(op))


def parse_optable(text: str) -> OpTable:
    return optable_from_obj(_loads(text))


def emit_term(term: tuple) -> str:
    return _dumps(term_to_obj(term))


def parse_term(text: str) -> tuple:
    return term_from_obj(_loads(text))


def emit_value(v) -> str:
    return _dumps(value_to_obj(v))


def parse_value(text: str):
    return value_from_obj(_loads(text))


def loads_json(text: str):
    """``json.loads`` with positioned ParseError."""
    return _loads(text)


def dumps_json(obj) -> str:
    return _dumps(obj)
