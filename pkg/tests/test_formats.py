import json

import pytest
from hypothesis import given, strategies as st

from conftest import binary_structures
from fraisse_forge.ages import AgeSpec, chains, graphs, posets
from fraisse_forge.clones import OpTable
from fraisse_forge.formats import (
    ParseError,
    emit_morphism,
    emit_optable,
    emit_spec,
    emit_structure,
    emit_term,
    emit_value,
    parse_morphism,
    parse_optable,
    parse_spec,
    parse_structure,
    parse_term,
    parse_value,
)
from fraisse_forge.search import find_homomorphism
from fraisse_forge.structures import BINARY, Morphism, RelStructure, Signature, complete_graph

K3 = complete_graph(3)


def _terms(depth=2):
    leaf = st.one_of(
        st.integers(1, 3).flatmap(lambda n: st.tuples(st.just("proj"), st.just(n), st.integers(1, n))),
        st.tuples(st.just("gen"), st.sampled_from(["eps", "endo", "f"])),
    )
    return st.recursive(leaf, lambda kids: st.tuples(st.just("apply"), kids, kids).map(tuple) | st.tuples(st.just("apply"), kids, kids, kids), max_leaves=6)


class TestStructures:
    def test_k3(self):
        text = emit_structure(K3)
        assert text == '{"signature":[{"name":"E","arity":2}],"size":3,"relations":{"E":[[0,1],[0,2],[1,0],[1,2],[2,0],[2,1]]}}'
        assert parse_structure(text) == K3

    @given(binary_structures(max_size=5))
    def test_round_trip(self, s):
        text = emit_structure(s)
        assert parse_structure(text) == s and emit_structure(parse_structure(text)) == text

    def test_multi_symbol(self):
        sig = Signature.of(R=3, P=1)
        s = RelStructure.build(sig, 3, {"R": [(0, 1, 2), (2, 2, 2)], "P": [(1,)]})
        assert parse_structure(emit_structure(s)) == s

    def test_malformed_json_has_position(self):
        with pytest.raises(ParseError, match=r"line 1 column \d+"):
            parse_structure('{"signature": [')

    @pytest.mark.parametrize(
        "obj, where",
        [
            ({"signature": [{"name": "E", "arity": 2}], "size": 2, "relations": {"E": [[0, 5]]}}, "entry 5"),
            ({"signature": [{"name": "E", "arity": 2}], "size": 2, "relations": {"E": [[0, 1, 1]]}}, r"\$\.relations\.E\[0\]"),
            ({"signature": [{"name": "E", "arity": 2}], "size": 2, "relations": {"E": [[0, 1], [0, 1]]}}, "duplicate"),
            ({"signature": [{"name": "E", "arity": 2}], "size": 2, "relations": {}}, "relation names"),
            ({"signature": [{"name": "E", "arity": 2}], "size": "2", "relations": {"E": []}}, r"\$\.size"),
            ({"signature": [["E", 2]], "size": 0, "relations": {"E": []}}, r"\$\.signature\[0\]"),
        ],
    )
    def test_schema_errors(self, obj, where):
        with pytest.raises(ParseError, match=where):
            parse_structure(json.dumps(obj))


class TestOtherFormats:
    def test_morphism(self):
        m = find_homomorphism(complete_graph(2), K3)
        assert parse_morphism(emit_morphism(m)) == m

    def test_morphism_kind_checked(self):
        m = Morphism(K3, K3, (0, 1, 2), "iso")
        text = emit_morphism(m).replace('"iso"', '"bogus"')
        with pytest.raises(ParseError, match="kind"):
            parse_morphism(text)

    @pytest.mark.parametrize("spec", [graphs(), posets(), chains(), AgeSpec.forbidding(BINARY, [K3], closed_under_free_amalgam=True), AgeSpec.catalogue_of([K3])], ids=lambda s: s.name)
    def test_spec(self, spec):
        text = emit_spec(spec)
        assert parse_spec(text) == spec and emit_spec(parse_spec(text)) == text

    def test_spec_short_form(self):
        assert parse_spec('{"oracle":"graphs"}') == graphs()

    def test_spec_rejects_unknown_keys(self):
        with pytest.raises(ParseError, match="unknown keys"):
            parse_spec('{"signature":[{"name":"E","arity":2}],"mode":{"oracle":"graphs"},"colour":1}')

    def test_spec_rejects_unknown_oracle(self):
        with pytest.raises(ParseError, match="unknown oracle"):
            parse_spec('{"oracle":"lattices"}')

    @given(st.integers(2, 3), st.integers(1, 2), st.data())
    def test_optable(self, q, k, data):
        op = OpTable(q, k, tuple(data.draw(st.lists(st.integers(0, q - 1), min_size=q ** k, max_size=q ** k))))
        text = emit_optable(op)
        assert parse_optable(text) == op and emit_optable(parse_optable(text)) == text

    def test_optable_rejects_out_of_range(self):
        with pytest.raises(ParseError):
            parse_optable('{"q":2,"arity":1,"table":[0,2]}')

    @given(_terms())
    def test_term(self, term):
        text = emit_term(term)
        assert parse_term(text) == term and emit_term(parse_term(text)) == text

    def test_term_shape(self):
        assert emit_term(("apply", ("gen", "eps"), ("proj", 2, 1), ("proj", 2, 2))) == '["apply",["gen","eps"],["proj",2,1],["proj",2,2]]'
        with pytest.raises(ParseError, match="projection index"):
            parse_term('["proj",2,3]')

    @given(binary_structures(max_size=3), st.lists(st.integers(0, 9), max_size=3).map(tuple))
    def test_tagged_values(self, s, tup):
        v = {"s": s, "t": tup, "l": [s, None, True, "x"], "m": Morphism.identity(s)}
        text = emit_value(v)
        assert parse_value(text) == v and emit_value(parse_value(text)) == text

    def test_tagged_value_rejects_dollar_keys(self):
        with pytest.raises(TypeError):
            emit_value({"$x": 1})
        with pytest.raises(ParseError, match="unknown tag"):
            parse_value('{"$x":1,"y":2}')
