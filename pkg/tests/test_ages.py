import itertools

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import binary_structures
from fraisse_forge.ages import (
    CHECKS,
    FAILS,
    HOLDS,
    AgeSpec,
    chains,
    check_all,
    check_amalg_ext,
    check_ap,
    check_hap,
    check_hp,
    check_jep,
    check_strict_ap,
    dags,
    digraphs,
    enumerate_members,
    graphs,
    matchings,
    matchings_catalogue,
    posets,
    reverify,
    run_check,
    triangle_free,
)
from fraisse_forge.structures import BINARY, RelStructure, Signature, complete_graph, graph

K1, K2, K3 = complete_graph(1), complete_graph(2), complete_graph(3)
SMALL_CATALOGUE = AgeSpec.catalogue_of([graph(0), graph(1), K2, graph(2)])


# independent membership predicates
def _irreflexive(r):
    return all(x != y for x, y in r)


def _transitive(r):
    return all((x, z) in r for x, y in r for y2, z in r if y == y2)


def _has_cycle(n, r):
    for k in range(1, n + 1):
        for cyc in itertools.permutations(range(n), k):
            if all(q in r for q in zip(cyc, cyc[1:] + cyc[:1])):
                return True
    return False


PREDICATES = {
    "graphs": lambda n, r: _irreflexive(r) and all((y, x) in r for x, y in r),
    "triangle_free": lambda n, r: PREDICATES["graphs"](n, r) and not any(
        {(a, b), (b, c), (a, c)} <= r for a, b, c in itertools.combinations(range(n), 3)),
    "matchings": lambda n, r: PREDICATES["graphs"](n, r) and all(sum((x, y) in r for y in range(n)) <= 1 for x in range(n)),
    "posets": lambda n, r: _irreflexive(r) and _transitive(r),
    "chains": lambda n, r: _irreflexive(r) and _transitive(r) and all((x, y) in r or (y, x) in r for x, y in itertools.combinations(range(n), 2)),
    "digraphs": lambda n, r: _irreflexive(r),
    "dags": lambda n, r: not _has_cycle(n, r),
}


class TestMembership:
    @pytest.mark.parametrize("name", sorted(PREDICATES))
    def test_oracle_matches_predicate(self, name):
        spec = AgeSpec.from_oracle(name)
        sig = spec.signature
        for n in range(4):
            for _, _, rels in oracles.all_binary_structures(n, BINARY):
                s = RelStructure.build(sig, n, {sig.names[0]: rels["E"]})
                assert spec.contains(s) == PREDICATES[name](n, set(rels["E"])), (name, s)

    @given(binary_structures(), st.data())
    def test_iso_invariant(self, s, data):
        perm = data.draw(st.permutations(range(s.size)))
        for spec in (graphs(), digraphs(), dags(), AgeSpec.forbidding(BINARY, [K2])):
            assert spec.contains(s) == spec.contains(s.relabel(perm))

    def test_forbidden_mode(self):
        spec = AgeSpec.forbidding(BINARY, [K3])
        assert spec.contains(graph(4, [(0, 1), (1, 0)]))
        assert not spec.contains(complete_graph(4))

    def test_signature_checked(self):
        with pytest.raises(ValueError):
            AgeSpec(Signature.of(lt=2), "oracle", (), "graphs")


class TestEnumerate:
    def test_graph_classes(self):
        # 1 + 1 + 2 + 4; the brute-force count below is the oracle
        members = enumerate_members(graphs(), 3)
        assert len(members) == 8
        labelled = (RelStructure.build(BINARY, n, r) for n in range(4) for _, _, r in oracles.all_binary_structures(n, BINARY))
        every = [s for s in labelled if graphs().contains(s)]
        assert oracles.count_iso_classes(every) == 8

    def test_chain_classes(self):
        assert [m.size for m in enumerate_members(chains(), 2)] == [0, 1, 2]

    def test_triangle_free_drops_k3(self):
        three = [m for m in enumerate_members(triangle_free(), 3) if m.size == 3]
        assert len(three) == 3 and all(len(m["E"]) < 6 for m in three)


class TestHereditaryJoint:
    def test_graphs(self):
        assert check_hp(graphs(), 3).holds and check_jep(graphs(), 3).holds

    def test_catalogue_of_triangle(self):
        r = check_hp(AgeSpec.catalogue_of([K3]), 3)
        assert r.verdict == FAILS and r.witness["sub"] == K2

    def test_chains_jep_at_4(self):
        assert check_jep(chains(), 4).holds

    @settings(max_examples=8)
    @given(st.lists(binary_structures(max_size=2, min_size=1), min_size=1, max_size=2))
    def test_forbidden_classes_are_hereditary(self, pats):
        assert check_hp(AgeSpec.forbidding(BINARY, pats), 3).holds


class TestAmalgamation:
    def test_graphs_ap_uses_free_amalgams(self):
        r = check_ap(graphs(), 3)
        assert r.holds and r.instances == 189
        for w in r.witnesses[:40]:
            assert w["C"].size == w["B1"].size + w["B2"].size - w["A"].size
            assert len(w["C"]["E"]) == len(w["B1"]["E"]) + len(w["B2"]["E"]) - len(w["A"]["E"])

    def test_chains_ap(self):
        assert check_ap(chains(), 3).holds

    def test_small_catalogue_fails(self):
        r = check_ap(SMALL_CATALOGUE, 2)
        assert r.verdict == FAILS
        assert {r.witness["B1"].size, r.witness["B2"].size} == {2}

    def test_strict(self):
        assert check_strict_ap(graphs(), 3).holds
        r = check_strict_ap(chains(), 3)
        assert r.verdict == FAILS and r.params["d"] == 3
        assert check_strict_ap(posets(), 2).holds

    def test_hap(self):
        assert check_hap(graphs(), 3).holds
        assert check_hap(posets(), 3).holds
        r = check_hap(matchings_catalogue(3), 3)
        assert r.verdict == FAILS

    def test_hap_degree_one_oracle_holds(self):
        # without the size truncation of the catalogue the class does have HAP
        assert check_hap(matchings(), 3).holds

    def test_amalg_ext(self):
        assert check_amalg_ext(chains(), 3).holds
        assert check_amalg_ext(graphs(), 2).holds
        assert check_amalg_ext(matchings_catalogue(3), 3).verdict == FAILS

    def test_empty_signature_side(self):
        assert check_ap(AgeSpec.catalogue_of([], signature=BINARY), 2).holds


class TestReports:
    @pytest.mark.parametrize("spec", [graphs(), chains(), SMALL_CATALOGUE], ids=lambda s: s.name)
    def test_every_witness_reverifies(self, spec):
        for prop, rep in check_all(spec, 2).items():
            assert reverify(rep, spec), prop

    def test_run_check_dispatch(self):
        for prop in CHECKS:
            assert run_check(prop, chains(), 2).verdict == CHECKS[prop](chains(), 2).verdict

    def test_bound_monotone(self):
        cat = AgeSpec.catalogue_of([K3])
        assert [check_hp(cat, n).verdict for n in (1, 2, 3, 4)] == [HOLDS, HOLDS, FAILS, FAILS]
        assert [check_ap(SMALL_CATALOGUE, n).verdict for n in (1, 2, 3)] == [HOLDS, FAILS, FAILS]

    def test_summary_states_bound(self):
        assert "3" in check_jep(graphs(), 3).summary()
