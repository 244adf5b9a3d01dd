import itertools

import pytest

import oracles
from fraisse_forge.ages import HOLDS, chains, digraphs, graphs, matchings, posets, triangle_free
from fraisse_forge.comma import (
    CommaMorphism,
    CommaObject,
    NoCommaAmalgam,
    Scenario,
    build_universal_hom,
    check_mixed_ap,
    check_target_ap,
    check_target_extension,
    comma_amalgamate,
    extract_section,
    subretract_transfer,
    verify_comma_homogeneity,
    verify_universality,
)
from fraisse_forge.structures import Morphism, MorphismError, chain, complete_graph, digraph, graph

K1, K2, K3, K4 = (complete_graph(i) for i in (1, 2, 3, 4))


def paley9():
    sq = {(1, 0), (2, 0), (0, 1), (0, 2)}
    pts = [(a, b) for a in range(3) for b in range(3)]
    return graph(9, [(3 * a + b, 3 * c + d) for (a, b), (c, d) in itertools.product(pts, pts)
                     if ((a - c) % 3, (b - d) % 3) in sq])


@pytest.fixture(scope="module")
def k3_hom():
    sc = Scenario(graphs(), K3, k=3, budget=150)
    return sc, build_universal_hom(sc)


class TestCommaObjects:
    def test_rejects_non_hom(self):
        with pytest.raises(MorphismError):
            CommaObject(K2, (0, 0), K3)

    def test_morphism_checks_colours(self):
        a, b = CommaObject(K1, (0,), K3), CommaObject(K2, (1, 2), K3)
        with pytest.raises(MorphismError):
            CommaMorphism(a, b, (0,))
        assert CommaMorphism(a, CommaObject(K2, (0, 2), K3), (0,)).verify()


class TestCommaAmalgamate:
    def test_two_coloured_edges(self):
        a = CommaObject(K1, (0,), K3)
        b1, b2 = CommaObject(K2, (0, 1), K3), CommaObject(K2, (2, 0), K3)
        c, g1, g2 = comma_amalgamate(a, b1, b2, CommaMorphism(a, b1, (0,)), CommaMorphism(a, b2, (1,)), graphs())
        assert c.dom.size == 3 and len(c.dom["E"]) == 4
        assert [c.map[g1.emb[x]] for x in range(2)] == [0, 1] and [c.map[g2.emb[x]] for x in range(2)] == [2, 0]

    def test_chains_over_point(self):
        t = chain(2)
        a = CommaObject(chain(1), (0,), t)
        b1, b2 = CommaObject(chain(2), (0, 1), t), CommaObject(chain(2), (0, 1), t)
        c, g1, g2 = comma_amalgamate(a, b1, b2, CommaMorphism(a, b1, (0,)), CommaMorphism(a, b2, (0,)), chains())
        assert chains().contains(c.dom) and oracles.is_hom(c.dom, t, c.map)
        assert g1.verify() and g2.verify()

    def test_triangles_glued_at_vertex(self):
        a = CommaObject(K1, (0,), K3)
        b = CommaObject(K3, (0, 1, 2), K3)
        c, _, _ = comma_amalgamate(a, b, b, CommaMorphism(a, b, (0,)), CommaMorphism(a, b, (0,)), graphs())
        assert c.dom.size == 5 and oracles.is_hom(c.dom, K3, c.map)

    def test_free_case_keeps_colourings(self):
        for h1 in itertools.permutations(range(3), 2):
            for h2 in itertools.permutations(range(3), 2):
                if h1[0] != h2[0]:
                    continue
                a = CommaObject(K1, (h1[0],), K3)
                b1, b2 = CommaObject(K2, h1, K3), CommaObject(K2, h2, K3)
                c, g1, g2 = comma_amalgamate(a, b1, b2, CommaMorphism(a, b1, (0,)), CommaMorphism(a, b2, (0,)), graphs())
                assert tuple(c.map[g1.emb[x]] for x in range(2)) == h1
                assert tuple(c.map[g2.emb[x]] for x in range(2)) == h2


class TestConditions:
    def test_target_ap(self):
        assert check_target_ap(Scenario(graphs(), K3), 3).holds
        assert check_target_ap(Scenario(chains(), chain(3)), 3).holds

    def test_degree_one(self):
        # K2 is too small to force a conflict; K3 is not
        assert check_target_ap(Scenario(matchings(), K2), 3).holds
        r = check_target_ap(Scenario(matchings(), K3), 3)
        assert not r.holds and r.witness["B1"].size == 2 and r.witness["B2"].size == 2

    def test_target_extension_k4(self):
        r = check_target_extension(Scenario(graphs(), K3), 4)
        assert not r.holds and r.witness["B"] == K4

    def test_target_extension_paley(self):
        assert check_target_extension(Scenario(graphs(), paley9()), 3).holds

    def test_finite_chain_target_fails(self):
        # the top element of a finite chain has nothing above it
        assert not check_target_extension(Scenario(posets(), chain(3)), 2).holds

    def test_mixed(self):
        assert check_mixed_ap(Scenario(graphs(), K3), 3).holds
        assert check_mixed_ap(Scenario(posets(), chain(3)), 3).holds
        assert check_mixed_ap(Scenario(matchings(), K2), 3).holds
        assert not check_mixed_ap(Scenario(triangle_free(), K2), 3).holds


class TestUniversalHom:
    def test_k3_universality(self, k3_hom):
        sc, res = k3_hom
        r = verify_universality(res, sc, 3)
        assert r.holds and r.instances == 42
        for w in r.witnesses:
            iota = w["iota"]
            assert oracles.is_emb(w["A"], res.final, iota.map)
            assert all(res.u[iota.map[x]] == w["h"].map[x] for x in range(w["A"].size))

    def test_colourings_compatible_along_links(self, k3_hom):
        _, res = k3_hom
        for i in range(0, len(res), 10):
            link = res.link(i, len(res) - 1)
            assert all(res.u[link.map[x]] == res[i].u[x] for x in range(res[i].structure.size))

    def test_u_is_a_colouring(self, k3_hom):
        _, res = k3_hom
        assert oracles.is_hom(res.final, K3, res.u)

    def test_section(self, k3_hom):
        sc, res = k3_hom
        iota = extract_section(res, sc)
        assert iota is not None and oracles.is_emb(K3, res.final, iota.map)
        assert [res.u[x] for x in iota.map] == [0, 1, 2]

    def test_empty_stage_fails(self):
        assert not verify_universality((graph(0), ()), Scenario(graphs(), K3), 1).holds

    def test_single_vertex_target(self):
        sc = Scenario(graphs(), K1, k=2, budget=50)
        res = build_universal_hom(sc)
        assert verify_universality(res, sc, 2).holds and not res.final["E"]

    def test_dag_scenario(self):
        t = digraph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        sc = Scenario(digraphs(), t, k=3, budget=150)
        res = build_universal_hom(sc)
        assert verify_universality(res, sc, 3).holds

    def test_no_amalgam_is_reported(self):
        sc = Scenario(matchings(), K3, k=2, budget=40)
        with pytest.raises(NoCommaAmalgam):
            build_universal_hom(sc)

    def test_homogeneity_skips_mixed_colours(self):
        # three isolated vertices coloured (0, 0, 1): only same-colour pairs count
        r = verify_comma_homogeneity((graph(3), (0, 0, 1)), Scenario(graphs(), K3), 1, 1)
        assert r.holds and r.instances == 5

    def test_homogeneity_reports_round(self, k3_hom):
        # the budget leaves coloured extension tasks open
        _, res = k3_hom
        r = verify_comma_homogeneity(res, Scenario(graphs(), K3), 1, 1)
        assert not r.holds and r.params["depth"] == 0 and "round 1" in r.witness["reason"]

    def test_section_preconditions(self):
        with pytest.raises(ValueError):
            extract_section((graph(0), ()), Scenario(triangle_free(), K4))
        assert extract_section((graph(0), ()), Scenario(graphs(), graph(0))).map == ()


class TestSubretract:
    def test_collapse_onto_triangle(self, k3_hom):
        t = graph(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)])
        sc = Scenario(graphs(), t, k=2, budget=150)
        res = build_universal_hom(sc)
        s = Morphism(t, K3, (0, 1, 2, 2))
        r = subretract_transfer(res, sc, s, n=2)
        assert r.holds, r.witness
        assert r.params["direct"] == {"target_ap": HOLDS, "target_extension": HOLDS}

    def test_identity(self, k3_hom):
        sc, res = k3_hom
        i = Morphism.identity(K3)
        assert subretract_transfer(res, sc, i, i, n=2).holds

    def test_non_retraction(self, k3_hom):
        sc, res = k3_hom
        with pytest.raises(ValueError):
            subretract_transfer(res, sc, Morphism(K3, K3, (0, 0, 1)))
