import pytest

import oracles
from fraisse_forge.ages import AgeSpec, chains, graphs, matchings, triangle_free
from fraisse_forge.limits import (
    AmalgamationError,
    saturate_limit,
    survival_depth,
    task_templates,
    verify_extension_property,
    verify_partial_homogeneity,
)
from fraisse_forge.structures import (
    complete_graph,
    disjoint_union,
    graph,
    induced_substructure,
    path_graph,
)

K1, K2, K3 = complete_graph(1), complete_graph(2), complete_graph(3)


@pytest.fixture(scope="module")
def rado2():
    return saturate_limit(graphs(), 2, 100)


def _brute_extension(u, spec, k):
    """Every anchored A <= B with |B| <= k extends, checked on raw maps."""
    for b, s, _ in task_templates(spec, k):
        a, _ = induced_substructure(b, s)
        for anchor in oracles.brute(a, u, "emb"):
            if not any(all(e[s[i]] == anchor[i] for i in range(len(s))) for e in oracles.brute(b, u, "emb")):
                return False
    return True


class TestSaturation:
    def test_graphs_converge(self, rado2):
        assert not rado2.exhausted and rado2.final.size == 8 and len(rado2) == 7
        assert verify_extension_property(rado2.final, graphs(), 2).holds
        assert _brute_extension(rado2.final, graphs(), 2)

    def test_chain_coherence(self, rado2):
        for i in range(len(rado2)):
            for j in range(i, len(rado2)):
                link = rado2.link(i, j)
                assert oracles.is_emb(rado2[i].structure, rado2[j].structure, link.map)

    def test_fifo_audit(self, rado2):
        enq = [e["task"] for e in rado2.audit if e["event"] == "enqueued"]
        done = [e["task"] for e in rado2.audit if e["event"] in ("discharged", "satisfied")]
        assert done == enq[: len(done)]

    def test_idempotent_at_fixpoint(self, rado2):
        again = saturate_limit(graphs(), 2, 100, initial=rado2.final)
        assert len(again) == 1
        assert {e["event"] for e in again.audit} <= {"enqueued", "satisfied"}

    def test_chains_do_not_converge(self):
        r = saturate_limit(chains(), 2, 10)
        assert r.exhausted and r.open_tasks
        assert all(chains().contains(st.structure) for st in r.stages)
        # a finite chain has a top: the "element above" task stays open
        assert not verify_extension_property(r.final, chains(), 2).holds

    def test_point_catalogue_stops_at_a_point(self):
        r = saturate_limit(AgeSpec.catalogue_of([K1]), 2, 10)
        assert r.final == K1 and not r.exhausted

    def test_small_catalogue_has_no_amalgam(self):
        cat = AgeSpec.catalogue_of([graph(0), K1, K2, graph(2)])
        with pytest.raises(AmalgamationError, match="amalgamation instance has no witness"):
            saturate_limit(cat, 2, 20)

    @pytest.mark.parametrize("spec", [matchings(), triangle_free()], ids=["matchings", "triangle_free"])
    def test_other_classes_converge(self, spec):
        r = saturate_limit(spec, 2, 100)
        assert not r.exhausted and verify_extension_property(r.final, spec, 2).holds


class TestExtensionProperty:
    def test_triangle_is_not_a_limit(self):
        r = verify_extension_property(K3, graphs(), 2)
        assert not r.holds and r.witness["B"] == graph(2)

    def test_empty_structure(self):
        assert not verify_extension_property(graph(0), graphs(), 1).holds

    def test_witnesses_reverify(self, rado2):
        u = rado2.final
        for w in verify_extension_property(u, graphs(), 2).witnesses:
            ext, s = w["ext"], w["f"].map
            assert oracles.is_emb(w["B"], u, ext.map)
            assert all(ext.map[s[i]] == w["anchor"].map[i] for i in range(len(s)))


class TestHomogeneity:
    def test_rado_stage_two_rounds(self, rado2):
        r = verify_partial_homogeneity(rado2.final, graphs(), 1, 2)
        assert r.holds and r.params["depth"] == 2

    def test_path_endpoint_swap(self):
        assert survival_depth(path_graph(3), {0: 2, 2: 0}, 1) == 1

    def test_edge_plus_point(self):
        g = disjoint_union(K2, K1)[0]
        r = verify_partial_homogeneity(g, graphs(), 1, 1)
        assert not r.holds and r.params["depth"] == 0
        assert survival_depth(g, {0: 2}, 1) == 0
