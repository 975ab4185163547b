import json

import numpy as np
import pytest

from logilp.errors import BadPath, DanglingLink, MissingArg, MissingScore, SchemaError
from logilp.ground import (
    GAnd,
    GAtMost,
    GIf,
    GVar,
    ScoreVector,
    VarIndex,
    atoms_of,
    boolean_eval,
    candidates,
    ground,
    load_data,
    resolve_path,
)
from logilp.lclang import ArgStep, ContainsStep, parse

ENTITY_DSL = """\
concept sentence;
concept phrase;
concept pair;
sentence contains phrase;
pair has_a (arg1=phrase, arg2=phrase);
concept entity : phrase;
concept people : entity;
concept organization : entity;
concept location : entity;
concept work_for : pair;
"""

WORK_FOR = "ifL(work_for('x'), andL(people(path=('x', arg1)), organization(path=('x', arg2))))"


def two_phrase_sample() -> dict:
    return {
        "nodes": [
            {"id": "sent", "concept": "sentence", "features": []},
            {"id": "p0", "concept": "phrase", "features": [1.0, 0.0]},
            {"id": "p1", "concept": "phrase", "features": [0.0, 1.0]},
            {"id": "pr0", "concept": "pair", "features": []},
            {"id": "pr1", "concept": "pair", "features": []},
        ],
        "contains": [["sent", "p0"], ["sent", "p1"]],
        "has_a": [
            ["pr0", "arg1", "p0"],
            ["pr0", "arg2", "p1"],
            ["pr1", "arg1", "p1"],
            ["pr1", "arg2", "p0"],
        ],
    }


@pytest.fixture()
def entity():
    graph, constraints = parse(ENTITY_DSL + WORK_FOR + "\n")
    dng = load_data(json.dumps(two_phrase_sample()), graph)
    return graph, constraints, dng


class TestLoadData:
    def test_counts_from_example_file(self, entity):
        graph, _, dng = entity
        assert len(dng.nodes) == 5
        assert len(dng.contains) == 2
        assert len(dng.has_a) == 4

    def test_empty_nodes_is_valid(self):
        graph, _ = parse(ENTITY_DSL)
        dng = load_data('{"nodes": []}', graph)
        assert len(dng.nodes) == 0

    def test_missing_arg_detected(self):
        graph, _ = parse(ENTITY_DSL)
        sample = two_phrase_sample()
        sample["has_a"] = [link for link in sample["has_a"] if link[:2] != ["pr1", "arg2"]]
        with pytest.raises(MissingArg):
            load_data(json.dumps(sample), graph)

    def test_dangling_link(self):
        graph, _ = parse(ENTITY_DSL)
        sample = two_phrase_sample()
        sample["contains"].append(["sent", "ghost"])
        with pytest.raises(DanglingLink):
            load_data(json.dumps(sample), graph)

    def test_inconsistent_feature_dim(self):
        graph, _ = parse(ENTITY_DSL)
        sample = two_phrase_sample()
        sample["nodes"][2]["features"] = [1.0, 2.0, 3.0]
        with pytest.raises(SchemaError):
            load_data(json.dumps(sample), graph)

    def test_decision_concept_node_rejected(self):
        graph, _ = parse(ENTITY_DSL)
        with pytest.raises(SchemaError):
            load_data('{"nodes": [{"id": "x", "concept": "people"}]}', graph)

    def test_label_must_match_concept(self):
        graph, _ = parse(ENTITY_DSL)
        sample = {"nodes": [{"id": "p", "concept": "phrase", "labels": {"work_for": 1}}]}
        with pytest.raises(SchemaError):
            load_data(json.dumps(sample), graph)

    def test_labels_accepted(self):
        graph, _ = parse(ENTITY_DSL)
        sample = {"nodes": [{"id": "p", "concept": "phrase", "labels": {"people": 1}}]}
        dng = load_data(json.dumps(sample), graph)
        assert dng.node("p").labels == {"people": 1}

    def test_self_pair_allowed(self):
        # a composite may point both arguments at the same member
        graph, _ = parse(ENTITY_DSL)
        sample = {
            "nodes": [
                {"id": "p0", "concept": "phrase", "features": [0.0, 0.0]},
                {"id": "pr", "concept": "pair", "features": []},
            ],
            "has_a": [["pr", "arg1", "p0"], ["pr", "arg2", "p0"]],
        }
        dng = load_data(json.dumps(sample), graph)
        assert dng.members_of("pr") == {"arg1": "p0", "arg2": "p0"}


class TestCandidates:
    def test_phrase_candidates(self, entity):
        graph, _, dng = entity
        assert [n.id for n in candidates(dng, graph, "phrase")] == ["p0", "p1"]

    def test_decision_concept_inherits_candidates(self, entity):
        graph, _, dng = entity
        assert [n.id for n in candidates(dng, graph, "people")] == ["p0", "p1"]

    def test_empty_graph(self):
        graph, _ = parse(ENTITY_DSL)
        dng = load_data('{"nodes": []}', graph)
        assert candidates(dng, graph, "people") == []


class TestResolvePath:
    def test_arg_step(self, entity):
        graph, _, dng = entity
        out = resolve_path(dng, graph, dng.node("pr0"), [ArgStep("arg1")])
        assert [n.id for n in out] == ["p0"]

    def test_reverse_contains(self, entity):
        graph, _, dng = entity
        out = resolve_path(dng, graph, dng.node("p0"), [ContainsStep("sentence", reverse=True)])
        assert [n.id for n in out] == ["sent"]

    def test_no_link_gives_empty(self, entity):
        graph, _, dng = entity
        lonely = {"nodes": [{"id": "solo", "concept": "phrase", "features": [0.0, 0.0]}]}
        dng2 = load_data(json.dumps(lonely), graph)
        out = resolve_path(dng2, graph, dng2.node("solo"), [ContainsStep("sentence", reverse=True)])
        assert out == []

    def test_unknown_arg_raises(self, entity):
        graph, _, dng = entity
        with pytest.raises(BadPath):
            resolve_path(dng, graph, dng.node("pr0"), [ArgStep("arg9")])


class TestVarIndex:
    def test_dense_and_sorted(self, entity):
        graph, _, dng = entity
        index = VarIndex(graph, dng)
        # 2 phrases x 4 phrase decisions + 2 pairs x 1 pair decision
        assert len(index) == 10
        assert index.pairs == sorted(index.pairs)
        assert index.names[0].startswith("var_")

    def test_scores_round_trip(self, entity):
        graph, _, dng = entity
        index = VarIndex(graph, dng)
        uniform = ScoreVector.uniform(index)
        again = ScoreVector.from_mapping(index, uniform.to_mapping())
        assert np.allclose(uniform.probs, again.probs)

    def test_missing_score(self, entity):
        graph, _, dng = entity
        index = VarIndex(graph, dng)
        with pytest.raises(MissingScore):
            ScoreVector.from_mapping(index, {"p0": {"people": 0.5}})

    def test_clamping(self, entity):
        graph, _, dng = entity
        index = VarIndex(graph, dng)
        probs = np.zeros(len(index))
        sv = ScoreVector(index, probs)
        assert sv.probs.min() > 0.0
        assert np.isfinite(sv.log_odds()).all()


class TestGround:
    def test_work_for_two_pairs(self, entity):
        graph, constraints, dng = entity
        index = VarIndex(graph, dng)
        grounded = ground(graph, constraints, dng, index)
        assert len(grounded) == 2
        for g in grounded:
            assert isinstance(g.expr, GIf)
            assert isinstance(g.expr.antecedent, GVar)
            assert isinstance(g.expr.consequent, GAnd)
        # one grounding per pair candidate
        assert [g.binding_dict()["x"] for g in grounded] == ["pr0", "pr1"]

    def test_single_variable_count_matches_candidates(self, entity):
        graph, _, dng = entity
        _, constraints = parse(
            ENTITY_DSL
            + "ifL(people('x'), existsL(organization(path=('x', within(sentence), contains(phrase)))))\n"
        )
        index = VarIndex(graph, dng)
        grounded = ground(graph, constraints, dng, index)
        assert len(grounded) == len(candidates(dng, graph, "people"))

    def test_exists_over_zero_neighbors_is_false(self):
        graph, constraints = parse(
            "concept city;\nconcept neighbor;\n"
            "neighbor has_a (arg1=city, arg2=city);\n"
            "concept firestationCity : city;\n"
            "orL(firestationCity('x'), existsL(firestationCity(path=('x', neighbor.arg2))))\n"
        )
        lonely = {"nodes": [{"id": "solo", "concept": "city"}]}
        dng = load_data(json.dumps(lonely), graph)
        index = VarIndex(graph, dng)
        grounded = ground(graph, constraints, dng, index)
        assert len(grounded) == 1
        # or(fs(solo), false) folds to the single variable
        assert grounded[0].expr == GVar(0)

    def test_disjoint_grounds_per_candidate(self):
        graph, constraints = parse(
            "concept image;\n"
            "concept truck : image;\nconcept dog : image;\nconcept cat : image;\n"
            "disjoint(truck, dog, cat)\n"
        )
        sample = {"nodes": [{"id": "im0", "concept": "image"}, {"id": "im1", "concept": "image"}]}
        dng = load_data(json.dumps(sample), graph)
        index = VarIndex(graph, dng)
        grounded = ground(graph, constraints, dng, index)
        assert len(grounded) == 2
        for g in grounded:
            assert isinstance(g.expr, GAtMost)
            assert g.expr.k == 1
            assert len(g.expr.children) == 3

    def test_deterministic(self, entity):
        graph, constraints, dng = entity
        index1 = VarIndex(graph, dng)
        index2 = VarIndex(graph, dng)
        assert index1.pairs == index2.pairs
        g1 = ground(graph, constraints, dng, index1)
        g2 = ground(graph, constraints, dng, index2)
        assert g1 == g2

    def test_every_atom_maps_to_index(self, entity):
        graph, constraints, dng = entity
        index = VarIndex(graph, dng)
        for g in ground(graph, constraints, dng, index):
            for atom in atoms_of(g.expr):
                assert 0 <= atom < len(index)

    def test_structural_atom_is_constant_true(self):
        graph, constraints = parse(
            "concept question;\nconcept symmetric;\n"
            "symmetric has_a (arg1=question, arg2=question);\n"
            "concept is_more : question;\nconcept is_less : question;\n"
            "ifL(andL(symmetric('s'), is_more(path=('s', arg1))), is_less(path=('s', arg2)))\n"
        )
        sample = {
            "nodes": [
                {"id": "q0", "concept": "question"},
                {"id": "q1", "concept": "question"},
                {"id": "sym", "concept": "symmetric"},
            ],
            "has_a": [["sym", "arg1", "q0"], ["sym", "arg2", "q1"]],
        }
        dng = load_data(json.dumps(sample), graph)
        index = VarIndex(graph, dng)
        grounded = ground(graph, constraints, dng, index)
        assert len(grounded) == 1
        expr = grounded[0].expr
        # the structural symmetric atom folds away, leaving if(is_more, is_less)
        assert expr == GIf(GVar(index.of("q0", "is_more")), GVar(index.of("q1", "is_less")))

    def test_rel_arg_step_skips_self(self):
        # both orientations in data: neighbors of c0 exclude c0 itself
        graph, constraints = parse(
            "concept city;\nconcept neighbor;\n"
            "neighbor has_a (arg1=city, arg2=city);\n"
            "concept firestationCity : city;\n"
            "orL(firestationCity('x'), existsL(firestationCity(path=('x', neighbor.arg2))))\n"
        )
        sample = {
            "nodes": [
                {"id": "c0", "concept": "city"},
                {"id": "c1", "concept": "city"},
                {"id": "nb0", "concept": "neighbor"},
                {"id": "nb1", "concept": "neighbor"},
            ],
            "has_a": [
                ["nb0", "arg1", "c0"],
                ["nb0", "arg2", "c1"],
                ["nb1", "arg1", "c1"],
                ["nb1", "arg2", "c0"],
            ],
        }
        dng = load_data(json.dumps(sample), graph)
        out = resolve_path(
            dng, graph, dng.node("c0"), parse_path_steps()
        )
        assert [n.id for n in out] == ["c1"]

    def test_boolean_eval_matches_hand_truth(self, entity):
        graph, constraints, dng = entity
        index = VarIndex(graph, dng)
        grounded = ground(graph, constraints, dng, index)
        values = np.zeros(len(index), dtype=int)
        # work_for(pr0)=1 with people(p0)=0 violates the implication
        values[index.of("pr0", "work_for")] = 1
        assert boolean_eval(grounded[0].expr, values) is False
        values[index.of("p0", "people")] = 1
        values[index.of("p1", "organization")] = 1
        assert boolean_eval(grounded[0].expr, values) is True


def parse_path_steps():
    from logilp.lclang import RelArgStep

    return [RelArgStep("neighbor", "arg2")]
