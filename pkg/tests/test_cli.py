import json
from pathlib import Path

import pytest

from logilp.cli import main
from logilp.datasets import ENTITY_DSL, make_entity_samples

ASSETS = Path(__file__).parent.parent / "src" / "logilp" / "assets"
GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv) -> tuple[int, dict]:
    code = main(list(argv))
    captured = capsys.readouterr()
    payload = json.loads(captured.out) if captured.out.strip() else {}
    return code, payload


class TestValidate:
    def test_shipped_entity_file_is_clean(self, capsys):
        code, payload = run(capsys, "validate", "--dsl", str(ASSETS / "entity.dk"))
        assert code == 0
        assert payload["ok"] is True

    def test_unbalanced_snippet_fails(self, tmp_path, capsys):
        bad = tmp_path / "bad.dk"
        bad.write_text(
            "symmetric.has_a(arg1=question, arg2=question)\n"
            "ifL(is_more('x'), is_less(path=('x', arg2))\n"
        )
        code, payload = run(capsys, "validate", "--dsl", str(bad))
        assert code == 1
        assert "error" in payload
        assert payload["kind"] == "DslSyntaxError"

    def test_empty_file(self, tmp_path, capsys):
        empty = tmp_path / "empty.dk"
        empty.write_text("# nothing here\n")
        code, payload = run(capsys, "validate", "--dsl", str(empty))
        assert code == 1
        assert "no concepts declared" in json.dumps(payload)


class TestCompile:
    def test_golden_lp(self, tmp_path, capsys):
        out = tmp_path / "model.lp"
        scores = tmp_path / "scores.json"
        scores.write_text((GOLDEN / "onepair_scores.json").read_text())
        code, payload = run(
            capsys,
            "compile",
            "--dsl", str(ASSETS / "entity_onepair.dk"),
            "--data", str(ASSETS / "entity_onepair.json"),
            "--scores", str(scores),
            "--emit-lp", str(out),
        )
        assert code == 0
        assert payload["inequalities"] == 4
        assert out.read_text() == (GOLDEN / "onepair.lp").read_text()

    def test_uniform_scores_zero_objective(self, tmp_path, capsys):
        out = tmp_path / "model.lp"
        code, payload = run(
            capsys,
            "compile",
            "--dsl", str(ASSETS / "entity_onepair.dk"),
            "--data", str(ASSETS / "entity_onepair.json"),
            "--uniform",
            "--emit-lp", str(out),
        )
        assert code == 0
        obj_line = [l for l in out.read_text().splitlines() if l.startswith(" obj:")][0]
        terms = obj_line.split(":", 1)[1]
        assert "0 var_" in terms
        assert "1 var_" not in terms.replace("0 var_", "")

    def test_missing_score_is_user_error(self, tmp_path, capsys):
        scores = tmp_path / "scores.json"
        scores.write_text('{"s0_p0": {"people": 0.5}}')
        code, payload = run(
            capsys,
            "compile",
            "--dsl", str(ASSETS / "entity_onepair.dk"),
            "--data", str(ASSETS / "entity_onepair.json"),
            "--scores", str(scores),
        )
        assert code == 1
        assert payload["kind"] == "MissingScore"


class TestInfer:
    def test_firestation_ring(self, capsys):
        code, payload = run(
            capsys,
            "infer",
            "--dsl", str(ASSETS / "firestation.dk"),
            "--data", str(ASSETS / "firestation_ring6.json"),
            "--scores", str(ASSETS / "firestation_ring6_scores.json"),
        )
        assert code == 0
        sample = payload["samples"][0]
        assert sample["status"] == "optimal"
        assert sample["violations"] == []
        placed = {
            node: flags["firestationCity"] for node, flags in sample["assignment"].items()
        }
        # every city hosts a station or borders one
        n = len(placed)
        for i in range(n):
            neighbors = [(i + 1) % n, (i - 1) % n]
            assert placed[f"city{i}"] == 1 or any(placed[f"city{j}"] == 1 for j in neighbors)

    def test_zero_constraints_gives_argmax(self, tmp_path, capsys):
        dsl = tmp_path / "plain.dk"
        dsl.write_text("concept item;\nconcept flag : item;\n")
        data = tmp_path / "data.json"
        data.write_text(json.dumps({"nodes": [
            {"id": "a", "concept": "item"}, {"id": "b", "concept": "item"}]}))
        scores = tmp_path / "scores.json"
        scores.write_text(json.dumps({"a": {"flag": 0.9}, "b": {"flag": 0.2}}))
        code, payload = run(
            capsys, "infer", "--dsl", str(dsl), "--data", str(data), "--scores", str(scores)
        )
        assert code == 0
        assignment = payload["samples"][0]["assignment"]
        assert assignment == {"a": {"flag": 1}, "b": {"flag": 0}}

    def test_contradiction_exits_two(self, tmp_path, capsys):
        dsl = tmp_path / "contra.dk"
        dsl.write_text(
            "concept item;\nconcept flag : item;\n"
            "andL(flag('x'), notL(flag('x')))\n"
        )
        data = tmp_path / "data.json"
        data.write_text(json.dumps({"nodes": [{"id": "a", "concept": "item"}]}))
        code, payload = run(capsys, "infer", "--dsl", str(dsl), "--data", str(data), "--uniform")
        assert code == 2
        assert payload["kind"] == "infeasible"


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "domain.dk").write_text(ENTITY_DSL)
    train = make_entity_samples(20, seed=3, noise=0.05)
    test = make_entity_samples(8, seed=4, noise=0.0, n_ambiguous=2)
    (tmp_path / "train.json").write_text(json.dumps(train))
    (tmp_path / "test.json").write_text(json.dumps(test))
    config = {
        "dsl": "domain.dk",
        "train_data": "train.json",
        "test_data": "test.json",
        "strategy": "ilp",
        "epochs": 4,
        "lr": 0.05,
        "seed": 0,
        "params_out": "params.json",
        "metrics_out": "metrics.json",
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    return tmp_path


class TestTrainEval:
    def test_train_writes_artifacts_and_ilp_is_clean(self, workdir, capsys):
        code, payload = run(capsys, "train", "--config", str(workdir / "config.json"))
        assert code == 0
        assert (workdir / "params.json").exists()
        assert (workdir / "metrics.json").exists()
        assert payload["test"]["violations"] == [[] for _ in range(8)]

    def test_reproducible_artifacts(self, workdir, capsys):
        run(capsys, "train", "--config", str(workdir / "config.json"))
        first_params = (workdir / "params.json").read_bytes()
        first_metrics = (workdir / "metrics.json").read_bytes()
        run(capsys, "train", "--config", str(workdir / "config.json"))
        assert (workdir / "params.json").read_bytes() == first_params
        assert (workdir / "metrics.json").read_bytes() == first_metrics

    def test_eval_uses_saved_params(self, workdir, capsys):
        run(capsys, "train", "--config", str(workdir / "config.json"))
        code, payload = run(
            capsys, "eval", "--config", str(workdir / "config.json"), "--jobs", "2"
        )
        assert code == 0
        assert payload["metrics"]["micro"]["f1"] > 0.5
        assert all(not v for v in payload["violations"])

    def test_strategy_override_flag(self, workdir, capsys):
        code, payload = run(
            capsys,
            "train", "--config", str(workdir / "config.json"),
            "--strategy", "baseline", "--epochs", "2",
        )
        assert code == 0
        assert payload["strategy"] == "baseline"
        assert payload["epochs"] == 2

    def test_masked_training_with_matching_inference_has_zero_loss(self, tmp_path, capsys):
        # every label 0: global inference reproduces the labels from the
        # start, the mask keeps nothing, the fully masked loss stays 0
        (tmp_path / "domain.dk").write_text(ENTITY_DSL)
        data = make_entity_samples(6, seed=8, noise=0.0)
        for sample in data:
            for node in sample["nodes"]:
                if "labels" in node:
                    node["labels"] = {k: 0 for k in node["labels"]}
        (tmp_path / "train.json").write_text(json.dumps(data))
        config = {
            "dsl": "domain.dk",
            "train_data": "train.json",
            "strategy": "iml",
            "lambda": 1.0,
            "epochs": 3,
            "lr": 0.05,
            "seed": 0,
        }
        (tmp_path / "config.json").write_text(json.dumps(config))
        code, payload = run(capsys, "train", "--config", str(tmp_path / "config.json"))
        assert code == 0
        losses = [rec["loss"] for rec in payload["history"] if rec["loss"] is not None]
        assert losses, "history must record training loss"
        assert all(abs(l) < 1e-9 for l in losses)
