import io
import json
import math

import numpy as np
import pytest

from brcnet import ValidationError, evaluate_softmax, extract_polynomial_softmax
from brcnet.cli import main
from brcnet.io import (
    dataset_to_csv,
    dumps_model,
    model_from_dict,
    model_to_dict,
    parse_dataset,
    softmax_from_dict,
    softmax_to_dict,
)
from brcnet.network import all_assignments

from conftest import random_dag, random_params

YX = {"schema_version": 1, "variables": [{"name": "Y", "cardinality": 2}, {"name": "X", "cardinality": 2}],
      "edges": [["Y", "X"]], "class": "Y", "prior": 1.0}

NB2 = {
    "schema_version": 1,
    "variables": [{"name": n, "cardinality": 2} for n in ("Y", "X1", "X2")],
    "edges": [["Y", "X1"], ["Y", "X2"]],
    "class": "Y",
    "prior": 1.0,
    "parameters": {"Y": [[0.5, 0.5]], "X1": [[0.8, 0.2], [0.2, 0.8]], "X2": [[0.8, 0.2], [0.2, 0.8]]},
}

NB3 = {
    "schema_version": 1,
    "variables": [{"name": n, "cardinality": 2} for n in ("Y", "X1", "X2", "X3")],
    "edges": [["Y", "X1"], ["Y", "X2"], ["Y", "X3"]],
    "class": "Y",
    "prior": 1.0,
}


def write(tmp_path, name, content):
    path = tmp_path / name
    path.write_text(content if isinstance(content, str) else json.dumps(content))
    return str(path)


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


class TestModelFiles:
    def test_round_trip(self, rng):
        for _ in range(10):
            s = random_dag(rng, int(rng.integers(1, 5)), max_card=3)
            doc = {
                "schema_version": 1,
                "variables": [{"name": n, "cardinality": c} for n, c in zip(s.names, s.cardinalities)],
                "edges": [[s.names[p], s.names[j]] for j in range(s.n) for p in s.parents[j]],
                "class": s.names[s.class_index],
                "prior": {"alpha": 0.5, "nodes": {s.names[0]: np.full(s.table_shape(0), 2.0).tolist()}},
                "parameters": {n: t.tolist() for n, t in zip(s.names, random_params(s, rng).tables)},
            }
            model = model_from_dict(doc)
            assert model.structure == s
            again = model_from_dict(json.loads(dumps_model(model)))
            assert again == model
            assert model_to_dict(again) == model_to_dict(model)

    def test_state_labels(self):
        doc = dict(YX, variables=[{"name": "Y", "states": ["no", "yes"]}, {"name": "X", "cardinality": 2}])
        model = model_from_dict(doc)
        assert model.structure.cardinalities == (2, 2)
        d = parse_dataset("X,Y\n1,yes\n0,0\n", model)
        assert d.columns == ("X", "Y") and d.rows.tolist() == [[1, 1], [0, 0]]
        assert model_from_dict(json.loads(dumps_model(model))) == model

    @pytest.mark.parametrize("bad", [
        dict(YX, edges=[["Y", "X"], ["X", "Y"]]),
        dict(YX, schema_version=2),
        dict(YX, prior=0.0),
        dict(YX, edges=[["Y", "Z"]]),
        {k: v for k, v in YX.items() if k != "class"},
        dict(YX, parameters={"Y": [[0.5, 0.5]]}),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ValidationError):
            model_from_dict(bad)


class TestDatasets:
    def test_errors(self):
        model = model_from_dict(YX)
        with pytest.raises(ValidationError, match="missing"):
            parse_dataset("Y,X\n0,\n", model)
        with pytest.raises(ValidationError):
            parse_dataset("Y,Z\n0,0\n", model)
        with pytest.raises(ValidationError):
            parse_dataset("Y,X\n0,2\n", model)
        with pytest.raises(ValidationError):
            parse_dataset("", model)

    def test_csv_round_trip(self):
        model = model_from_dict(YX)
        d = parse_dataset("Y,X\n0,1\n1,1\n", model)
        text = dataset_to_csv(d)
        assert text == "Y,X\n0,1\n1,1\n"
        assert parse_dataset(text, model) == d


class TestSoftmaxJson:
    def test_round_trip(self, rng):
        s = random_dag(rng, 4, class_card=3, max_card=3)
        model = extract_polynomial_softmax(s, random_params(s, rng))
        doc = json.loads(json.dumps(softmax_to_dict(model, s.names[s.class_index])))
        back = softmax_from_dict(doc)
        for x in all_assignments([s.cardinalities[i] for i in s.input_indices]):
            assert np.array_equal(evaluate_softmax(back, x), evaluate_softmax(model, x))


class TestScore:
    def test_cnm_worked_example(self, tmp_path):
        m = write(tmp_path, "m.json", YX)
        d = write(tmp_path, "d.csv", "Y,X\n0,0\n0,0\n")
        code, out = run("score", m, d, "--criterion", "cnm")
        assert code == 0
        assert f"{math.log(4 / 11):.12g}" in out
        code, out = run("score", m, d, "--criterion", "cnm", "--format", "json")
        report = json.loads(out)
        assert report["value"] == pytest.approx(math.log(4 / 11), abs=1e-15)
        assert len(report["per_case_terms"]) == 2

    def test_csc_over_cap(self, tmp_path, capsys):
        m = write(tmp_path, "m.json", YX)
        d = write(tmp_path, "d.csv", "Y,X\n" + "0,0\n" * 6)
        code, _ = run("score", m, d, "--criterion", "csc", "--completion-cap", "32")
        assert code == 3
        err = capsys.readouterr().err
        assert "csc-mc" in err and "32" in err

    def test_lml_empty(self, tmp_path):
        m = write(tmp_path, "m.json", YX)
        d = write(tmp_path, "d.csv", "Y,X\n")
        code, out = run("score", m, d, "--criterion", "lml", "--format", "json")
        assert code == 0 and json.loads(out)["value"] == 0.0

    def test_mc_needs_seed_and_is_deterministic(self, tmp_path):
        m = write(tmp_path, "m.json", YX)
        d = write(tmp_path, "d.csv", "Y,X\n0,0\n1,1\n0,1\n")
        assert run("score", m, d, "--criterion", "csc-mc", "--samples", "500")[0] == 2
        a = run("score", m, d, "--criterion", "csc-mc", "--samples", "500", "--seed", "3")
        assert a[0] == 0 and "std_error" in a[1]
        assert a == run("score", m, d, "--criterion", "csc-mc", "--samples", "500", "--seed", "3")

    def test_validation_errors(self, tmp_path):
        m = write(tmp_path, "m.json", YX)
        assert run("score", m, write(tmp_path, "bad.csv", "Y,Z\n0,0\n"), "--criterion", "cnm")[0] == 2
        assert run("score", write(tmp_path, "bad.json", "{"), m, "--criterion", "cnm")[0] == 2
        assert run("score", m, str(tmp_path / "missing.csv"), "--criterion", "cnm")[0] == 2
        with pytest.raises(SystemExit) as info:
            run("score", m)
        assert info.value.code == 2


class TestConvert:
    def test_naive_bayes_example(self, tmp_path):
        code, out = run("convert", write(tmp_path, "nb.json", NB2), "--to", "softmax", "--check")
        assert code == 0
        doc = json.loads(out)
        terms = {tuple(map(tuple, t["literals"])): t["coefficient"] for t in doc["classes"][0]["terms"]}
        assert terms[()] == pytest.approx(-2.772589, abs=5e-7)
        assert terms[(("X1", 1),)] == pytest.approx(2.772589, abs=5e-7)
        assert terms[(("X2", 1),)] == pytest.approx(2.772589, abs=5e-7)
        assert doc["max_abs_deviation"] < 1e-10
        linear = json.loads(run("convert", write(tmp_path, "nb.json", NB2), "--form", "linear")[1])
        assert linear["classes"] == doc["classes"]

    def test_check_on_random_models(self, tmp_path, rng):
        for _ in range(5):
            s = random_dag(rng, 4, class_card=3, max_card=3)
            doc = {
                "schema_version": 1,
                "variables": [{"name": n, "cardinality": c} for n, c in zip(s.names, s.cardinalities)],
                "edges": [[s.names[p], s.names[j]] for j in range(s.n) for p in s.parents[j]],
                "class": s.names[s.class_index],
                "prior": 1.0,
                "parameters": {n: t.tolist() for n, t in zip(s.names, random_params(s, rng).tables)},
            }
            code, out = run("convert", write(tmp_path, "m.json", doc), "--check")
            assert code == 0 and json.loads(out)["max_abs_deviation"] < 1e-10

    def test_zero_parameter(self, tmp_path, capsys):
        doc = json.loads(json.dumps(NB2))
        doc["parameters"]["X1"] = [[1.0, 0.0], [0.2, 0.8]]
        code, _ = run("convert", write(tmp_path, "z.json", doc))
        assert code == 2
        assert "X1" in capsys.readouterr().err

    def test_needs_parameters(self, tmp_path):
        assert run("convert", write(tmp_path, "m.json", YX))[0] == 2


class TestIdentifiability:
    def test_naive_bayes_three(self, tmp_path):
        m = write(tmp_path, "nb3.json", NB3)
        code, out = run("identifiability", m, "--points", "100", "--seed", "7", "--format", "json")
        assert code == 0
        report = json.loads(out)
        assert report["full_rank_count"] == 100 and report["expected_full_rank"] == 7
        assert run("identifiability", m, "--points", "100", "--seed", "7", "--format", "json")[1] == out

    def test_single_input(self, tmp_path):
        doc = dict(YX, edges=[])
        code, out = run("identifiability", write(tmp_path, "m.json", doc), "--points", "5", "--seed", "0",
                        "--format", "json")
        report = json.loads(out)
        assert report["expected_full_rank"] == 1 and set(report["per_point_ranks"]) == {1}

    def test_seed_and_positivity(self, tmp_path):
        m = write(tmp_path, "nb3.json", NB3)
        assert run("identifiability", m)[0] == 2
        assert run("identifiability", m, "--seed", "1", "--step", "-1")[0] == 2


class TestAverage:
    def test_two_variables(self, tmp_path):
        m = write(tmp_path, "m.json", YX)
        d = write(tmp_path, "d.csv", "Y,X\n0,0\n1,1\n1,1\n0,1\n")
        code, out = run("average", m, d, "--format", "json")
        doc = json.loads(out)
        assert code == 0 and len(doc["ranking"]) == 3
        assert sum(r["posterior"] for r in doc["ranking"]) == pytest.approx(1.0, abs=1e-12)
        code, out = run("average", m, d)
        rows = [line for line in out.splitlines() if line[:1].isdigit()]
        assert len(rows) == 3
        assert sum(float(r.split("\t")[4]) for r in rows) == pytest.approx(1.0, abs=1e-10)

    def test_three_variables_and_top(self, tmp_path):
        m = write(tmp_path, "nb.json", NB2)
        d = write(tmp_path, "d.csv", "Y,X1,X2\n0,0,0\n1,1,1\n1,1,0\n0,0,1\n1,1,1\n")
        doc = json.loads(run("average", m, d, "--format", "json")[1])
        assert len(doc["ranking"]) == 25
        best = max(doc["ranking"], key=lambda r: r["posterior"])
        top = json.loads(run("average", m, d, "--top", "1", "--format", "json")[1])
        assert [r["key"] for r in top["ranking"]] == [best["key"]]

    def test_predict(self, tmp_path):
        m = write(tmp_path, "nb.json", NB2)
        d = write(tmp_path, "d.csv", "Y,X1,X2\n0,0,0\n1,1,1\n1,1,0\n")
        doc = json.loads(run("average", m, d, "--predict", "X1=1,X2=0", "--format", "json")[1])
        assert sum(doc["predictive"]) == pytest.approx(1.0, abs=1e-9)
        assert run("average", m, d, "--predict", "X1=1")[0] == 2
        assert run("average", m, d, "--top", "99")[0] == 2

    def test_max_nodes(self, tmp_path):
        m = write(tmp_path, "nb.json", NB2)
        d = write(tmp_path, "d.csv", "Y,X1,X2\n")
        assert run("average", m, d, "--max-nodes", "2")[0] == 3
        doc = dict(NB3, variables=[{"name": f"V{i}", "cardinality": 2} for i in range(6)], edges=[], **{"class": "V0"})
        six = write(tmp_path, "six.csv", ",".join(f"V{i}" for i in range(6)) + "\n")
        assert run("average", write(tmp_path, "six.json", doc), six, "--max-nodes", "6")[0] == 3


class TestGenerate:
    def test_header_only(self, tmp_path):
        assert run("generate", write(tmp_path, "nb.json", NB2), "--cases", "0", "--seed", "1") == (0, "Y,X1,X2\n")

    def test_deterministic(self, tmp_path):
        m = write(tmp_path, "nb.json", NB2)
        a = run("generate", m, "--cases", "50", "--seed", "5")
        assert a[0] == 0 and len(a[1].splitlines()) == 51
        assert a == run("generate", m, "--cases", "50", "--seed", "5")
        assert run("generate", m, "--cases", "5")[0] == 2

    def test_deterministic_model(self, tmp_path):
        doc = dict(YX, parameters={"Y": [[0.0, 1.0]], "X": [[1.0, 0.0], [1.0, 0.0]]})
        code, out = run("generate", write(tmp_path, "m.json", doc), "--cases", "20", "--seed", "2")
        assert code == 0 and out.splitlines()[1:] == ["1,0"] * 20


def test_json_report_round_trips(tmp_path):
    m = write(tmp_path, "m.json", YX)
    d = write(tmp_path, "d.csv", "Y,X\n0,0\n1,1\n0,1\n")
    code, out = run("score", m, d, "--criterion", "csc", "--format", "json")
    doc = json.loads(out)
    assert json.loads(json.dumps(doc, indent=2)) == doc
    assert json.dumps(doc, indent=2) + "\n" == out
    assert isinstance(doc["value"], float)
