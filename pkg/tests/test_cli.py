import csv
import json

import pytest

from qe_bias.cli import main
from qe_bias.corpus import save_native

from synthdata import F_MARKER, ambiguous_instances, candidate_set_records, unambiguous_instances


def _dataset(tmp_path, instances, name="data.jsonl"):
    path = tmp_path / name
    save_native(instances, path)
    return str(path)


class TestValidate:
    def test_ok(self, tmp_path, capsys):
        path = _dataset(tmp_path, ambiguous_instances(5))
        assert main(["validate", "--dataset", path, "--schema", "native"]) == 0
        out = capsys.readouterr().out
        assert "OK 5 instances" in out

    def test_hard_error_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "x1"}\n')
        assert main(["validate", "--dataset", str(path), "--schema", "native"]) == 2
        assert "missing field" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        assert main(["validate", "--dataset", str(tmp_path / "none.jsonl"), "--schema", "native"]) == 2

    def test_warns_on_non_minimal_pairs(self, tmp_path, capsys):
        import qe_bias.corpus as corpus

        inst = corpus.EvaluationInstance(
            id="big",
            language_pair=corpus.LanguagePair("en", "it"),
            source="source text",
            condition=corpus.AMBIGUOUS_FM,
            variants={"F": "a b c d", "M": "w x y z"},
        )
        path = _dataset(tmp_path, [inst])
        assert main(["validate", "--dataset", path, "--schema", "native"]) == 0
        assert "not_minimal_edit" in capsys.readouterr().out


class TestAudit:
    def test_structured_output(self, tmp_path):
        path = _dataset(tmp_path, ambiguous_instances(6))
        out = tmp_path / "report.json"
        code = main(
            [
                "audit",
                "--dataset", path,
                "--schema", "native",
                "--scorer", "mock:constant:0.5",
                "--seed", "42",
                "--out", str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["metadata"]["seed"] == 42
        assert report["cells"][0]["summary"]["ratio"]["mean"] == 1.0

    def test_csv_and_figures(self, tmp_path):
        path = _dataset(tmp_path, ambiguous_instances(6))
        out = tmp_path / "cells.csv"
        figdir = tmp_path / "figs"
        code = main(
            [
                "audit",
                "--dataset", path,
                "--schema", "native",
                "--scorer", "mock:hash",
                "--seed", "1",
                "--format", "csv_tables",
                "--out", str(out),
                "--figures", str(figdir),
            ]
        )
        assert code == 0
        with out.open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert (figdir / "ratios.png").exists()

    def test_endpoint_failure_exits_3(self, tmp_path):
        import sys

        path = _dataset(tmp_path, ambiguous_instances(2))
        code = main(
            [
                "audit",
                "--dataset", path,
                "--schema", "native",
                "--scorer", f"cmd:{sys.executable} -c pass",
                "--seed", "0",
            ]
        )
        assert code == 3

    def test_subprocess_scorer_end_to_end(self, tmp_path):
        import sys

        path = _dataset(tmp_path, unambiguous_instances(3, 3))
        out = tmp_path / "report.json"
        code = main(
            [
                "audit",
                "--dataset", path,
                "--schema", "native",
                "--scorer", f"cmd:{sys.executable} -m qe_bias.mock_endpoint --scorer hash --shuffle",
                "--seed", "7",
                "--bootstrap", "200",
                "--out", str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["metadata"]["scorer_name"] == "hash"
        assert report["cells"][0]["summary"]["er_total"] is not None


class TestFilterSim:
    def test_grid_and_output(self, tmp_path):
        path = _dataset(tmp_path, ambiguous_instances(20))
        out = tmp_path / "retention.csv"
        code = main(
            [
                "filter-sim",
                "--dataset", path,
                "--schema", "native",
                "--scorer", "mock:hash",
                "--threshold-grid", "0:1:0.01",
                "--format", "csv_tables",
                "--out", str(out),
            ]
        )
        assert code == 0
        with out.open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 101
        assert rows[0]["threshold"] == "0.0"
        assert float(rows[0]["F"]) == 1.0

    def test_bad_grid_exits_2(self, tmp_path):
        path = _dataset(tmp_path, ambiguous_instances(2))
        code = main(
            [
                "filter-sim",
                "--dataset", path,
                "--schema", "native",
                "--scorer", "mock:hash",
                "--threshold-grid", "nope",
            ]
        )
        assert code == 2


class TestGtFilter:
    def test_end_to_end(self, tmp_path):
        instances = unambiguous_instances(3, 3, seed=8)
        path = _dataset(tmp_path, instances)
        translations = tmp_path / "translations.jsonl"
        with open(translations, "w") as fh:
            for f_inst, m_inst in zip(instances[:3], instances[3:]):
                base = f_inst.id
                fh.write(
                    json.dumps(
                        {
                            "id_f": f_inst.id,
                            "id_m": m_inst.id,
                            "translation_f": f_inst.variants["F"],
                            "translation_m": m_inst.variants["M"],
                            "inflection_ok_f": True,
                            "inflection_ok_m": True,
                        }
                    )
                    + "\n"
                )
        out = tmp_path / "stats.json"
        retained_out = tmp_path / "retained.jsonl"
        code = main(
            [
                "gt-filter",
                "--dataset", path,
                "--schema", "native",
                "--translations", str(translations),
                "--retained-out", str(retained_out),
                "--out", str(out),
            ]
        )
        assert code == 0
        stats = json.loads(out.read_text())["filter_stats"]
        assert stats["n_pairs_in"] == 3
        assert stats["n_pairs_stage2"] == 3
        retained = [json.loads(l) for l in retained_out.read_text().splitlines()]
        assert len(retained) == 3
        assert retained[0]["band"] == "Excellent"

    def test_unknown_pair_exits_2(self, tmp_path):
        path = _dataset(tmp_path, unambiguous_instances(1, 1))
        translations = tmp_path / "translations.jsonl"
        translations.write_text(
            json.dumps(
                {
                    "id": "ghost",
                    "translation_f": "a",
                    "translation_m": "b",
                    "inflection_ok_f": True,
                    "inflection_ok_m": True,
                }
            )
            + "\n"
        )
        code = main(
            [
                "gt-filter",
                "--dataset", path,
                "--schema", "native",
                "--translations", str(translations),
            ]
        )
        assert code == 2


class TestQad:
    def test_end_to_end(self, tmp_path):
        nbest = tmp_path / "nbest.jsonl"
        with open(nbest, "w") as fh:
            for rec in candidate_set_records(8, seed=13):
                fh.write(json.dumps(rec) + "\n")
        out = tmp_path / "qad.json"
        code = main(
            [
                "qad",
                "--nbest", str(nbest),
                "--scorer", f"mock:biased:0.8:0.05:{F_MARKER}",
                "--out", str(out),
                "--figures", str(tmp_path / "figs"),
            ]
        )
        assert code == 0
        qad = json.loads(out.read_text())["qad"]
        assert qad["n"] == 8
        assert qad["count_f"] == 0
        assert (tmp_path / "figs" / "match_counts.png").exists()

    def test_missing_source_exits_2(self, tmp_path):
        nbest = tmp_path / "nbest.jsonl"
        nbest.write_text(json.dumps({"instance_id": "x", "candidates": ["a"], "h_f": "f", "h_m": "m"}) + "\n")
        code = main(["qad", "--nbest", str(nbest), "--scorer", "mock:hash"])
        assert code == 2


class TestParetoCli:
    def test_end_to_end(self, tmp_path):
        points = tmp_path / "points.csv"
        points.write_text("name,er_total,gap\nA,0.1,0.2\nB,0.2,0.1\nC,0.2,0.3\n")
        out = tmp_path / "pareto.csv"
        code = main(
            [
                "pareto",
                "--points", str(points),
                "--format", "csv_tables",
                "--out", str(out),
                "--figures", str(tmp_path / "figs"),
            ]
        )
        assert code == 0
        with out.open() as fh:
            rows = {r["name"]: r["on_frontier"] for r in csv.DictReader(fh)}
        assert rows == {"A": "1", "B": "1", "C": "0"}
        assert (tmp_path / "figs" / "pareto.png").exists()

    def test_markdown_output(self, tmp_path, capsys):
        points = tmp_path / "points.csv"
        points.write_text("metric,er_total,gap\nA,0.1,0.2\n")
        code = main(["pareto", "--points", str(points), "--format", "markdown_tables"])
        assert code == 0
        assert "| Metric | ER | gap | frontier |" in capsys.readouterr().out
