"""Command-line interface.

Core claims:
    - every command emits schema-versioned JSON plus a manifest hashing
      all inputs and the effective configuration
    - reruns with identical inputs produce byte-identical artifacts
    - exit codes separate usage errors (2), data errors (3), and fits
      that ran but did not converge (4)
"""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from lmlgraph.cli import main


DATA = Path("src/lmlgraph/data").resolve()
HOUSING = str(DATA / "housing.csv")
HOUSING_SCHEMA = str(DATA / "housing.schema.json")
HOUSING_GRAPH = str(DATA / "housing_graph.json")
HOUSING_EXPANDED = str(DATA / "housing_expanded_graph.json")


@pytest.fixture
def runner():
    return CliRunner()


def write_small_csv(path: Path) -> str:
    rows = [
        "a,b,count",
        "n,n,412", "n,y,388",
        "y,n,296", "y,y,304",
    ]
    path.write_text("\n".join(rows) + "\n")
    return str(path)


def write_small_graph(path: Path) -> str:
    doc = {"vertices": ["a", "b"], "edges": []}
    path.write_text(json.dumps(doc))
    return str(path)


class TestTransform:
    def test_prob_output(self, runner):
        result = runner.invoke(
            main,
            ["transform", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
             "--direction", "prob"],
        )
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert doc["schema_version"] == 1
        assert doc["kind"] == "prob"
        assert doc["n"] == 1681
        assert len(doc["values"]) == 72
        assert sum(doc["values"].values()) == pytest.approx(1.0)
        assert doc["manifest"]["command"] == "transform"
        assert set(doc["manifest"]["inputs"]) == {"counts", "schema"}

    def test_lml_output_counts_indices(self, runner):
        result = runner.invoke(
            main,
            ["transform", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
             "--direction", "lml"],
        )
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert doc["kind"] == "lml"
        assert len(doc["values"]) == 71  # every nonempty interaction index

    def test_unknown_direction_is_usage_error(self, runner):
        result = runner.invoke(
            main, ["transform", "--counts", HOUSING, "--direction", "nope"]
        )
        assert result.exit_code == 2

    def test_malformed_csv_is_data_error(self, runner, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,count\nn,n,-4\n")
        result = runner.invoke(
            main, ["transform", "--counts", str(bad), "--direction", "prob"]
        )
        assert result.exit_code == 3
        assert "negative" in result.stderr

    def test_out_dir_reruns_are_byte_identical(self, runner, tmp_path):
        outs = []
        for name in ("one", "two"):
            out = tmp_path / name
            result = runner.invoke(
                main,
                ["transform", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
                 "--direction", "moebius", "--out-dir", str(out)],
            )
            assert result.exit_code == 0
            outs.append(out)
        for fname in ("transform.json", "manifest.json"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
        manifest = json.loads((outs[0] / "manifest.json").read_text())
        assert manifest["outputs"] == ["transform.json", "manifest.json"]
        assert len(manifest["config_sha256"]) == 64


class TestFit:
    def test_housing_summary_and_document(self, runner, tmp_path):
        out = tmp_path / "run"
        result = runner.invoke(
            main,
            ["fit", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
             "--graph", HOUSING_GRAPH, "--out-dir", str(out)],
        )
        assert result.exit_code == 0
        assert "deviance=5.1258 df=2" in result.stdout
        doc = json.loads((out / "fit.json").read_text())
        assert doc["df"] == 2
        assert doc["deviance"] == pytest.approx(5.1258, abs=1e-3)
        assert doc["bic"] == pytest.approx(-9.728, abs=1e-2)
        assert doc["converged"] is True
        assert len(doc["fitted"]) == 72
        assert doc["gamma"] is not None

    def test_stdout_document_carries_manifest(self, runner):
        result = runner.invoke(
            main,
            ["fit", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
             "--graph", HOUSING_GRAPH],
        )
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert doc["kind"] == "fit"
        assert doc["manifest"]["inputs"]["graph"]["sha256"]
        assert "deviance=" in result.stderr

    def test_iteration_cap_exits_4(self, runner):
        result = runner.invoke(
            main,
            ["fit", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
             "--graph", HOUSING_GRAPH, "--max-iter", "1"],
        )
        assert result.exit_code == 4
        assert "converged=false" in result.stderr

    def test_expanded_graph_fit(self, runner):
        result = runner.invoke(
            main,
            ["fit", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
             "--graph", HOUSING_EXPANDED],
        )
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert doc["df"] == 23
        assert doc["deviance"] == pytest.approx(34.344, abs=1e-2)

    def test_missing_graph_is_usage_error(self, runner):
        result = runner.invoke(main, ["fit", "--counts", HOUSING])
        assert result.exit_code == 2


class TestCheck:
    def test_counts_mode_lists_constraints_largest_first(self, runner):
        result = runner.invoke(
            main,
            ["check", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
             "--graph", HOUSING_GRAPH],
        )
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert doc["kind"] == "check"
        assert doc["n_constraints"] == 2
        values = [abs(r["value"]) for r in doc["violations"]]
        assert values == sorted(values, reverse=True)
        assert doc["violations"][0]["value"] == pytest.approx(-0.0681, abs=1e-3)

    def test_prob_mode_round_trips_transform_output(self, runner, tmp_path):
        out = tmp_path / "t"
        assert runner.invoke(
            main,
            ["transform", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
             "--direction", "lml", "--out-dir", str(out)],
        ).exit_code == 0
        result = runner.invoke(
            main,
            ["check", "--prob", str(out / "transform.json"),
             "--graph", HOUSING_GRAPH],
        )
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert doc["n_constraints"] == 2

    def test_both_sources_rejected(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["check", "--counts", HOUSING, "--prob", HOUSING,
             "--graph", HOUSING_GRAPH],
        )
        assert result.exit_code == 2

    def test_loose_tolerance_passes_everything(self, runner):
        result = runner.invoke(
            main,
            ["check", "--counts", HOUSING, "--schema", HOUSING_SCHEMA,
             "--graph", HOUSING_GRAPH, "--tol", "1.0"],
        )
        doc = json.loads(result.stdout)
        assert doc["all_within_tol"] is True


class TestSearch:
    def test_small_search_stdout(self, runner, tmp_path):
        counts = write_small_csv(tmp_path / "pair.csv")
        result = runner.invoke(main, ["search", "--counts", counts])
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert doc["kind"] == "search"
        assert doc["n_orderings"] == 2
        assert sum(1 for r in doc["orderings"] if r["selected"]) == 1
        assert {"kind", "ordering"} <= set(doc["trace"][0])

    def test_artifacts_and_byte_identical_reruns(self, runner, tmp_path):
        counts = write_small_csv(tmp_path / "pair.csv")
        outs = []
        for name in ("one", "two"):
            out = tmp_path / name
            result = runner.invoke(
                main,
                ["search", "--counts", counts, "--alpha", "0.1",
                 "--out-dir", str(out)],
            )
            assert result.exit_code == 0
            outs.append(out)
        files = ["search.json", "graph.json", "graph.dot", "trace.jsonl",
                 "manifest.json"]
        for fname in files:
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
        manifest = json.loads((outs[0] / "manifest.json").read_text())
        assert manifest["outputs"] == files
        dot = (outs[0] / "graph.dot").read_text()
        assert dot.startswith("graph")
        trace_rows = [
            json.loads(line)
            for line in (outs[0] / "trace.jsonl").read_text().splitlines()
        ]
        assert any(r["kind"] == "ordering" for r in trace_rows)

    def test_expand_flag_with_baseline(self, runner, tmp_path):
        counts = write_small_csv(tmp_path / "pair.csv")
        result = runner.invoke(
            main, ["search", "--counts", counts, "--expand", "b:y"]
        )
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        spec = next(v for v in doc["schema"]["vars"] if v["id"] == "b")
        assert spec["levels"][spec["baseline"]] == "y"

    def test_orderings_flag_validation(self, runner, tmp_path):
        counts = write_small_csv(tmp_path / "pair.csv")
        for bad in ("zero", "0"):
            result = runner.invoke(
                main, ["search", "--counts", counts, "--orderings", bad]
            )
            assert result.exit_code == 2

    def test_budget_exceeded_is_data_error(self, runner, tmp_path):
        counts = write_small_csv(tmp_path / "pair.csv")
        result = runner.invoke(
            main, ["search", "--counts", counts, "--budget", "1"]
        )
        assert result.exit_code == 3
        assert "budget" in result.stderr


class TestMisc:
    def test_version_flag(self, runner):
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "lmlgraph" in result.stdout

    def test_graph_fit_on_small_data(self, runner, tmp_path):
        counts = write_small_csv(tmp_path / "pair.csv")
        graph = write_small_graph(tmp_path / "g.json")
        result = runner.invoke(
            main, ["fit", "--counts", counts, "--graph", graph]
        )
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert doc["df"] == 1
