"""Command-line surface tests: subcommands, exit codes, determinism."""

import json

import numpy as np
import pytest

from fairaudit.cli import main
from fairaudit.data import load_dataset, schema_from_file


@pytest.fixture()
def synth_files(tmp_path):
    data = tmp_path / "pop.csv"
    code = main(
        [
            "synth",
            "--n",
            "600",
            "--d",
            "3",
            "--delta",
            "0.5",
            "--seed",
            "4",
            "--out",
            str(data),
        ]
    )
    assert code == 0
    schema = data.with_suffix(".schema.toml")
    assert schema.exists()
    return data, schema


def run_audit_args(data, schema, out, extra=()):
    return [
        "run",
        "--data",
        str(data),
        "--schema",
        str(schema),
        "--k",
        "5",
        "--alpha",
        "0.05",
        "--seed",
        "7",
        "--iterations",
        "120",
        "--out",
        str(out),
        *extra,
    ]


class TestSynthCommand:
    def test_output_loads_through_ingestion(self, synth_files):
        data, schema = synth_files
        result = load_dataset(data, schema_from_file(schema))
        assert result.dataset.n == 600
        assert result.dropped == 0


class TestRunCommand:
    def test_writes_both_reports_and_exits_zero(self, synth_files, tmp_path, capsys):
        data, schema = synth_files
        out = tmp_path / "reports"
        code = main(run_audit_args(data, schema, out))
        assert code == 0
        assert (out / "report.json").exists()
        assert (out / "report.md").exists()
        printed = capsys.readouterr().out
        assert "accuracy" in printed
        assert "group_fairness" in printed

    def test_exit_zero_despite_violations(self, synth_files, tmp_path):
        # delta=0.5 data: violations expected, but verdicts never gate
        data, schema = synth_files
        code = main(run_audit_args(data, schema, tmp_path / "r1"))
        assert code == 0

    def test_fail_on_violation_opt_in(self, synth_files, tmp_path):
        data, schema = synth_files
        code = main(
            run_audit_args(data, schema, tmp_path / "r2", extra=("--fail-on-violation",))
        )
        assert code == 1

    def test_deterministic_reports_modulo_timestamp(self, synth_files, tmp_path):
        data, schema = synth_files
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        assert main(run_audit_args(data, schema, out1)) == 0
        assert main(run_audit_args(data, schema, out2)) == 0
        a = json.loads((out1 / "report.json").read_text())
        b = json.loads((out2 / "report.json").read_text())
        ts_a = a.pop("timestamp")
        ts_b = b.pop("timestamp")
        assert a == b
        # byte-identical apart from the timestamp line
        raw_a = (out1 / "report.json").read_text().replace(ts_a, "T")
        raw_b = (out2 / "report.json").read_text().replace(ts_b, "T")
        assert raw_a == raw_b

    def test_missing_inputs_is_exit_2(self, capsys):
        assert main(["run"]) == 2
        assert "provide --data" in capsys.readouterr().err

    def test_nonexistent_data_is_exit_2(self, tmp_path, capsys):
        schema = tmp_path / "s.toml"
        schema.write_text(
            'outcome_column = "outcome"\ngroup_column = "group"\n'
            'protected_value = "protected"\nunprotected_value = "unprotected"\n'
            '[[features]]\nname = "f0"\nkind = "numeric"\n'
        )
        code = main(
            ["run", "--data", str(tmp_path / "nope.csv"), "--schema", str(schema)]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_k_larger_than_dataset_is_exit_2(self, synth_files, tmp_path, capsys):
        data, schema = synth_files
        code = main(
            [
                "run",
                "--data",
                str(data),
                "--schema",
                str(schema),
                "--k",
                "100000",
                "--out",
                str(tmp_path / "r3"),
            ]
        )
        assert code == 2

    def test_report_dir_env_var(self, synth_files, tmp_path, monkeypatch):
        data, schema = synth_files
        target = tmp_path / "envdir"
        monkeypatch.setenv("FAIRAUDIT_REPORT_DIR", str(target))
        args = run_audit_args(data, schema, "ignored")
        args = [a for a in args if a != "--out" and a != "ignored"]
        assert main(args) == 0
        assert (target / "report.json").exists()


class TestExternalPredictions:
    def make_predictions(self, tmp_path, n=320, folds=4, seed=5):
        rng = np.random.default_rng(seed)
        path = tmp_path / "preds.csv"
        lines = ["row_id,fold_id,y_true,y_pred,score,group"]
        for i in range(n):
            score = rng.random()
            y_pred = int(score >= 0.5)
            y_true = int(rng.random() < score)
            group = "protected" if rng.random() < 0.5 else "unprotected"
            lines.append(f"{i},{i % folds},{y_true},{y_pred},{score:.6f},{group}")
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_predictions_only_run(self, tmp_path, capsys):
        preds = self.make_predictions(tmp_path)
        out = tmp_path / "ext"
        code = main(
            ["run", "--predictions", str(preds), "--out", str(out), "--k", "4"]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        by_id = {v["metric"]: v for v in report["verdicts"]}
        assert by_id["causal_discrimination"]["verdict"] == "not_evaluable"
        assert by_id["fairness_through_awareness"]["verdict"] == "not_evaluable"
        assert by_id["group_fairness"]["verdict"] != "not_evaluable"
        assert report["model_id"].startswith("external:")

    def test_predictions_plus_data_enables_matching(self, synth_files, tmp_path):
        data, schema = synth_files
        # build a prediction file covering the synth dataset's rows
        from fairaudit.cv import make_folds, run_cv
        from fairaudit.model import TrainConfig, write_predictions_csv

        loaded = load_dataset(data, schema_from_file(schema)).dataset
        plan = make_folds(loaded, 4, seed=0)
        cv_result = run_cv(loaded, plan, TrainConfig(iterations=80))
        preds_path = tmp_path / "from_model.csv"
        write_predictions_csv(cv_result.predictions, preds_path)

        out = tmp_path / "both"
        code = main(
            [
                "run",
                "--predictions",
                str(preds_path),
                "--data",
                str(data),
                "--schema",
                str(schema),
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        by_id = {v["metric"]: v for v in report["verdicts"]}
        assert by_id["fairness_through_awareness"]["verdict"] != "not_evaluable"
        assert by_id["causal_discrimination"]["verdict"] == "not_evaluable"

    def test_malformed_prediction_file_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("row_id,fold_id,y_true,y_pred,score,group\n0,0,0,0,1.7,protected\n")
        assert main(["run", "--predictions", str(path)]) == 2
        assert "line 2" in capsys.readouterr().err


class TestValidateCommand:
    def test_valid_file(self, synth_files, capsys):
        data, schema = synth_files
        assert main(["validate", "--data", str(data), "--schema", str(schema)]) == 0
        assert "ok:" in capsys.readouterr().out

    def test_invalid_schema_exit_2(self, synth_files, tmp_path, capsys):
        data, _ = synth_files
        schema = tmp_path / "wrong.toml"
        schema.write_text(
            'outcome_column = "nope"\ngroup_column = "group"\n'
            'protected_value = "protected"\nunprotected_value = "unprotected"\n'
            '[[features]]\nname = "f0"\nkind = "numeric"\n'
        )
        assert main(["validate", "--data", str(data), "--schema", str(schema)]) == 2
        assert "nope" in capsys.readouterr().err
