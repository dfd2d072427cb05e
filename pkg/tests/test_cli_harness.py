import csv
import io
import json
import math
from pathlib import Path

import pytest

from disappointment_lab.cli_harness import (
    DISAPPOINT_COLUMNS, ExperimentConfig, PredictorSpec, main, render_rows
)
from disappointment_lab.errors import ConfigError
from disappointment_lab.models import PredictorKind
from disappointment_lab.schedules import ExponentialRate

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIGS = REPO_ROOT / "configs"
DEMO = str(REPO_ROOT / "scenarios" / "demo.json")
ABS_DEVIATION = str(REPO_ROOT / "scenarios" / "abs_deviation.json")
EXPONENTIAL = '{"family": "exponential", "r": 0.1}'


def read_rows(path):
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


def error_record(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    return json.loads(lines[-1])


class TestPredict:

    def test_demo_config(self, tmp_path):
        out = tmp_path / "predict.csv"
        code = main(["predict", "--config", str(CONFIGS / "demo_predict.json"), "--scenario", DEMO, "--out", str(out)])
        assert code == 0
        rows = read_rows(out)
        assert len(rows) == 8
        assert [row['decision'] for row in rows] == ["A"] * 4 + ["B"] * 4
        svp_b, = [row for row in rows if row['decision'] == "B" and row['predictor'] == "svp"]
        assert float(svp_b['value']) == pytest.approx(0.6, abs=1e-12)
        assert svp_b['condition_ok'] == "true"
        assert [float(w) for w in svp_b['worst_case'].split(";")] == pytest.approx([0.4, 0.6], abs=1e-12)
        robust_b, = [row for row in rows if row['decision'] == "B" and row['predictor'] == "robust"]
        assert float(robust_b['value']) == 1.0
        assert robust_b['T'] == "100"

    def test_json_output(self, tmp_path):
        out = tmp_path / "predict.json"
        code = main([
            "predict", "--scenario", DEMO, "--predictor", "saa", "--predictor", "kl", "--schedule", EXPONENTIAL,
            "--counts", "5", "5", "--format", "json", "--out", str(out)
        ])
        assert code == 0
        records = json.loads(out.read_text())
        assert [record['predictor'] for record in records] == ["saa", "kl", "saa", "kl"]
        assert records[3]['value'] == pytest.approx((1 + math.sqrt(1 - math.exp(-0.2))) / 2, abs=1e-9)
        assert records[0]['schema_version'] == 1
        assert records[0]['condition_ok'] is None

    def test_reruns_are_byte_identical(self, tmp_path):
        outputs = []
        for name in ("first.csv", "second.csv"):
            out = tmp_path / name
            main(["predict", "--config", str(CONFIGS / "demo_predict.json"), "--scenario", DEMO, "--out", str(out)])
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_malformed_scenario(self, tmp_path, capsys):
        scenario = tmp_path / "broken.json"
        scenario.write_text('{"schema_version": 1,\n "loss": [[0, 1]\n')
        out = tmp_path / "never.csv"
        code = main(["predict", "--scenario", str(scenario), "--predictor", "saa", "--out", str(out)])
        assert code == 2
        record = error_record(capsys)
        assert record['error'] == "ScenarioParseError"
        assert record['exit_code'] == 2
        assert not out.exists()

    def test_missing_predictors(self, capsys):
        assert main(["predict", "--scenario", DEMO]) == 2
        assert error_record(capsys)['field'] == "predictors"


class TestPrescribe:

    def test_demo_config(self, tmp_path):
        out = tmp_path / "prescribe.csv"
        code = main(["prescribe", "--config", str(CONFIGS / "demo_prescribe.json"), "--scenario", DEMO,
                     "--out", str(out)])
        assert code == 0
        rows = {row['predictor']: row for row in read_rows(out)}
        assert rows['saa']['decision'] == "A"
        assert rows['svp']['decision'] == "A"
        assert float(rows['svp']['value']) == pytest.approx(0.5)
        assert float(rows['svp']['gap_lower']) == 0.0
        assert float(rows['svp']['gap_upper']) == 0.0
        assert rows['saa']['gap_lower'] == ""
        assert rows['robust']['decision'] == "A"


class TestDisappoint:

    def test_exact_probabilities(self, tmp_path):
        out = tmp_path / "disappoint.csv"
        code = main([
            "disappoint", "--scenario", DEMO, "--predictor", "saa", "--predictor", "robust", "--schedule",
            EXPONENTIAL, "--T", "2", "4", "--decision", "B", "--method", "exact", "--out", str(out)
        ])
        assert code == 0
        rows = read_rows(out)
        assert [(row['T'], row['predictor']) for row in rows] == [
            ("2", "saa"), ("2", "robust"), ("4", "saa"), ("4", "robust")
        ]
        assert float(rows[0]['probability']) == pytest.approx(0.25, abs=1e-12)
        assert float(rows[0]['rate']) == pytest.approx(math.log(0.25) / 0.2, abs=1e-9)
        assert rows[0]['std_err'] == ""
        assert rows[1]['probability'] == "0.0"
        assert rows[1]['rate'] == "-inf"
        assert rows[1]['log_probability'] == "-inf"
        assert rows[0]['mode'] == "prediction"
        assert rows[0]['method'] == "exact"

    def test_monte_carlo_needs_a_seed(self, capsys):
        code = main(["disappoint", "--scenario", DEMO, "--predictor", "saa", "--schedule", EXPONENTIAL, "--T", "10",
                     "--decision", "B", "--method", "mc"])
        assert code == 2
        assert error_record(capsys)['field'] == "seed"

    def test_lattice_cap(self, tmp_path, capsys):
        out = tmp_path / "never.csv"
        code = main(["disappoint", "--scenario", DEMO, "--predictor", "saa", "--schedule", EXPONENTIAL, "--T", "50",
                     "--decision", "B", "--method", "exact", "--cap", "10", "--out", str(out)])
        assert code == 1
        record = error_record(capsys)
        assert record['error'] == "LatticeTooLargeError"
        assert record['suggested_method'] == "importance"
        assert record['cap'] == 10
        assert not out.exists()

    def test_prediction_mode_needs_a_decision(self, capsys):
        code = main(["disappoint", "--scenario", DEMO, "--predictor", "saa", "--schedule", EXPONENTIAL, "--T", "2"])
        assert code == 2
        assert error_record(capsys)['field'] == "decision"

    def test_prescription_mode(self, tmp_path):
        out = tmp_path / "prescription.json"
        code = main(["disappoint", "--scenario", DEMO, "--predictor", "saa", "--schedule", EXPONENTIAL, "--T", "2",
                     "--mode", "prescription", "--format", "json", "--out", str(out)])
        assert code == 0
        record, = json.loads(out.read_text())
        assert record['decision'] is None
        assert record['probability'] == pytest.approx(0.25, abs=1e-12)


class TestConvexity:

    def test_sweep(self, tmp_path):
        out = tmp_path / "convexity.csv"
        code = main(["convexity", "--config", str(CONFIGS / "convexity_sweep.json"), "--scenario", ABS_DEVIATION,
                     "--out", str(out)])
        assert code == 0
        rows = read_rows(out)
        assert [row['threshold_ok'] for row in rows] == ["false", "false", "false", "true"]
        violations = [int(row['midpoint_violations']) for row in rows]
        assert violations[0] > 0 and violations[1] > 0
        assert violations[2:] == [0, 0]
        assert rows[0]['a_T'] == ""

    def test_empty_ratio_list(self, tmp_path, capsys):
        config = tmp_path / "empty.json"
        config.write_text(json.dumps({'schema_version': 1, 'scenario': ABS_DEVIATION, 'ratios': []}))
        assert main(["convexity", "--config", str(config)]) == 2
        assert error_record(capsys)['field'] == "ratios"

    def test_counts_give_a_T(self, tmp_path):
        out = tmp_path / "convexity.csv"
        code = main(["convexity", "--scenario", ABS_DEVIATION, "--counts", "2", "2", "2", "2", "2", "--ratio", "0.01",
                     "--out", str(out)])
        assert code == 0
        row, = read_rows(out)
        assert float(row['a_T']) == pytest.approx(0.1)


class TestExperimentConfig:

    def test_unknown_field(self):
        with pytest.raises(ConfigError) as raised:
            ExperimentConfig.from_document({'schema_version': 1, 'seeds': 3})
        assert raised.value.field == 'seeds'

    def test_schema_version(self):
        with pytest.raises(ConfigError) as raised:
            ExperimentConfig.from_document({'schema_version': 2})
        assert raised.value.field == 'schema_version'

    def test_flags_override_the_file(self):
        config = ExperimentConfig.load(CONFIGS / "svp_importance.json")
        merged = config.merged({'seed': 7, 'method': None, 'T_list': [10]})
        assert merged.seed == 7
        assert merged.method == "importance"
        assert merged.T_list == [10]
        assert config.seed == 20240611

    def test_predictor_entries(self):
        spec = PredictorSpec.from_input({'kind': 'kl', 'schedule': {'family': 'exponential', 'r': 0.1}})
        assert spec.kind is PredictorKind.KL
        assert spec.schedule == ExponentialRate(0.1)
        with pytest.raises(ConfigError):
            PredictorSpec.from_input({'kind': 'kl', 'radius': 0.1})
        with pytest.raises(ConfigError):
            PredictorSpec.from_input("bayes")

    @pytest.mark.parametrize("overrides", [
        {'n_samples': 0}, {'seed': 1.5}, {'margin': -1}, {'format': 'xml'}, {'empirical_counts': [1, -1]},
        {'mode': 'both'}, {'method': 'bootstrap'},
    ])
    def test_invalid_values(self, overrides):
        with pytest.raises(ConfigError):
            ExperimentConfig().merged(overrides)

    def test_counts_and_sample_size_must_agree(self, demo):
        config = ExperimentConfig().merged({'empirical_counts': [3, 1], 'sample_size': 5})
        with pytest.raises(ConfigError):
            config.empirical(demo)


class TestRenderRows:

    def test_csv_and_json_share_columns(self):
        row = {'schema_version': 1, 'T': 2, 'rate': -math.inf, 'probability': 0.0, 'std_err': None}
        text = render_rows([row], DISAPPOINT_COLUMNS)
        header, values = text.splitlines()
        assert header.split(",") == list(DISAPPOINT_COLUMNS)
        parsed, = csv.DictReader(io.StringIO(text))
        assert parsed['rate'] == "-inf"
        assert parsed['std_err'] == ""
        record, = json.loads(render_rows([row], DISAPPOINT_COLUMNS, "json"))
        assert list(record) == list(DISAPPOINT_COLUMNS)
        assert record['rate'] == "-inf"
        assert record['std_err'] is None
        assert text.endswith("\n")
