"""
Tests for the experiment harness, result files and the command line
"""
import glob
import json
import logging
import os
import sys
import xml.etree.ElementTree as ET

import pytest
from pydantic import ValidationError

sys.path.insert(0, os.path.dirname(__file__))
os.environ.setdefault("PERCTRUNC_ENVIRONMENT", "testing")

from cli import EXIT_IO, EXIT_OK, EXIT_UNSATISFIABLE, EXIT_VALIDATION, main
from errors import DomainError, ResultFileError
from harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    Operation,
    SweepSpec,
    emit_plot,
    load_config,
    read_csv,
    run,
    sweep,
    write_csv,
)
from logging_config import setup_logging

SVG_NS = "{http://www.w3.org/2000/svg}"


def oriented_config(**overrides):
    data = dict(operation="simulate-oriented", seq="const:p=0.6", K=2, H=10, trials=30, seed=5, workers=1)
    data.update(overrides)
    return ExperimentConfig(**data)


class TestExperimentConfig:
    """Test config validation"""

    def test_epsilon_out_of_range(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(operation="block-params", seq="const:p=0.5", epsilon=1.5)

    def test_missing_required(self):
        with pytest.raises(ValidationError, match="needs"):
            ExperimentConfig(operation="simulate-oriented", seq="invsqrt", K=4)

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            oriented_config(colour="red")

    def test_bad_sequence(self):
        with pytest.raises(ValidationError):
            oriented_config(seq="const:p=2")

    def test_axis_not_sweepable(self):
        with pytest.raises(ValidationError):
            oriented_config(sweep={"axis": "epsilon", "values": [0.1, 0.2]})

    def test_height_names_oriented_level(self):
        config = ExperimentConfig(operation="simulate-oriented", seq="invsqrt", K=4, height=7)
        assert config.H == 7
        assert config.height is None

    def test_height_conflicts_with_H(self):
        with pytest.raises(ValidationError, match="disagree"):
            oriented_config(height=3)

    def test_swept_axis_not_required(self):
        config = ExperimentConfig(operation="simulate-oriented", seq="invsqrt", H=10,
                                  sweep={"axis": "K", "values": [1, 2]})
        assert config.K is None

    @pytest.mark.parametrize("values", [[4, 2], [2, 2], [1.5, 3]])
    def test_monotone_axis_values(self, values):
        with pytest.raises(ValidationError):
            SweepSpec(axis="K", values=values)

    def test_echo_drops_output_locations(self):
        echo = oriented_config(output="out.json", csv="rows.csv").echo()
        assert "output" not in echo
        assert "workers" not in echo
        assert echo["operation"] == "simulate-oriented"

    def test_at_casts_integer_axes(self):
        moved = oriented_config(sweep={"axis": "K", "values": [1, 2]}).at("K", 8.0)
        assert moved.K == 8
        assert isinstance(moved.K, int)
        assert moved.sweep is None


class TestLoadConfig:
    """Test YAML experiment files"""

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "exp.yml"
        path.write_text("operation: kw\nseq: invsqrt\nl: 2\nL: 8\ntrials: 50\n")
        config = load_config(path, {"trials": 10})
        assert config.operation is Operation.KW
        assert config.trials == 10

    def test_sweep_merged(self, tmp_path):
        path = tmp_path / "exp.yml"
        path.write_text("operation: kw\nseq: invsqrt\nl: 2\nsweep:\n  axis: L\n  values: [4, 8]\n")
        config = load_config(path, {"sweep": {"values": [4, 16, 64]}})
        assert config.sweep.axis == "L"
        assert config.sweep.values == [4, 16, 64]

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "exp.yml"
        path.write_text("operation: [kw\n")
        with pytest.raises(DomainError):
            load_config(path)

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "exp.yml"
        path.write_text("- kw\n- kesten\n")
        with pytest.raises(DomainError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_config(tmp_path / "absent.yml")


class TestRun:
    """Test single experiments"""

    def test_oriented_payload(self):
        record = run(oriented_config())
        payload = record.payload
        assert set(payload) == {"model", "seq", "K", "H", "d", "trials", "successes", "estimate", "ci", "seed",
                                "generator_version"}
        assert payload["trials"] == 30
        assert payload["ci"][0] <= payload["estimate"] <= payload["ci"][1]
        assert payload["generator_version"] == f"{record.generator}/{record.encoding_version}"

    def test_reproducible(self):
        first = run(oriented_config())
        second = run(oriented_config())
        assert first.reproducible_json() == second.reproducible_json()
        assert "timing" not in json.loads(first.reproducible_json())

    def test_workers_not_recorded(self):
        one = run(oriented_config(workers=1))
        two = run(oriented_config(workers=2))
        assert one.reproducible_json() == two.reproducible_json()

    def test_block_params(self):
        record = run(ExperimentConfig(operation="block-params", seq="const:p=0.5", epsilon=0.3))
        bp = record.payload["block_params"]
        assert (bp["k"], bp["M"], bp["K"]) == (1, 9, 20)
        assert record.payload["prob_T"] >= 0.7

    def test_analyze(self):
        record = run(ExperimentConfig(operation="analyze", seq="remark-p", horizon=3**6, max_shift=2))
        assert record.payload["support_min"] == 3
        assert record.payload["spec"] == "remark-p"

    def test_kesten(self):
        record = run(ExperimentConfig(operation="kesten", pv=0.0, ph=1.0, n=6, trials=5, workers=1))
        assert record.payload["estimate"] == 1.0
        assert "wall_time" not in record.payload

    def test_thm2(self):
        record = run(ExperimentConfig(operation="aniso-thm2", seq="const:p=0.5", delta=0.5, N=1, epsilon=0.3,
                                      box=4, trials=5, workers=1))
        assert record.payload["violations"] == 0
        assert record.payload["params"]["K"] == 12

    def test_thm3(self):
        record = run(ExperimentConfig(operation="aniso-thm3", seq="invsqrt", delta=0.9, epsilon=0.5, eta=1.0,
                                      threshold=0.5, window=7, height=2, trials=4, workers=1))
        assert record.payload["violations"] == 0
        assert record.payload["params"]["ell"] >= 1
        assert "wall_time" not in record.payload["estimate"]

    def test_write(self, tmp_path):
        record = run(oriented_config())
        path = tmp_path / "nested" / "out.json"
        record.write(path)
        data = json.loads(path.read_text())
        assert data["schema_version"] == 1
        assert data["config"]["seq"] == "const:p=0.6"


class TestSweep:
    """Test sweeps and their result files"""

    def test_coupled_truncation_sweep(self):
        record = run(oriented_config(seq="powlaw:c=0.5,alpha=0.5", H=15, trials=60,
                                     sweep={"axis": "K", "values": [1, 4, 16]}))
        assert record.payload["monotonicity_violations"] == 0
        assert [row["value"] for row in record.rows] == [1, 4, 16]
        estimates = [row["estimate"] for row in record.rows]
        assert estimates == sorted(estimates)

    def test_height_sweep(self):
        record = sweep(oriented_config(sweep={"axis": "H", "values": [2, 5, 10]}))
        estimates = [row["estimate"] for row in record.rows]
        assert estimates == sorted(estimates, reverse=True)
        assert record.payload["monotonicity_violations"] == 0

    def test_kw_sweep(self):
        record = run(ExperimentConfig(operation="kw", seq="powlaw:c=0.3,alpha=1", l=2, trials=40, workers=1,
                                      sweep={"axis": "L", "values": [2, 8, 32]}))
        assert record.payload["points"] == 3
        assert record.payload["monotonicity_violations"] == 0

    def test_point_sweep(self):
        record = run(ExperimentConfig(operation="kesten", pv=0.3, n=6, trials=10, workers=1,
                                      sweep={"axis": "ph", "values": [0.0, 1.0]}))
        assert [row["estimate"] for row in record.rows] == [0.0, 1.0]

    def test_sweep_needs_spec(self):
        with pytest.raises(DomainError):
            sweep(oriented_config())

    def test_csv_round_trip(self, tmp_path):
        record = run(oriented_config(sweep={"axis": "K", "values": [1, 2, 4, 8]}))
        path = tmp_path / "rows.csv"
        write_csv(record.rows, path)
        frame = read_csv(path)
        assert list(frame.columns) == CSV_COLUMNS
        assert len(frame) == 4


class TestReadCsv:
    """Test result-file errors"""

    def test_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ResultFileError):
            read_csv(path)

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("value,estimate\n1,0.5\n")
        with pytest.raises(ResultFileError):
            read_csv(path)

    def test_header_only(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(",".join(CSV_COLUMNS) + "\n")
        with pytest.raises(ResultFileError):
            read_csv(path)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("value,estimate,ci_lo,ci_hi\n1,high,0.1,0.9\n")
        with pytest.raises(ResultFileError):
            read_csv(path)


class TestPlot:
    """Test SVG output"""

    @pytest.fixture
    def csv_path(self, tmp_path):
        rows = [
            {"axis": "K", "value": v, "estimate": e, "ci_lo": max(e - 0.1, 0.0), "ci_hi": min(e + 0.1, 1.0),
             "trials": 100, "successes": int(e * 100), "violations": 0}
            for v, e in ((2, 0.2), (8, 0.4), (32, 0.6), (128, 0.7))
        ]
        path = tmp_path / "sweep.csv"
        write_csv(rows, path)
        return path

    def test_one_marker_per_row(self, csv_path, tmp_path):
        svg = emit_plot(csv_path, tmp_path / "sweep.svg")
        root = ET.parse(svg).getroot()
        group = next(el for el in root.iter() if el.get("id") == "estimates")
        assert len(list(group.iter(f"{SVG_NS}use"))) == 4

    def test_deterministic(self, csv_path, tmp_path):
        a = emit_plot(csv_path, tmp_path / "a.svg").read_bytes()
        b = emit_plot(csv_path, tmp_path / "b.svg").read_bytes()
        assert a == b


class TestCli:
    """Test the command line surface and its exit codes"""

    def test_simulate(self, capsys):
        code = main(["simulate", "oriented", "--seq", "const:p=1", "--K", "1", "--H", "5", "--trials", "5",
                     "--seed", "1", "--workers", "1"])
        assert code == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data["payload"]["estimate"] == 1.0

    def test_simulate_with_height_flag(self, capsys):
        code = main(["simulate", "oriented", "--seq", "const:p=1", "--K", "1", "--height", "3", "--trials", "2",
                     "--workers", "1"])
        assert code == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data["payload"]["H"] == 3
        assert data["payload"]["estimate"] == 1.0

    def test_logging_filters_installed_once(self, capsys):
        assert main(["kesten", "--pv", "0", "--ph", "1", "--n", "4", "--trials", "2", "--workers", "1"]) == EXIT_OK
        counts = [sum(type(f).__name__ == "ContextFilter" for f in h.filters) for h in logging.getLogger().handlers]
        assert max(counts) == 1
        setup_logging("WARNING")

    def test_output_file(self, tmp_path, capsys):
        out = tmp_path / "run.json"
        code = main(["kw", "--seq", "const:p=1", "--l", "2", "--L", "4", "--trials", "3", "--workers", "1",
                     "--output", str(out)])
        assert code == EXIT_OK
        assert json.loads(out.read_text())["operation"] == "kw"

    def test_config_file_with_override(self, tmp_path, capsys):
        path = tmp_path / "exp.yml"
        path.write_text("operation: kesten\npv: 0.0\nph: 1.0\nn: 4\ntrials: 50\nworkers: 1\n")
        assert main(["kesten", "--config", str(path), "--trials", "3"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["payload"]["trials"] == 3

    def test_sweep_writes_csv(self, tmp_path, capsys):
        csv = tmp_path / "rows.csv"
        code = main(["sweep", "--operation", "simulate-oriented", "--axis", "K", "--values", "1,2",
                     "--seq", "const:p=0.6", "--H", "5", "--trials", "10", "--workers", "1", "--csv", str(csv)])
        assert code == EXIT_OK
        assert len(read_csv(csv)) == 2

    def test_sweep_without_axis(self, capsys):
        code = main(["sweep", "--operation", "kesten", "--pv", "0.3", "--ph", "0.5", "--n", "4", "--trials", "2"])
        assert code == EXIT_VALIDATION

    def test_epsilon_validation(self, capsys):
        code = main(["block-params", "--seq", "const:p=0.5", "--epsilon", "1.5"])
        assert code == EXIT_VALIDATION
        assert "ValidationError" in capsys.readouterr().err

    def test_unsatisfiable(self, capsys):
        code = main(["block-params", "--seq", "const:p=0", "--epsilon", "0.3", "--horizon", "50"])
        assert code == EXIT_UNSATISFIABLE
        assert "UnsatisfiableParameters" in capsys.readouterr().err

    def test_missing_csv(self, tmp_path, capsys):
        assert main(["plot", str(tmp_path / "absent.csv"), str(tmp_path / "out.svg")]) == EXIT_IO

    def test_empty_csv(self, tmp_path, capsys):
        path = tmp_path / "empty.csv"
        path.write_text("")
        assert main(["plot", str(path), str(tmp_path / "out.svg")]) == EXIT_IO

    def test_metrics_file(self, tmp_path, capsys):
        metrics = tmp_path / "metrics.prom"
        code = main(["--metrics-out", str(metrics), "kesten", "--pv", "0", "--ph", "1", "--n", "4",
                     "--trials", "2", "--workers", "1"])
        assert code == EXIT_OK
        assert "perctrunc" in metrics.read_text()


class TestShippedExperiments:
    """Test the example experiment files"""

    @pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(os.path.dirname(__file__), "experiments", "*.yml"))))
    def test_validates(self, path):
        config = load_config(path)
        assert config.operation in Operation
