import json

import numpy as np
import pytest

from blinkinfer.cli import main, read_posterior_json, read_trace_csv


def run(argv):
    return main(argv)


@pytest.fixture
def trace_file(tmp_path):
    out = tmp_path / "trace.csv"
    code = run(
        [
            "simulate", "--model", "single",
            "--fix", "alpha=0.8", "--fix", "beta=0.9",
            "--fix", "lambda=20", "--fix", "mu=2",
            "--n", "300", "--seed", "7", "--out", str(out),
        ]
    )
    assert code == 0
    return out


class TestSimulate:
    def test_writes_trace_and_truth(self, trace_file, tmp_path):
        trace = read_trace_csv(trace_file)
        assert len(trace) == 300
        truth = (tmp_path / "trace.truth.csv").read_text().splitlines()
        assert truth[0] == "t,state,on_fraction"
        assert len(truth) == 301

    def test_same_seed_identical_files(self, tmp_path):
        args = [
            "simulate", "--model", "ctmc",
            "--fix", "r_alpha=1", "--fix", "r_beta=0.5",
            "--fix", "lambda=20", "--fix", "mu=2",
            "--n", "100", "--seed", "3",
        ]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_zero_length_rejected(self, tmp_path, capsys):
        code = run(
            [
                "simulate", "--model", "single",
                "--fix", "alpha=0.1", "--fix", "beta=0.1",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--n", "0", "--out", str(tmp_path / "x.csv"),
            ]
        )
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_missing_parameters_rejected(self, tmp_path):
        code = run(
            [
                "simulate", "--model", "single",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--n", "10", "--out", str(tmp_path / "x.csv"),
            ]
        )
        assert code == 1


class TestInfer:
    def test_known_emissions_two_free_axes(self, trace_file, tmp_path):
        out = tmp_path / "post.json"
        code = run(
            [
                "infer", "--in", str(trace_file), "--model", "single",
                "--grid", "alpha=0.4:1:15", "--grid", "beta=0.5:1:15",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--out", str(out),
            ]
        )
        assert code == 0
        doc = read_posterior_json(out)
        assert doc["format_version"] == 1
        assert [ax["name"] for ax in doc["axes"]] == ["alpha", "beta"]
        assert len(doc["log_posterior"]) == 225
        assert set(doc["marginals"]) == {"alpha", "beta"}
        assert abs(doc["mode"]["alpha"] - 0.8) < 0.15
        levels = [entry["level"] for entry in doc["hpd"]]
        assert levels == [0.5, 0.9, 0.99]

    def test_round_trip_bytes(self, trace_file, tmp_path):
        out = tmp_path / "post.json"
        run(
            [
                "infer", "--in", str(trace_file), "--model", "single",
                "--grid", "alpha=0.4:1:8", "--grid", "beta=0.5:1:8",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--out", str(out),
            ]
        )
        raw = out.read_bytes()
        doc = json.loads(raw)
        again = (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()
        assert raw == again

    def test_rerun_identical_bytes(self, trace_file, tmp_path):
        args = [
            "infer", "--in", str(trace_file), "--model", "single",
            "--grid", "alpha=0.4:1:8", "--grid", "beta=0.5:1:8",
            "--fix", "lambda=20", "--fix", "mu=2",
        ]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run(args + ["--out", str(a)])
        run(args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_multistep_reports_chosen_d(self, tmp_path, capsys):
        tr = tmp_path / "t.csv"
        run(
            [
                "simulate", "--model", "ctmc",
                "--fix", "r_alpha=2", "--fix", "r_beta=2",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--n", "150", "--seed", "5", "--out", str(tr),
            ]
        )
        capsys.readouterr()
        out = tmp_path / "post.json"
        code = run(
            [
                "infer", "--in", str(tr), "--model", "multistep",
                "--grid", "r_alpha=0.5:4:6", "--grid", "r_beta=0.5:4:6",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--out", str(out),
            ]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        # largest grid rates are (4, 4): product 16 needs 0.1 * 2^(2m) > 16,
        # first m is 4, so d = 16
        assert "d: 16" in stdout
        assert read_posterior_json(out)["d"] == 16

    def test_missing_file_rejected(self, tmp_path):
        code = run(
            [
                "infer", "--in", str(tmp_path / "nope.csv"), "--model", "single",
                "--grid", "alpha=0:1:5", "--grid", "beta=0:1:5",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--out", str(tmp_path / "p.json"),
            ]
        )
        assert code == 1

    def test_grid_model_mismatch_rejected(self, trace_file, tmp_path):
        code = run(
            [
                "infer", "--in", str(trace_file), "--model", "single",
                "--grid", "r_alpha=0:4:5", "--grid", "r_beta=0:4:5",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--out", str(tmp_path / "p.json"),
            ]
        )
        assert code == 1


class TestInferState:
    def test_writes_probability_column(self, trace_file, tmp_path):
        out = tmp_path / "states.csv"
        code = run(
            [
                "infer-state", "--in", str(trace_file), "--model", "single",
                "--grid", "alpha=0.4:1:8", "--grid", "beta=0.5:1:8",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--out", str(out),
            ]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,p_on"
        assert len(lines) == 301
        values = np.array([float(line.split(",")[1]) for line in lines[1:]])
        assert np.all(values >= 0) and np.all(values <= 1)

    def test_rerun_identical(self, trace_file, tmp_path):
        args = [
            "infer-state", "--in", str(trace_file), "--model", "single",
            "--grid", "alpha=0.4:1:6", "--grid", "beta=0.5:1:6",
            "--fix", "lambda=20", "--fix", "mu=2",
        ]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(args + ["--out", str(a)])
        run(args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_non_single_model_rejected(self, trace_file, tmp_path):
        code = run(
            [
                "infer-state", "--in", str(trace_file), "--model", "ctmc",
                "--grid", "r_alpha=0:4:5", "--grid", "r_beta=0:4:5",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--out", str(tmp_path / "s.csv"),
            ]
        )
        assert code == 1


class TestThreshold:
    def test_sweep_table(self, tmp_path):
        tr = tmp_path / "t.csv"
        run(
            [
                "simulate", "--model", "single",
                "--fix", "alpha=0.02", "--fix", "beta=0.05",
                "--fix", "lambda=30", "--fix", "mu=2",
                "--n", "4000", "--seed", "9", "--out", str(tr),
            ]
        )
        out = tmp_path / "sweep.csv"
        code = run(
            [
                "threshold", "--in", str(tr),
                "--thresholds", "15:24", "--bins", "8:12",
                "--summary", "17:21", "--out", str(out),
            ]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        comments = [line for line in lines if line.startswith("#")]
        assert any("midpoint_of_peaks" in line for line in comments)
        assert any("summary_range" in line for line in comments)
        header_at = lines.index("threshold,bins,alpha_hat,beta_hat")
        assert len(lines) - header_at - 1 == 50

    def test_requires_ranges(self, trace_file, tmp_path):
        code = run(
            ["threshold", "--in", str(trace_file), "--out", str(tmp_path / "s.csv")]
        )
        assert code == 1


class TestCtmcCli:
    def test_ctmc_with_quad_nodes_and_levels(self, tmp_path, capsys):
        tr = tmp_path / "t.csv"
        run(
            [
                "simulate", "--model", "ctmc",
                "--fix", "r_alpha=2", "--fix", "r_beta=2",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--n", "400", "--seed", "6", "--out", str(tr),
            ]
        )
        out = tmp_path / "post.json"
        code = run(
            [
                "infer", "--in", str(tr), "--model", "ctmc",
                "--grid", "r_alpha=0.5:4:15", "--grid", "r_beta=0.5:4:15",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--quad-nodes", "48", "--levels", "0.6,0.95",
                "--out", str(out),
            ]
        )
        assert code == 0
        doc = read_posterior_json(out)
        assert [e["level"] for e in doc["hpd"]] == [0.6, 0.95]
        # mode lands in the right neighbourhood of the truth (2, 2)
        assert 1.0 <= doc["mode"]["r_alpha"] <= 3.5
        assert 1.0 <= doc["mode"]["r_beta"] <= 3.5

    def test_quad_nodes_rejected_for_single(self, trace_file, tmp_path):
        code = run(
            [
                "infer", "--in", str(trace_file), "--model", "single",
                "--grid", "alpha=0:1:5", "--grid", "beta=0:1:5",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--quad-nodes", "32", "--out", str(tmp_path / "p.json"),
            ]
        )
        assert code == 1

    def test_d_rejected_for_ctmc(self, trace_file, tmp_path):
        code = run(
            [
                "infer", "--in", str(trace_file), "--model", "ctmc",
                "--grid", "r_alpha=0:4:5", "--grid", "r_beta=0:4:5",
                "--fix", "lambda=20", "--fix", "mu=2",
                "--d", "8", "--out", str(tmp_path / "p.json"),
            ]
        )
        assert code == 1


class TestThresholdDeterminism:
    def test_rerun_identical(self, tmp_path):
        tr = tmp_path / "t.csv"
        run(
            [
                "simulate", "--model", "single",
                "--fix", "alpha=0.02", "--fix", "beta=0.05",
                "--fix", "lambda=30", "--fix", "mu=2",
                "--n", "3000", "--seed", "9", "--out", str(tr),
            ]
        )
        args = [
            "threshold", "--in", str(tr),
            "--thresholds", "15:24", "--bins", "8:12",
            "--summary", "17:21",
        ]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(args + ["--out", str(a)])
        run(args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()
