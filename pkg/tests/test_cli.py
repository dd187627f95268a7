"""Thin-client CLI: verbs, files written, exit codes, determinism."""

import json
import os

import numpy as np
import pytest
from starlette.testclient import TestClient

from canndyn import dumps_model_config, model_to_config
from canndyn.cli import main
from canndyn.service import app
from helpers import decay_model, dissipative_model, unstable_model


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(dumps_model_config(unstable_model()))
    return str(path)


@pytest.fixture
def outdir(tmp_path):
    out = tmp_path / "out"
    return str(out)


def read_json(outdir, name):
    with open(os.path.join(outdir, name)) as fh:
        return json.load(fh)


def read_csv_lines(outdir, name):
    with open(os.path.join(outdir, name)) as fh:
        return fh.read().splitlines()


class TestValidateVerb:
    def test_valid_model_exits_zero(self, model_file, outdir, capsys):
        code = main(["validate", "-m", model_file, "-o", outdir])
        assert code == 0
        assert read_json(outdir, "validation.json")["ok"] is True

    def test_invalid_model_exits_two(self, tmp_path, outdir, capsys):
        config = model_to_config(decay_model())
        config["mu"]["feedback"] = "linear"
        config["mu"]["feedback_coeff"] = -0.5
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(config))
        code = main(["validate", "-m", str(path), "-o", outdir,
                     "--e-range", "0", "10"])
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()[-1]
        assert json.loads(err)["error"] == "model_invalid"

    def test_malformed_document_exits_two(self, tmp_path, outdir, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{\"beta\": 1}")
        code = main(["validate", "-m", str(path), "-o", outdir])
        assert code == 2

    def test_missing_file_exits_four(self, outdir, capsys):
        code = main(["validate", "-m", "/does/not/exist.json", "-o", outdir])
        assert code == 4


class TestSteadyVerb:
    def test_writes_json_and_csv(self, model_file, outdir, capsys):
        code = main(["steady", "-m", model_file, "-o", outdir,
                     "--n0-bracket", "0", "2", "--fp-tol", "1e-9",
                     "--grid-cells", "300"])
        assert code == 0
        body = read_json(outdir, "steady.json")
        assert body["residual_R"] < 1e-9
        lines = read_csv_lines(outdir, "steady.csv")
        assert lines[0] == "s,n,E,M"
        assert len(lines) == 302

    def test_no_equilibrium_exits_three(self, tmp_path, outdir, capsys):
        path = tmp_path / "m.json"
        path.write_text(dumps_model_config(dissipative_model()))
        code = main(["steady", "-m", str(path), "-o", outdir,
                     "--n0-bracket", "1", "2"])
        assert code == 3
        err = capsys.readouterr().err.strip().splitlines()[-1]
        assert json.loads(err)["error"] == "solver_failed"


class TestStabilityVerb:
    def test_trivial_supercritical_is_not_dissipative(self, tmp_path, outdir, capsys):
        # beta(0) = 0.5 > mu = 0.3 somewhere: the pointwise criterion fails
        path = tmp_path / "m.json"
        path.write_text(dumps_model_config(decay_model(beta0=0.5, b=1.0, mu=0.3)))
        code = main(["stability", "-m", str(path), "-o", outdir, "--state", "trivial"])
        assert code == 0
        body = read_json(outdir, "stability.json")
        assert body["stable_by_dissipativity"] is False
        lines = read_csv_lines(outdir, "margin.csv")
        assert lines[0] == "s,margin"

    def test_state_from_saved_steady_file(self, model_file, tmp_path, outdir, capsys):
        code = main(["steady", "-m", model_file, "-o", outdir,
                     "--n0-bracket", "0", "2", "--grid-cells", "300"])
        assert code == 0
        code = main(["stability", "-m", model_file, "-o", outdir,
                     "--grid-cells", "300",
                     "--state", f"file:{os.path.join(outdir, 'steady.json')}"])
        assert code == 0
        assert read_json(outdir, "stability.json")["positivity_pos1"] is True


class TestSpectrumVerb:
    def test_scan_row_count_and_tail(self, model_file, outdir, capsys):
        code = main(["spectrum", "-m", model_file, "-o", outdir,
                     "--state", "solve", "--n0-bracket", "0", "2",
                     "--lambda-range", "-0.4", "5", "--scan", "200",
                     "--grid-cells", "300"])
        assert code == 0
        lines = read_csv_lines(outdir, "spectrum.csv")
        assert lines[0] == "lambda,K,L,a1,a2,a3,a4,a5,a6,a7,a8,a9"
        assert len(lines) == 201
        last_K = float(lines[-1].split(",")[1])
        assert abs(last_K - 1.0) < 0.25  # flattening toward the limit
        body = read_json(outdir, "spectrum.json")
        assert body["unstable_by_K0"] is True

    def test_every_csv_field_is_finite(self, model_file, outdir, capsys):
        main(["spectrum", "-m", model_file, "-o", outdir,
              "--state", "solve", "--n0-bracket", "0", "2",
              "--scan", "50", "--grid-cells", "250"])
        for line in read_csv_lines(outdir, "spectrum.csv")[1:]:
            assert all(np.isfinite(float(v)) for v in line.split(","))


class TestSimulateVerb:
    def test_linearized_run_writes_series_and_snapshots(self, model_file, outdir, capsys):
        code = main(["simulate", "-m", model_file, "-o", outdir,
                     "--state", "solve", "--n0-bracket", "0", "2",
                     "--mode", "linearized", "--t-end", "30",
                     "--record-every", "20", "--initial", "bump:2,0.6,1",
                     "--snapshot-times", "0", "15", "30",
                     "--grid-cells", "300", "--aeg-tol", "0.05"])
        assert code == 0
        lines = read_csv_lines(outdir, "sim.csv")
        assert lines[0] == ("t,norm,boundary,growth_window_rate,profile_distance,"
                            "mass_residual,min_value")
        for line in lines[1:]:
            assert all(np.isfinite(float(v)) for v in line.split(","))
        # snapshots land on the nearest step; files are named by actual time
        body = read_json(outdir, "sim.json")
        assert len(body["snapshots"]) == 3
        for snap in body["snapshots"]:
            assert os.path.exists(os.path.join(outdir, f"snapshot_t{snap['t']:g}.csv"))

    def test_initial_from_csv_file(self, model_file, tmp_path, outdir, capsys):
        ic = tmp_path / "ic.csv"
        s = np.linspace(0, 15, 40)
        with open(ic, "w") as fh:
            fh.write("s,n\n")
            for si, ni in zip(s, np.exp(-((s - 3) / 1.0) ** 2)):
                fh.write(f"{si},{ni}\n")
        code = main(["simulate", "-m", model_file, "-o", outdir,
                     "--mode", "nonlinear", "--t-end", "1",
                     "--initial", f"file:{ic}", "--grid-cells", "200"])
        assert code == 0

    def test_bad_initial_spec_exits_four(self, model_file, outdir, capsys):
        code = main(["simulate", "-m", model_file, "-o", outdir,
                     "--t-end", "1", "--initial", "wedge:1"])
        assert code == 4


class TestSweepVerb:
    def test_rows_and_failures(self, model_file, outdir, capsys):
        code = main(["sweep", "-m", model_file, "-o", outdir,
                     "--state", "solve", "--n0-bracket", "0", "2",
                     "--vary", "beta.params.0=0.5:1.02:2",
                     "--scan", "20", "--sim-t-end", "5",
                     "--grid-cells", "150"])
        assert code == 3  # subcritical point has no equilibrium
        lines = read_csv_lines(outdir, "sweep.csv")
        assert lines[0] == "beta.params.0,R0,margin,K0,rightmost_root,sim_growth_rate"
        assert len(lines) == 3
        assert lines[1].split(",")[1:] == [""] * 5  # failed point: blank fields
        err_lines = [json.loads(line) for line in
                     capsys.readouterr().err.strip().splitlines()]
        assert any(e.get("error") == "sweep_point_failed" for e in err_lines)

    def test_bad_vary_syntax_exits_four(self, model_file, outdir, capsys):
        code = main(["sweep", "-m", model_file, "-o", outdir,
                     "--vary", "beta.params.0"])
        assert code == 4

    def test_bad_vary_path_exits_four(self, model_file, outdir, capsys):
        code = main(["sweep", "-m", model_file, "-o", outdir,
                     "--vary", "beta.nope.0=0:1:2"])
        assert code == 4


class TestDeterminism:
    def test_identical_invocations_produce_identical_bytes(self, model_file, tmp_path, capsys):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        argv_tail = ["-m", model_file, "--state", "solve", "--n0-bracket", "0", "2",
                     "--lambda-range", "-0.4", "3", "--scan", "40",
                     "--grid-cells", "250"]
        assert main(["spectrum", "-o", out1] + argv_tail) == 0
        assert main(["spectrum", "-o", out2] + argv_tail) == 0
        for name in ("spectrum.json", "spectrum.csv"):
            with open(os.path.join(out1, name), "rb") as f1, \
                    open(os.path.join(out2, name), "rb") as f2:
                assert f1.read() == f2.read()


class TestRemoteDispatch:
    def test_server_mode_round_trips_through_http(self, model_file, outdir,
                                                  monkeypatch, capsys):
        import canndyn.cli as cli

        monkeypatch.setattr(cli, "_http_client",
                            lambda base_url: TestClient(app))
        code = main(["validate", "-m", model_file, "-o", outdir,
                     "--server", "http://testserver"])
        assert code == 0
        assert read_json(outdir, "validation.json")["ok"] is True

    def test_server_mode_maps_solver_errors(self, tmp_path, outdir,
                                            monkeypatch, capsys):
        import canndyn.cli as cli

        monkeypatch.setattr(cli, "_http_client",
                            lambda base_url: TestClient(app))
        path = tmp_path / "m.json"
        path.write_text(dumps_model_config(dissipative_model()))
        code = main(["steady", "-m", str(path), "-o", outdir,
                     "--n0-bracket", "1", "2", "--server", "http://testserver"])
        assert code == 3
