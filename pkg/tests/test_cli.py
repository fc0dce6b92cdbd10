import json

import numpy as np
import numpy.testing as npt
import pytest

from periplate.cli import main, prescribed_geometry
from periplate.config import ConfigError, SolverConfig, load_config
from periplate.integrator import CoefficientTrajectory
from periplate.reporting import load_checkpoint, save_checkpoint

BASE_CONFIG = """
[run]
mode = "fixpoint"
out_dir = "{out}"

[problem]
T = 1.0
kappa = 0.5
m = 0.0

[discretization]
n = 4
Nt = 32
x_nodes = 16
z_nodes = 12

[fixed_point]
omega = 0.5
tol = 1e-9
max_iter = 40
eps_cells = 2
sigma = 0.0

[[forcing.plate]]
time_k = 1
time_phase = "sin"
space_k = 1
space_phase = "cos"
amplitude = 1e-4
"""


def write_config(tmp_path, text=None, **fmt):
    cfg = tmp_path / "run.toml"
    out = fmt.pop("out", str(tmp_path / "out"))
    cfg.write_text((text or BASE_CONFIG).format(out=out, **fmt))
    return str(cfg)


class TestConfigValidation:
    def test_loads_defaults(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.n == 4 and cfg.nt == 32 and cfg.kappa == 0.5

    def test_named_field_errors(self, tmp_path):
        bad = BASE_CONFIG.replace('n = 4', 'n = 5')
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, text=bad))
        assert "discretization.n" in str(err.value)

    def test_kappa_range(self):
        with pytest.raises(ConfigError) as err:
            SolverConfig({"problem": {"kappa": 1.5}})
        assert "problem.kappa" in str(err.value)

    def test_eps_alignment(self):
        with pytest.raises(ConfigError) as err:
            SolverConfig({"fixed_point": {"eps_cells": 1}})
        assert "eps_cells" in str(err.value)

    def test_forcing_entry_validation(self):
        raw = {"forcing": {"plate": [{"time_k": 1, "time_phase": "tan",
                                      "space_phase": "cos", "amplitude": 1.0}]}}
        with pytest.raises(ConfigError) as err:
            SolverConfig(raw)
        assert "time_phase" in str(err.value)

    def test_geometry_amplitude_guard(self):
        raw = {"geometry": {"modes": [dict(time_k=1, time_phase="cos", space_k=1,
                                           space_phase="cos", amplitude=0.9)]}}
        with pytest.raises(ConfigError) as err:
            SolverConfig(raw)
        assert "amplitude" in str(err.value)

    def test_x_nodes_floor(self):
        raw = {"discretization": {"n": 8, "x_nodes": 6}}
        with pytest.raises(ConfigError) as err:
            SolverConfig(raw)
        assert "x_nodes" in str(err.value)


def test_prescribed_geometry_modes():
    raw = {
        "problem": {"m": 0.05},
        "discretization": {"n": 4, "Nt": 16},
        "geometry": {"modes": [dict(time_k=1, time_phase="cos", space_k=1,
                                    space_phase="sin", amplitude=0.1)]},
    }
    cfg = SolverConfig(raw)
    geom = prescribed_geometry(cfg)
    x = np.arange(16) / 16
    t = geom.times[3]
    expected = 0.05 + 0.1 * np.cos(2 * np.pi * t) * np.sin(2 * np.pi * x)
    npt.assert_allclose(geom.profiles[3].values(x), expected, atol=1e-13)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        times = np.linspace(0.0, 1.0, 17)
        traj = CoefficientTrajectory(times, rng.standard_normal((17, 4)),
                                     rng.standard_normal((17, 4)))
        path = str(tmp_path / "state.bin")
        save_checkpoint(path, traj, meta={"iteration": 7})
        back, meta = load_checkpoint(path)
        assert meta["iteration"] == 7
        npt.assert_array_equal(back.times, traj.times)
        npt.assert_array_equal(back.values, traj.values)
        npt.assert_array_equal(back.derivatives, traj.derivatives)

    def test_magic_guard(self, tmp_path, rng):
        times = np.linspace(0.0, 1.0, 5)
        traj = CoefficientTrajectory(times, np.zeros((5, 2)), np.zeros((5, 2)))
        path = str(tmp_path / "state.bin")
        save_checkpoint(path, traj)
        blob = open(path, "rb").read()
        open(path, "wb").write(b"X" + blob[1:])
        with pytest.raises(ValueError):
            load_checkpoint(path)


class TestRunModes:
    def test_selftest_mode(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code = main(["--config", cfg, "--mode", "selftest"])
        assert code == 0
        captured = capsys.readouterr()
        assert "PASS" in captured.out
        data = json.loads((tmp_path / "out" / "selftest.json").read_text())
        assert all(r["passed"] for r in data["results"])

    def test_fixpoint_mode_artifacts(self, tmp_path):
        cfg = write_config(tmp_path)
        code = main(["--config", cfg])
        assert code == 0
        out = tmp_path / "out"
        for name in ("fixpoint_report.json", "fixpoint_series.csv",
                     "fixpoint_energy.png", "fixpoint_balance.png",
                     "fixpoint_eta.png", "fixpoint_convergence.png",
                     "fixpoint_solution.bin", "fixpoint_solution.bin.json",
                     "checkpoint.bin"):
            assert (out / name).exists(), name
        report = json.loads((out / "fixpoint_report.json").read_text())
        assert report["converged"]
        assert report["periodicity_defect"] <= 1e-8

    def test_csv_format(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["--config", cfg]) == 0
        raw = (tmp_path / "out" / "fixpoint_series.csv").read_bytes()
        assert b"\r\n" in raw
        header = raw.split(b"\r\n")[0].decode()
        assert header == ("t,E,dissipation,power,residual,mean_eta,sup_eta,"
                          "periodicity_defect")
        # '.' decimal separator, no locale surprises
        assert b"," in raw and b";" not in raw

    def test_deterministic_rerun_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["--config", cfg]) == 0
        first = {p.name: p.read_bytes() for p in out.iterdir()
                 if p.suffix in (".json", ".csv", ".bin")}
        assert main(["--config", cfg]) == 0
        for name, blob in first.items():
            assert (out / name).read_bytes() == blob, name

    def test_checkpoint_resume_matches(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["--config", cfg_path]) == 0
        final = load_checkpoint(str(out / "fixpoint_solution.bin"))[0]

        # rerun with a max_iter budget that stops midway, then resume
        partial_toml = BASE_CONFIG.replace("max_iter = 40", "max_iter = 3")
        cfg2 = tmp_path / "partial.toml"
        cfg2.write_text(partial_toml.format(out=str(tmp_path / "p1")))
        main(["--config", str(cfg2)])  # non-converged exit tolerated
        resume_toml = (BASE_CONFIG + '\n').replace(
            "[fixed_point]",
            f'[fixed_point]\nresume = "{tmp_path / "p1" / "checkpoint.bin"}"')
        cfg3 = tmp_path / "resume.toml"
        cfg3.write_text(resume_toml.format(out=str(tmp_path / "p2")))
        assert main(["--config", str(cfg3)]) == 0
        resumed = load_checkpoint(str(tmp_path / "p2" / "fixpoint_solution.bin"))[0]
        npt.assert_array_equal(resumed.values, final.values)
        npt.assert_array_equal(resumed.derivatives, final.derivatives)

    def test_solve_mode(self, tmp_path):
        toml = BASE_CONFIG.replace('mode = "fixpoint"', 'mode = "solve"') + """
[[geometry.modes]]
time_k = 1
time_phase = "cos"
space_k = 1
space_phase = "cos"
amplitude = 0.05
"""
        cfg = tmp_path / "solve.toml"
        cfg.write_text(toml.format(out=str(tmp_path / "out")))
        assert main(["--config", str(cfg)]) == 0
        report = json.loads((tmp_path / "out" / "solve_report.json").read_text())
        assert report["extras"]["max_balance_residual"] < 1e-10

    def test_ladder_mode(self, tmp_path):
        toml = BASE_CONFIG.replace('mode = "fixpoint"', 'mode = "ladder"') + """
[[ladder.levels]]
n = 4
Nt = 32
eps_cells = 2
sigma = 0.0

[[ladder.levels]]
n = 4
Nt = 64
eps_cells = 2
sigma = 0.0
"""
        cfg = tmp_path / "ladder.toml"
        cfg.write_text(toml.format(out=str(tmp_path / "out")))
        assert main(["--config", str(cfg)]) == 0
        data = json.loads((tmp_path / "out" / "ladder.json").read_text())
        assert len(data["distances"]) == 1
        assert all(data["converged"])

    def test_study_mode(self, tmp_path):
        toml = BASE_CONFIG.replace('mode = "fixpoint"', 'mode = "study"') + """
[study]
factors = [1.0, 0.5]
"""
        cfg = tmp_path / "study.toml"
        cfg.write_text(toml.format(out=str(tmp_path / "out")))
        assert main(["--config", str(cfg)]) == 0
        data = json.loads((tmp_path / "out" / "study.json").read_text())
        assert len(data["runs"]) == 2
        assert abs(data["energy_exponent"] - 2.0) < 0.2

    def test_unknown_mode_rejected(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["--config", cfg, "--mode", "banana"]) == 2

    def test_missing_config_reported(self, tmp_path, capsys):
        assert main(["--config", str(tmp_path / "nope.toml")]) == 2
        assert "error" in capsys.readouterr().err


def test_fixpoint_zero_forcing_immediate(tmp_path):
    toml = BASE_CONFIG.split("[[forcing.plate]]")[0]
    cfg = tmp_path / "zero.toml"
    cfg.write_text(toml.format(out=str(tmp_path / "out")))
    assert main(["--config", str(cfg)]) == 0
    report = json.loads((tmp_path / "out" / "fixpoint_report.json").read_text())
    assert report["converged"] and report["iterations"] == 0
    assert report["sup_energy"] == 0.0
    assert report["c_forcing"] == 0.0
