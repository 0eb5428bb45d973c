import filecmp
import subprocess
import sys

import pytest

import gaugeline.oracle as oracle_mod
from gaugeline import cli
from gaugeline.config import parse_config_text
from gaugeline.io import read_csv

SMALL = """\
omega_points = 801
omega_insert_factor = 1
time_coarse_points = 401
time_refine_factor = 10
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def _files(d):
    return sorted(p.relative_to(d) for p in d.rglob("*") if p.is_file())


def test_seedless_rejected(capsys):
    assert cli.main(["spectrum", "--seedless"]) == 2
    assert "seedless" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("N = 1\nbeta = 1.0\n")
    assert cli.main(["trajectory", "--config", str(p)]) == 2
    assert "beta" in capsys.readouterr().err
    p.write_text("colour = blue\n")
    assert cli.main(["trajectory", "--config", str(p)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_trajectory_artifacts(small_cfg, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["trajectory", "--config", str(small_cfg), "--out", str(out)]) == 0
    header, rows = read_csv(out / "trajectory.csv")
    assert header == ["t_ns", "gauge", "x0_nm", "k_eV_per_nm2", "omega_per_s", "phi0_eV"]
    meta = (out / "trajectory.csv.meta").read_text().splitlines()
    assert meta[0] == "version=0.1.0"
    assert "config.N=1000000000000.0" in meta
    assert not any(m.startswith("config.workers") for m in meta)
    first_m = next(r for r in rows if r[1] == "multipolar")
    assert float(first_m[4]) == pytest.approx(6.3199e13, rel=1e-4)


def test_output_dir_env_fallback(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("GAUGELINE_OUT", str(tmp_path / "env"))
    assert cli.main(["adiabaticity", "--config", str(small_cfg)]) == 0
    header, rows = read_csv(tmp_path / "env" / "adiabaticity.csv")
    assert header == ["t_ns", "gauge", "r01"]
    assert max(float(r[2]) for r in rows) < 1e-2


def test_spectrum_peak_table(small_cfg, tmp_path):
    out = tmp_path / "spec"
    assert cli.main(["spectrum", "--config", str(small_cfg), "--out", str(out)]) == 0
    header, rows = read_csv(out / "peaks.csv")
    assert header[:3] == ["gauge", "background", "peak_omega_per_s"]
    assert [r[0] for r in rows] == ["lorentz", "coulomb", "multipolar", "unperturbed"]
    _, diffs = read_csv(out / "peak_differences.csv")
    pairs = [(d[1], d[2]) for d in diffs]
    assert ("lorentz", "multipolar") in pairs and ("lorentz", "coulomb") in pairs
    assert ("unperturbed", "lorentz") in pairs
    peaks = {r[0]: float(r[2]) for r in rows}
    d = {(a, b): float(v) for _, a, b, v in diffs}
    assert d[("lorentz", "coulomb")] == peaks["lorentz"] - peaks["coulomb"]
    header, _ = read_csv(out / "spectrum_lorentz_multipolar.csv")
    assert header == ["omega_per_s", "S", "re_c0k", "im_c0k"]
    meta = (out / "spectrum_lorentz_multipolar.csv.meta").read_text()
    for key in ("gauge=lorentz", "background=multipolar", "t_f_ns=", "omega_points=801", "version="):
        assert key in meta


def test_spectrum_deterministic_across_workers(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["spectrum", "--config", str(small_cfg), "--out", str(a), "--workers", "1"]) == 0
    assert cli.main(["spectrum", "--config", str(small_cfg), "--out", str(b), "--workers", "4"]) == 0
    files = _files(a)
    assert files == _files(b)
    for f in files:
        assert filecmp.cmp(a / f, b / f, shallow=False), f


def test_oracle_exit_codes(tmp_path, monkeypatch):
    p = tmp_path / "o.cfg"
    p.write_text("oracle_hdot = off\noracle_modes = off\n")
    assert cli.main(["oracle", "--config", str(p), "--out", str(tmp_path / "ok")]) == 0
    header, rows = read_csv(tmp_path / "ok" / "oracle.csv")
    assert header == ["check", "value", "reference", "residual", "bound", "passed"]
    assert all(r[-1] == "true" for r in rows)
    monkeypatch.setattr(oracle_mod, "ANHARMONIC_BASELINE", 0.5)
    assert cli.main(["oracle", "--config", str(p), "--out", str(tmp_path / "bad")]) == 1
    _, rows = read_csv(tmp_path / "bad" / "oracle.csv")
    assert any(r[-1] == "false" for r in rows)


def test_sweep_requires_axis(small_cfg, tmp_path):
    assert cli.main(["sweep", "--config", str(small_cfg), "--out", str(tmp_path)]) == 2


def test_sweep_n_and_single_point_equivalence(tmp_path):
    p = tmp_path / "sw.cfg"
    p.write_text(SMALL + "gauge = lorentz\nsweep.N = 1e12, 0\n")
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", str(p), "--out", str(out), "--workers", "2"]) == 0
    header, rows = read_csv(out / "sweep_summary.csv")
    assert header == ["N", "gauge", "peak_omega_per_s", "emitted_probability", "max_r01", "error"]
    assert [float(r[0]) for r in rows] == [0.0, 1e12]  # sorted by parameter value
    assert all(r[-1] == "" for r in rows)

    # the N = 0 row reproduces the unperturbed peak
    meta0 = dict(line.split("=", 1) for line in
                 (out / "points" / "N=0.0" / "spectrum_unperturbed_multipolar.csv.meta").read_text().splitlines())
    assert float(rows[0][2]) == float(meta0["peak_omega_per_s"])

    # a direct run at N = 1e12 writes byte-identical spectra
    direct = tmp_path / "direct"
    q = tmp_path / "direct.cfg"
    q.write_text(SMALL + "gauge = lorentz\nN = 1e12\n")
    assert cli.main(["spectrum", "--config", str(q), "--out", str(direct)]) == 0
    point = out / "points" / "N=1000000000000.0"
    for name in ("spectrum_lorentz_multipolar.csv", "spectrum_lorentz_multipolar.csv.meta"):
        assert filecmp.cmp(point / name, direct / name, shallow=False), name


def test_sweep_failure_is_recorded(tmp_path):
    p = tmp_path / "fail.cfg"
    p.write_text(SMALL + "gauge = multipolar\nsweep.N = 0, 1e15\n")
    out = tmp_path / "fail"
    assert cli.main(["sweep", "--config", str(p), "--out", str(out)]) == 1
    _, rows = read_csv(out / "sweep_summary.csv")
    assert rows[0][-1] == ""
    # the strongly perturbed point breaks adiabaticity and is reported, not raised
    assert rows[1][-1].split(":")[0] in ("GridTooCoarseError", "WindowError")
    assert rows[1][2] == "nan"


def test_parse_matches_cli_defaults():
    assert parse_config_text("") == cli.RunConfig()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "gaugeline.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "0.1.0" in r.stdout
