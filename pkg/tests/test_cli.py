import json
import math
import subprocess
import sys

import numpy as np
import pytest

from coupledcavity.cli import main
from coupledcavity.output import read_csv, read_pgm

from conftest import LAMBDA_T20, M_REF


def write_config(tmp_path, kind="coupled", n=256, W=3.0, l=0.5, lam=LAMBDA_T20, extra=""):
    text = f"""
geometry: {{R: 1.0, r: 0.2, l: {l}, a: 1.0e-3, lambda: {lam!r}}}
grid: {{n: {n}, half_width: {W}}}
solve: {{operator_kind: {kind}, n_modes: 10, parity: 1}}
output: {{directory: {tmp_path / 'cfg_out'}, formats: [csv, json, png]}}
{extra}"""
    p = tmp_path / f"{kind}_{n}.yaml"
    p.write_text(text)
    return str(p)


def run(*argv):
    return main([str(a) for a in argv])


def floats(rows, key):
    return np.array([float(r[key]) for r in rows])


def test_spectrum_coupled(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "o"
    assert run("spectrum", "--config", cfg, "--out", out) == 0
    rows = read_csv(out / "spectrum.csv")
    assert list(rows[0]) == ["index", "re_gamma", "im_gamma", "abs_gamma", "arg_gamma", "parity", "residual"]
    assert len(rows) == 10
    mod = floats(rows, "abs_gamma")
    assert np.all(np.diff(mod) <= 1e-10)
    assert {r["parity"] for r in rows} <= {"+1", "-1"}
    meta = json.loads((out / "meta.json").read_text())
    assert meta["horwitz"]["M"] == pytest.approx(M_REF, rel=1e-12)
    assert meta["horwitz"]["t"] == pytest.approx(20.0, rel=1e-12)
    assert meta["grid"]["n"] == 256
    assert (out / "spectrum.png").stat().st_size > 0


def test_spectrum_decoupled_with_resonances(tmp_path):
    q0 = int(round(2 * 0.5 / LAMBDA_T20))
    cfg = write_config(tmp_path, kind="decoupled")
    text = open(cfg).read().replace("parity: 1}", f"parity: 1, q_range: [{q0 - 1}, {q0 + 1}], refine: true}}")
    open(cfg, "w").write(text)
    out = tmp_path / "o"
    assert run("spectrum", "--config", cfg, "--out", out) == 0
    rows = read_csv(out / "spectrum.csv")
    assert np.all(floats(rows, "abs_gamma") < 1)
    res = read_csv(out / "resonances.csv")
    assert len(res) == 30
    assert list(res[0]) == ["index", "q", "wavelength", "refined_wavelength", "shift"]


def test_spectrum_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    run("spectrum", "--config", cfg, "--out", tmp_path / "a")
    run("spectrum", "--config", cfg, "--out", tmp_path / "b")
    for name in ("spectrum.csv", "meta.json", "spectrum.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_modes_coupled(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "o"
    assert run("modes", "--config", cfg, "--out", out, "--modes", "0,3", "--pgm") == 0
    meta = json.loads((out / "modes.json").read_text())
    h = meta["grid"]["weight"]
    for k in (0, 3):
        rows = read_csv(out / f"mode_{k}.csv")
        assert list(rows[0]) == ["component", "y", "re_v", "im_v", "intensity"]
        assert len(rows) == 2 * 256
        assert np.sum(floats(rows, "intensity")) * h == pytest.approx(1.0, abs=1e-10)
        assert read_pgm(out / f"mode_{k}.pgm").shape == (32, 512)
    assert [m["index"] for m in meta["modes"]] == [0, 3]


def test_modes_parity_plus_symmetric(tmp_path):
    cfg = write_config(tmp_path, kind="parity_plus", n=512)
    out = tmp_path / "o"
    assert run("modes", "--config", cfg, "--out", out, "--modes", "0,1,2") == 0
    for k in range(3):
        rows = read_csv(out / f"mode_{k}.csv")
        assert len(rows) == 512
        inten = floats(rows, "intensity")
        assert np.max(np.abs(inten - inten[::-1])) < 1e-6 * inten.max()
        y = floats(rows, "y")
        assert np.sum(inten) * (y[1] - y[0]) == pytest.approx(1.0, abs=1e-9)


def test_modes_bad_index(tmp_path):
    cfg = write_config(tmp_path, kind="decoupled", n=128)
    assert run("modes", "--config", cfg, "--out", tmp_path / "o", "--modes", "500") == 1


def test_sweep(tmp_path):
    cfg = write_config(tmp_path, kind="decoupled")
    out = tmp_path / "o"
    assert run("sweep", "--config", cfg, "--out", out, "--parameter", "a",
               "--start", "8e-4", "--stop", "1.2e-3", "--steps", "3") == 0
    rows = read_csv(out / "sweep.csv")
    a = floats(rows, "value")
    F = floats(rows, "F")
    assert np.allclose(F / a ** 2, F[0] / a[0] ** 2, rtol=1e-10)
    for k in range(5):
        assert np.all(floats(rows, f"abs_gamma_{k}") < 1)
    assert all(r["error"] == "" for r in rows)


def test_sweep_records_failures(tmp_path):
    cfg = write_config(tmp_path, kind="decoupled", n=128)
    out = tmp_path / "o"
    assert run("sweep", "--config", cfg, "--out", out, "--parameter", "lambda",
               "--start", "1.5e-6", "--stop", "1e-8", "--steps", "2") == 0
    rows = read_csv(out / "sweep.csv")
    assert rows[0]["error"] == ""
    assert rows[1]["error"].startswith("UndersampledGridError")


def test_sweep_converges_with_n(tmp_path):
    out = {}
    for n in (512, 1024):
        cfg = write_config(tmp_path, kind="decoupled", n=n)
        run("sweep", "--config", cfg, "--out", tmp_path / str(n), "--parameter", "a",
            "--start", "1e-3", "--stop", "1e-3", "--steps", "1")
        out[n] = float(read_csv(tmp_path / str(n) / "sweep.csv")[0]["abs_gamma_0"])
    assert abs(out[512] - out[1024]) < 1e-3


def test_asymptotics(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "o"
    assert run("asymptotics", "--config", cfg, "--out", out,
               "--y", "0,0.5,2,-2,6,-30,1", "--t", "50,200,800") == 0
    rows = read_csv(out / "asymptotics.csv")
    assert len(rows) == 21
    M = M_REF
    for r in rows:
        y = float(r["y"])
        if abs(abs(y) - 1) < 1e-12:
            assert r["region"] == "boundary"
            continue
        want = ["(-inf,-M)", "(-M,-1)", "(-1,1)", "(1,M)", "(M,inf)"][
            int(np.searchsorted([-M, -1, 1, M], y))
        ]
        assert r["region"] == want
        assert float(r["additivity"]) < 1e-10
    for y in ("0.00000000000e+00", "5.00000000000e-01", "2.00000000000e+00"):
        errs = [float(r["rel_error"]) for r in rows if r["y"] == y]
        assert errs[0] > errs[1] > errs[2]


@pytest.mark.slow
def test_validate_passes(tmp_path, capsys):
    cfg = write_config(tmp_path, n=1024, W=3.0)
    assert run("validate", "--config", cfg, "--out", tmp_path / "o") == 0
    text = capsys.readouterr().out
    assert "all checks passed" in text
    for name in ("stability", "grid_adequacy", "unitarity", "parity_union", "scaled_correspondence"):
        assert name in text


def test_validate_inadequate_grid(tmp_path, capsys):
    cfg = write_config(tmp_path, n=32)
    assert run("validate", "--config", cfg, "--out", tmp_path / "o") == 1
    assert "validation failed: grid_adequacy" in capsys.readouterr().out


def test_validate_stability_precondition(tmp_path, capsys):
    cfg = write_config(tmp_path, kind="decoupled", l=0.9)
    assert run("validate", "--config", cfg, "--out", tmp_path / "o") == 1
    assert "validation failed: stability" in capsys.readouterr().out


def test_config_errors(tmp_path, capsys):
    assert run("spectrum", "--config", tmp_path / "missing.yaml") == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("geometry: {R: 1.0}\n")
    assert run("spectrum", "--config", bad) == 2
    assert "config error" in capsys.readouterr().err


def test_out_dir_precedence(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, kind="decoupled", n=128)
    monkeypatch.setenv("SOLVER_OUT_DIR", str(tmp_path / "env"))
    assert run("spectrum", "--config", cfg) == 0
    assert (tmp_path / "env" / "spectrum.csv").exists()
    assert run("spectrum", "--config", cfg, "--out", tmp_path / "flag") == 0
    assert (tmp_path / "flag" / "spectrum.csv").exists()
    monkeypatch.delenv("SOLVER_OUT_DIR")
    assert run("spectrum", "--config", cfg) == 0
    assert (tmp_path / "cfg_out" / "spectrum.csv").exists()


def test_entry_point(tmp_path):
    cfg = write_config(tmp_path, kind="decoupled", n=128)
    proc = subprocess.run(
        [sys.executable, "-m", "coupledcavity.cli", "spectrum", "--config", cfg, "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert math.isfinite(float(read_csv(tmp_path / "o" / "spectrum.csv")[0]["abs_gamma"]))
