import csv
import json
import math

import numpy as np
import pytest

from confine_fp.cli import main
from confine_fp.output import read_pgm


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_fene_passes(capsys):
    code, out, _ = run(capsys, "check", "--fene", "--l", "5", "--json")
    rep = json.loads(out)
    assert code == 0
    assert rep["h1"]["pass"] and rep["h2"]["pass"] and rep["h3"]["pass"]


@pytest.mark.parametrize("argv", [["--fene", "--l", "1"], ["--power-law", "--alpha", "0.5"]])
def test_check_failures_exit_one(capsys, argv):
    code, out, _ = run(capsys, "check", *argv)
    assert code == 1 and "FAIL" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["check", "--l", "-1"],
        ["check", "--bogus"],
        ["check", "--fene", "--power-law"],
        ["solve", "--rings", "0"],
        ["solve", "--method", "cholesky"],
        ["fene-sweep", "--gammas", "0.1,abc"],
        ["sde", "--paths", "0"],
        ["nope"],
        [],
    ],
)
def test_usage_errors_exit_two(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_check_writes_report(tmp_path, capsys):
    assert run(capsys, "check", "--l", "2", "--out", str(tmp_path / "r.json"))[0] == 0
    assert set(json.loads((tmp_path / "r.json").read_text())) == {"h1", "h2", "h3", "p_bound"}


def test_solve_fene2(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", "--fene", "--l", "2", "--rings", "32", "--out", str(tmp_path), "--json")
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert json.loads(out) == summary
    assert abs(summary["moments"]["mass"] - 1) <= 1e-10
    img = read_pgm(tmp_path / "heatmap.pgm").astype(int)
    assert img.shape == (256, 256)
    assert np.max(np.abs(img - img[::-1, ::-1])) <= 1
    with (tmp_path / "solution.csv").open() as fh:
        assert next(csv.reader(fh)) == ["x", "y", "u", "phi"]


def test_solve_shear_moment(tmp_path, capsys):
    code, _, _ = run(capsys, "solve", "--fene", "--l", "5", "--shear", "--de", "10", "--gamma", "0.2", "--rings", "24", "--out", str(tmp_path))
    assert code == 0
    assert json.loads((tmp_path / "summary.json").read_text())["moments"]["Q1Q2"] > 0


def test_solve_rho_scaling(tmp_path, capsys):
    assert run(capsys, "solve", "--fene", "--l", "5", "--rho", "2", "--rings", "16", "--out", str(tmp_path))[0] == 0
    assert abs(json.loads((tmp_path / "summary.json").read_text())["moments"]["mass"] - 2) <= 1e-10


def test_solve_rejected_model_names_hypothesis(tmp_path, capsys):
    code, _, err = run(capsys, "solve", "--fene", "--l", "1", "--rings", "8", "--out", str(tmp_path))
    assert code == 1 and "H1" in err
    code, _, _ = run(capsys, "solve", "--fene", "--l", "1", "--rings", "8", "--force", "--out", str(tmp_path))
    assert code == 0 and json.loads((tmp_path / "summary.json").read_text())["forced"] is True


def test_solve_peclet_warning(tmp_path, capsys):
    code, _, err = run(capsys, "solve", "--l", "5", "--shear", "--de", "10", "--gamma", "1", "--rings", "8", "--out", str(tmp_path))
    assert code == 0 and "Peclet" in err


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nl = 5\nshear = true\nde = 10\ngamma = 0.2\nrings = 12\n")
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run(capsys, "solve", "--config", str(cfg), "--out", str(a))[0] == 0
    assert run(capsys, "solve", "--config", str(cfg), "--gamma", "0", "--out", str(b))[0] == 0
    assert json.loads((a / "summary.json").read_text())["moments"]["Q1Q2"] > 0
    assert abs(json.loads((b / "summary.json").read_text())["moments"]["Q1Q2"]) <= 1e-12
    cfg.write_text("colour = red\n")
    assert run(capsys, "solve", "--config", str(cfg), "--out", str(a))[0] == 2
    assert run(capsys, "solve", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def _trend(path):
    with (path / "trend.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    return {float(r["gamma_dot"]): float(r["Q1Q2"]) for r in rows}, rows


def test_fene_sweep_trend(tmp_path, capsys):
    code, _, _ = run(capsys, "fene-sweep", "--gammas", "0,0.1,0.2,0.5,1", "--rings", "24", "--out", str(tmp_path))
    assert code == 0
    q, rows = _trend(tmp_path)
    assert list(rows[0]) == ["gamma_dot", "Q1Q1_minus_Q2Q2", "Q1Q2", "peclet_max"]
    assert abs(q[0.0]) <= 1e-8
    vals = [q[g] for g in (0.1, 0.2, 0.5, 1.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    for g in (0.1, 1.0):
        assert (tmp_path / f"gamma_{g:g}" / "heatmap.pgm").exists()


def test_fene_sweep_refinement_keeps_signs(tmp_path, capsys):
    signs = []
    for rings in (12, 24):
        out = tmp_path / str(rings)
        assert run(capsys, "fene-sweep", "--rings", str(rings), "--out", str(out))[0] == 0
        with (out / "trend.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        signs.append([(np.sign(float(r["Q1Q1_minus_Q2Q2"])), np.sign(float(r["Q1Q2"]))) for r in rows])
    assert signs[0] == signs[1]


def test_fene_sweep_jobs_match_serial(tmp_path, capsys):
    run(capsys, "fene-sweep", "--gammas", "0.1,0.5", "--rings", "12", "--out", str(tmp_path / "s"))
    run(capsys, "fene-sweep", "--gammas", "0.1,0.5", "--rings", "12", "--jobs", "2", "--out", str(tmp_path / "p"))
    assert (tmp_path / "s" / "trend.csv").read_bytes() == (tmp_path / "p" / "trend.csv").read_bytes()


SDE_SMALL = ["--paths", "2000", "--burn-in", "500", "--sample-steps", "500", "--thinning", "50", "--bins", "32"]


def test_sde_command_and_seed_env(tmp_path, capsys, monkeypatch):
    code, out, _ = run(capsys, "sde", "--de", "1", "--gamma", "0", *SDE_SMALL, "--out", str(tmp_path / "a"), "--json")
    assert code == 0
    rep = json.loads(out)
    assert rep["config"]["seed"] == 42 and "l1_to_maxwellian" in rep
    monkeypatch.setenv("CONFINE_FP_SEED", "7")
    run(capsys, "sde", "--de", "1", "--gamma", "0", *SDE_SMALL, "--out", str(tmp_path / "b"))
    assert json.loads((tmp_path / "b" / "report.json").read_text())["config"]["seed"] == 7
    run(capsys, "sde", "--de", "1", "--gamma", "0", *SDE_SMALL, "--seed", "42", "--out", str(tmp_path / "c"))
    assert (tmp_path / "a" / "histogram.csv").read_bytes() == (tmp_path / "c" / "histogram.csv").read_bytes()
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "c" / "report.json").read_bytes()


def test_sde_compare(tmp_path, capsys):
    code, out, _ = run(capsys, "sde", "--de", "10", "--gamma", "0.2", *SDE_SMALL, "--compare", "--rings", "16", "--out", str(tmp_path), "--json")
    assert code == 0
    cmp = json.loads(out)["comparison"]
    assert 0 < cmp["l1_distance"] < 2
    assert set(cmp["moment_gaps"]) == {"Q1Q1", "Q2Q2", "Q1Q2"}


def test_audit_command(capsys):
    code, out, _ = run(capsys, "audit", "--l", "5", "--rings", "12", "--fields", "20", "--json")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert math.isfinite(rep["hardy"]["worst_ratio"])
    assert rep["spectral"]["lambda2"] >= 0.95


def test_validate_single_criterion(capsys):
    code, out, _ = run(capsys, "validate", "--only", "1", "--json")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]


def test_validate_quick_reports_first_failure(tmp_path, capsys):
    code, out, err = run(capsys, "validate", "--quick", "--out", str(tmp_path / "a"))
    assert "criterion  9 SKIP" in out
    # the linear manufactured solution is reproduced exactly, so no rate is observable
    assert code == 1 and "first failing criterion: 4" in err
    run(capsys, "validate", "--quick", "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    arts = sorted(p.name for p in (tmp_path / "a" / "artifacts").iterdir())
    assert arts
    for n in arts:
        assert (tmp_path / "a" / "artifacts" / n).read_bytes() == (tmp_path / "b" / "artifacts" / n).read_bytes()
