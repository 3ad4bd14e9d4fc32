import numpy as np
import pytest

from beltrami.cli import (EXIT_IO, EXIT_NONCONVERGED, EXIT_OK, EXIT_USAGE, EXIT_VERDICT, ConfigError,
                          main, parse_config)
from beltrami.grid import ComplexField, GridSpec
from beltrami.manifest import read_manifest
from beltrami.sampled import save_sampled_oracle


def test_defaults_filled():
    cfg = parse_config(["solve", "--example1", "--alpha", "1", "--k", "4"])
    assert (cfg.n_side, cfg.half_width, cfg.tol) == (512, 1.25, 1e-8)
    assert cfg.oracle == "example1"


@pytest.mark.parametrize("argv,key", [
    (["solve", "--example1", "--alpha", "3", "--p", "1", "--k", "4"], "alpha"),
    (["solve", "--example1", "--alpha", "1", "--k", "0.5"], "k"),
    (["solve", "--constant-mu", "0.7", "--constant-nu", "0.5"], "mu0"),
    (["solve", "--example1"], "k"),
    (["ladder", "--example1", "--levels", "4,2"], "levels"),
    (["check", "--example1", "--z0", "2"], "z0"),
    (["diagnose"], "solution"),
    (["solve", "--example1", "--k", "4", "--n-side", "100"], "n_side"),
])
def test_validation_names_key(argv, key, capsys, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_USAGE
    assert key in capsys.readouterr().err


def test_unknown_flag_is_usage_error(tmp_path):
    assert main(["solve", "--bogus", "--out", str(tmp_path)]) == EXIT_USAGE


def test_config_file_merge(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("n_side=64\ntol=1e-6\nalpha=1.0\n")
    cfg = parse_config(["solve", "--example1", "--k", "4", "--config", str(cfgfile), "--tol", "1e-9"])
    assert cfg.n_side == 64 and cfg.tol == 1e-9
    cfgfile.write_text("colour=blue\n")
    with pytest.raises(ConfigError, match="colour"):
        parse_config(["solve", "--example1", "--k", "4", "--config", str(cfgfile)])


def test_solve_constant_mu_and_diagnose(tmp_path):
    out = tmp_path / "s"
    assert main(["solve", "--constant-mu", "0.5", "--out", str(out)]) == EXIT_OK
    m = read_manifest(out / "manifest.txt")
    assert m["converged"] is True
    assert m["max_error_vs_affine.r0.5"] < 1e-3
    f = ComplexField.load(out / "f.bfld")
    assert f.grid == GridSpec(512)
    d = tmp_path / "d"
    assert main(["diagnose", "--solution", str(out), "--out", str(d), "--n-side", "512"]) == EXIT_OK
    dm = read_manifest(d / "diagnose.txt")
    assert dm["residual_reproduced"] is True
    assert dm["residual_linf"] == m["residual_linf"]


def test_solve_is_deterministic_across_threads(tmp_path, monkeypatch):
    args = ["solve", "--example1", "--k", "4", "--n-side", "64", "--tol", "1e-9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    monkeypatch.setenv("BELTRAMI_THREADS", "2")
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    for name in ("manifest.txt", "f.bfld", "omega.bfld"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solve_nonconverged_exit(tmp_path):
    out = tmp_path / "s"
    code = main(["solve", "--example1", "--k", "4", "--n-side", "64", "--outer-max", "1", "--out", str(out)])
    assert code == EXIT_NONCONVERGED
    assert (out / "f.bfld").exists()
    assert read_manifest(out / "manifest.txt")["converged"] is False


def test_ladder_writes_levels(tmp_path):
    out = tmp_path / "l"
    assert main(["ladder", "--example1", "--levels", "2,4,8", "--n-side", "64", "--out", str(out)]) == EXIT_OK
    m = read_manifest(out / "manifest.txt")
    assert len(m["sup_diffs"]) == 2
    assert len(m["derivative_l1.fz"]) == 2
    for n in (2, 4, 8):
        assert (out / f"level_{n}" / "f.bfld").exists()


def test_ladder_abort_keeps_partial_results(tmp_path):
    out = tmp_path / "l"
    code = main(["ladder", "--example1", "--levels", "4,8", "--n-side", "64", "--outer-max", "1",
                 "--out", str(out)])
    assert code == EXIT_NONCONVERGED
    assert (out / "level_4" / "f.bfld").exists()
    assert "aborted" in read_manifest(out / "manifest.txt")


def test_check_example_at_origin(tmp_path):
    out = tmp_path / "c"
    assert main(["check", "--example1", "--alpha", "1", "--z0", "0", "--out", str(out)]) == EXIT_OK
    m = read_manifest(out / "report.txt")
    for key in ("verdict.fmo", "verdict.divergence", "verdict.ring"):
        assert m[key] in ("pass", "fail", "inconclusive")
    assert len(m["divergence.values"]) == 4
    strict = main(["check", "--example1", "--alpha", "1", "--z0", "0", "--strict", "--out", str(out)])
    assert strict == EXIT_VERDICT


def test_check_constant_passes_strict(tmp_path):
    assert main(["check", "--constant-mu", "0.5", "--strict", "--out", str(tmp_path)]) == EXIT_OK


def test_example_fields_and_csv(tmp_path):
    out = tmp_path / "e"
    assert main(["example", "--which", "gk", "--k", "4", "--n-side", "16", "--csv", "--out", str(out)]) == EXIT_OK
    g = ComplexField.load(out / "gk.bfld")
    assert g.samples[g.grid.origin_index] == 0
    assert (out / "gk.csv").read_text().startswith("x,y,re,im")
    report = tmp_path / "r.txt"
    assert main(["example", "--which", "dilatations", "--n-side", "16", "--out", str(out),
                 "--report", str(report)]) == EXIT_OK
    assert read_manifest(report)["fields"] == ["Kmu", "Kmugk", "Kmuk", "Q"]


def test_coefficient_file_matches_constant(tmp_path):
    g = GridSpec(64)
    disk = g.disk_mask()
    mu = np.where(disk, 0.3, 0)[None].astype(complex)
    save_sampled_oracle(tmp_path / "c.npz", g, [0.0], mu, np.zeros_like(mu))
    assert main(["solve", "--coeff-file", str(tmp_path / "c.npz"), "--n-side", "64",
                 "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["solve", "--constant-mu", "0.3", "--n-side", "64", "--out", str(tmp_path / "b")]) == EXIT_OK
    fa = ComplexField.load(tmp_path / "a" / "f.bfld").samples
    fb = ComplexField.load(tmp_path / "b" / "f.bfld").samples
    np.testing.assert_allclose(fa, fb, atol=1e-12)


def test_locked_output_directory(tmp_path):
    (tmp_path / ".beltrami.lock").write_text("")
    assert main(["example", "--n-side", "16", "--out", str(tmp_path)]) == EXIT_IO


def test_output_path_is_a_file(tmp_path):
    f = tmp_path / "file"
    f.write_text("x")
    assert main(["example", "--n-side", "16", "--out", str(f)]) == EXIT_IO


def test_diagnose_missing_solution(tmp_path):
    assert main(["diagnose", "--solution", str(tmp_path / "nope"), "--out", str(tmp_path / "d")]) == EXIT_IO
