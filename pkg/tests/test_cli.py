"""Command-line surface: resolution order, manifests, determinism, formats."""

import subprocess

import pytest

from gwimm.cli import main


def run(argv, capsys):
    rc = main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def test_validate_report(capsys):
    rc, out, _ = run(["validate"], capsys)
    assert rc == 0
    assert "regime: R1" in out
    assert "sigma: 2.0" in out
    assert "valid: yes" in out


def test_validate_rejects_bad_params(capsys):
    rc, _, err = run(["validate", "--kappa1", "0.9"], capsys)
    assert rc == 2
    assert "gwimm: error:" in err


def test_pmf_offspring_rows(tmp_path, capsys):
    out = tmp_path / "pmf.csv"
    rc, _, _ = run(["pmf", "--law", "offspring", "--nmax", "4",
                    "--out", str(out)], capsys)
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# truncation_mass=0.0"
    assert lines[1] == "k,p"
    assert lines[2] == "0,0.5"
    assert lines[3] == "1,0.0"
    assert lines[4] == "2,0.5"
    manifest = (tmp_path / "pmf.csv.manifest").read_text()
    assert "command=pmf" in manifest
    assert "law=offspring" in manifest


def test_manifest_reproduces_run_byte_identically(tmp_path, capsys):
    a = tmp_path / "a.csv"
    rc, _, _ = run(["survival", "--horizon", "5", "--reps", "2000",
                    "--seed", "3", "--threads", "2", "--M", "256",
                    "--out", str(a)], capsys)
    assert rc == 0
    b = tmp_path / "b.csv"
    rc, _, _ = run(["survival", "--config", str(a) + ".manifest",
                    "--out", str(b)], capsys)
    assert rc == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_cli_precedence(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("# comment line\nkappa2=0.25\nkappa1=0.5\n")
    rc, out, _ = run(["validate", "--config", str(cfgfile)], capsys)
    assert rc == 0
    assert "regime: R3" in out                    # file value used
    rc, out, _ = run(["validate", "--config", str(cfgfile),
                      "--kappa2", "1.0"], capsys)
    assert "regime: R1" in out                    # command line wins


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("kappa9=0.25\n")
    rc, _, err = run(["validate", "--config", str(cfgfile)], capsys)
    assert rc == 2
    assert "kappa9" in err


def test_simulate_csv(tmp_path, capsys):
    out = tmp_path / "path.csv"
    rc, _, _ = run(["simulate", "--horizon", "8", "--seed", "1",
                    "--out", str(out)], capsys)
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# life=")
    assert lines[1].startswith("# censoring=")
    assert lines[2] == "n,value"
    rows = [l.split(",") for l in lines[3:]]
    assert [int(r[0]) for r in rows] == list(range(len(rows)))
    life = lines[0].split("=", 1)[1]
    if life != "none":
        assert int(rows[int(life)][1]) == 0


def test_survival_table_consistency(tmp_path, capsys):
    out = tmp_path / "u.csv"
    rc, _, _ = run(["survival", "--horizon", "10", "--reps", "20000",
                    "--M", "256", "--seed", "2", "--out", str(out)], capsys)
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,u_renewal,dp_lower,dp_upper,u_mc,mc_se,censored"
    for ln in lines[1:]:
        n, ur, lo, hi, umc, se, cens = ln.split(",")
        assert float(lo) - 1e-9 <= float(ur) <= float(hi) + 1e-9
        assert abs(float(umc) - float(ur)) < 5.0 * max(float(se), 1e-12)


def test_regime_fit_appears_above_length_threshold(capsys):
    rc, out, _ = run(["regime", "--kappa2", "0.25", "--nmax", "2000"],
                     capsys)
    assert rc == 0
    assert "regime: R3" in out
    assert "fitted_alpha:" in out
    rc, out, _ = run(["regime", "--kappa2", "0.25", "--nmax", "100"], capsys)
    assert "fitted_alpha:" not in out


def test_limits_table(capsys):
    rc, out, _ = run(["limits", "--theorem", "balanced_strong",
                      "--s-grid", "0.5,1", "--n-grid", "200,400"], capsys)
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "# theorem=balanced_strong"
    assert lines[1] == "# monotone=yes"
    assert lines[2] == "n,s,computed,limit,deviation"
    assert len(lines) == 7
    limit_05 = float(lines[3].split(",")[3])
    assert limit_05 == pytest.approx((1.5) ** -2.0, rel=1e-12)


def test_format_conversion(capsys):
    rc, out, _ = run(["validate", "--format", "csv"], capsys)
    assert rc == 0
    assert "regime,R1" in out.splitlines()
    rc, out, _ = run(["pmf", "--nmax", "2", "--format", "report"], capsys)
    rows = [l for l in out.splitlines() if not l.startswith("#")]
    assert all("," not in r for r in rows)


def test_verify_passes_and_is_thread_invariant(tmp_path, capsys):
    f1 = tmp_path / "v1.txt"
    f2 = tmp_path / "v2.txt"
    assert main(["verify", "--seed", "1", "--threads", "1",
                 "--out", str(f1)]) == 0
    assert main(["verify", "--seed", "1", "--threads", "2",
                 "--out", str(f2)]) == 0
    capsys.readouterr()
    assert f1.read_bytes() == f2.read_bytes()
    text = f1.read_text()
    assert "result: PASS" in text
    assert "FAIL" not in text.replace("result: PASS", "")


def test_console_entry_point():
    proc = subprocess.run(["gwimm", "validate", "--kappa2", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "regime: R2" in proc.stdout
    assert "command=validate" in proc.stderr    # manifest echo on stderr
