import json
import subprocess
import sys

import pytest

from stacked_voter import asymptotics as asy
from stacked_voter.cli import main, parse_grid, parse_sites
from stacked_voter.lattice import Site


def test_parse_grid():
    g = parse_grid("0.001:0.1:log10")
    assert g[0] == pytest.approx(0.001) and g[-1] == pytest.approx(0.1) and len(g) == 3
    assert parse_grid("1,2.5,3") == [1.0, 2.5, 3.0]
    assert len(parse_grid("0:1:5")) == 5


def test_parse_sites():
    assert parse_sites("0,0,0;1,2,1") == [Site(0, 0, 0), Site(1, 2, 1)]


def test_formulas_output(tmp_path, capsys):
    rc = main(["formulas", "--formula", "c_w", "--beta-grid", "0.01", "--w", "1,3",
               "--out", str(tmp_path)])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "formula,beta,w,value"
    vals = {int(l.split(",")[2]): float(l.split(",")[3]) for l in lines[1:]}
    assert vals[1] == pytest.approx(0.08259468366189925, rel=1e-13)
    assert vals[3] == pytest.approx(0.09537212569165903, rel=1e-13)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "formulas" and man["result"]["rows"] == 2


def test_config_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("formula = h\nbeta_grid = 0.01\nw_list = 2\n")
    main(["formulas", "--config", str(cfg), "--out", str(tmp_path / "a")])
    out = capsys.readouterr().out.splitlines()
    assert out[1].startswith("h,0.01,2,")
    main(["formulas", "--config", str(cfg), "--formula", "tau", "--out", str(tmp_path / "b")])
    out = capsys.readouterr().out.splitlines()
    assert float(out[1].split(",")[3]) == pytest.approx(asy.tau_beta(0.01))


def test_manifest_replay_is_byte_identical(tmp_path):
    a = tmp_path / "a"
    assert main(["branch-classify", "--beta", "0.1", "--reps", "2000", "--seed", "3",
                 "--out", str(a)]) == 0
    b = tmp_path / "b"
    assert main(["branch-classify", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("bogus = 1\n")
    assert main(["formulas", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_invalid_domain_exit_code(tmp_path, capsys):
    rc = main(["formulas", "--formula", "tau", "--beta-grid", "0.9", "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("stacked-voter: error:")


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_cancer_init_outputs(tmp_path):
    rc = main(["cancer-init", "--N", "1e4", "--w", "1", "--beta", "0.05", "--u1", "1e-3",
               "--u2", "1e-3", "--reps", "50", "--out", str(tmp_path)])
    assert rc == 0
    for name in ("sigma2_samples.csv", "sigma2_hist.csv", "sigma2_stats.json", "manifest.json"):
        assert (tmp_path / name).exists()
    stats = json.loads((tmp_path / "sigma2_stats.json").read_text())
    assert stats["regime"] in ("SmallGamma", "Intermediate", "LargeGamma")


def test_verify_formula_criterion(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "stacked_voter.cli", "verify", "--only", "10",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "criterion 10 [PASS]" in proc.stdout
