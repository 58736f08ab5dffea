import io
import subprocess
import sys

import pytest

from effdiff.cli import main, parse_config, run
from effdiff.errors import ConfigError
from effdiff.montecarlo import read_campaign_csv


def run_cli(argv):
    config = parse_config(argv)
    out = io.StringIO()
    status = run(config, out)
    return status, out.getvalue()


def test_parse_flags_and_defaults():
    cfg = parse_config(["mc2d", "--n", "20", "--trials", "5", "--q", "1,10", "--workers", "1"])
    assert cfg.subcommand == "mc2d"
    assert cfg.params["n"] == 20 and cfg.params["q"] == (1.0, 10.0)
    assert cfg.params["refine"] == 3 and cfg.params["seed"] == 0
    assert cfg.workers == 1 and cfg.output is None


def test_invalid_value_names_key(capsys):
    with pytest.raises(ConfigError) as err:
        parse_config(["mc2d", "--n", "-3", "--trials", "5", "--q", "1,10"])
    assert err.value.key == "n"
    assert main(["mc2d", "--n", "-3", "--trials", "5", "--q", "1,10"]) == 2
    assert "n:" in capsys.readouterr().err


def test_missing_required_key():
    with pytest.raises(ConfigError) as err:
        parse_config(["mc3d", "--n", "4", "--q", "1,2,3"])
    assert err.value.key == "trials"


def test_config_file_and_flag_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# campaign\nn = 4\ntrials=3  # small\nq=1,10\nseed=7\n")
    cfg = parse_config(["mc2d", "--config", str(path), "--seed", "9"])
    assert cfg.params["n"] == 4 and cfg.params["trials"] == 3
    assert cfg.params["seed"] == 9


def test_config_file_rejects_unknown_key(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("n=4\ntrials=3\nq=1,10\nbogus=1\n")
    with pytest.raises(ConfigError) as err:
        parse_config(["mc2d", "--config", str(path)])
    assert err.value.key == "bogus"


def test_layered_output(tmp_path):
    out_csv = tmp_path / "layered.csv"
    status, text = run_cli(["layered", "--p1", "0.8122", "--d1", "1e-14", "--d2n", "1e-12",
                            "-o", str(out_csv)])
    assert status == 0
    assert "1.2284e-14" in text
    body = out_csv.read_text()
    assert body.startswith("# subcommand=layered\n")
    assert "component,value" in body
    status, text = run_cli(["layered", "--p1", "0.8122", "--d1", "1e-14", "--d2n", "1e-12",
                            "--kp", "1.26e-2"])
    assert "1.2312e-14" in text


def test_mc2d_csv_is_deterministic(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path, workers in zip(paths, ("1", "2")):
        status, text = run_cli(["mc2d", "--n", "3", "--trials", "4", "--q", "1,10",
                                "--seed", "5", "--workers", workers, "-o", str(path)])
        assert status == 0 and "mean" in text
    assert paths[0].read_bytes() == paths[1].read_bytes()
    settings, values, summary = read_campaign_csv(paths[0].read_text())
    assert len(values) == 4 and settings["master_seed"] == "5"


def test_mc_isotropic_std_zero():
    status, text = run_cli(["mc3d", "--n", "2", "--trials", "3", "--q", "4,4,4", "--refine", "2",
                            "--workers", "1"])
    assert status == 0
    assert "mean 4.0000  std 0.0000" in text


def test_estimate_and_cellprob():
    status, text = run_cli(["estimate", "--nx", "64", "--ny", "4", "--layers", "4"])
    assert status == 0 and "rel. difference 0.00%" in text
    status, text = run_cli(["cellprob", "--cells", "8"])
    assert status == 0
    with pytest.raises(ConfigError):
        parse_config(["cellprob", "--pattern", "stars"])
    assert run(parse_config(["cellprob", "--cells", "7"]), io.StringIO()) == 2


def test_transient_writes_history(tmp_path):
    path = tmp_path / "t.csv"
    status, text = run_cli(["transient", "--nx", "64", "--ny", "4", "--layers", "4",
                            "--dt", "1e-3", "--t-end", "2e-2", "-o", str(path)])
    assert status == 0 and "relative L2 discrepancy" in text
    rows = [r for r in path.read_text().splitlines() if not r.startswith("#")]
    assert rows[0] == "time,flux_detailed,flux_homogenized" and len(rows) == 21


def test_missing_mask_file_reports_error(tmp_path, capsys):
    assert main(["estimate", "--mask", str(tmp_path / "none.pgm")]) == 1
    assert "error" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "effdiff", "layered", "--p1", "0.5",
                           "--d1", "1", "--d2n", "3"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "normal      1.5000e+00" in proc.stdout
