import json
import subprocess
import sys
from pathlib import Path

import pytest

from horolab.cli import main as cli_main
from horolab.experiments import (ConfigError, default_config_text,
                                 parse_config)

QUICK = """\
seed = 321
identity.arcs = 6
identity.t_max = 40
identity.lemma14_ensemble = 4000
equi.ensemble = 60
equi.T_min = 10
equi.T_max = 300
equi.points = 5
mix.ensemble = 8000
mix.t_max = 32
twist.ensemble = 64
twist.T_min = 10
twist.T_max = 300
twist.points = 5
spec.ensemble = 64
spec.delta_points = 5
spec.autocorr_tmax = 40
spec.autocorr_ensemble = 4000
normalize.quad_n = 50000
"""


def test_parse_config_happy_path():
    cfg = parse_config("seed = 7\nalpha.epsilon = 0.2  # comment\n")
    assert cfg["seed"] == 7
    assert cfg["alpha.epsilon"] == 0.2
    assert cfg["alpha.width"] == 0.35      # default fills in


def test_parse_config_missing_seed_names_key():
    with pytest.raises(ConfigError) as err:
        parse_config("alpha.epsilon = 0.2\n")
    assert "seed" in str(err.value)


def test_parse_config_line_numbers():
    with pytest.raises(ConfigError) as err:
        parse_config("seed = 3\nthis line is broken\n")
    assert "line 2" in str(err.value)


def test_parse_config_rejects_bad_surface():
    with pytest.raises(ConfigError):
        parse_config("seed = 3\nsurface = torus\n")


def test_default_config_round_trip():
    cfg = parse_config(default_config_text())
    assert cfg["surface"] == "bolza"
    assert cfg.get_float("mu0") > 0


def test_cli_missing_seed_exits_2(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("alpha.epsilon = 0.1\n", encoding="utf-8")
    code = cli_main(["equidist", "--config", str(bad), "--out", str(tmp_path)])
    assert code == 2


def test_cli_unreadable_config_exits_2(tmp_path):
    code = cli_main(["equidist", "--config", str(tmp_path / "absent.cfg"),
                     "--out", str(tmp_path)])
    assert code == 2


def test_cli_dry_run(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(QUICK, encoding="utf-8")
    code = cli_main(["all", "--config", str(cfg), "--out",
                     str(tmp_path / "out"), "--dry-run"])
    assert code == 0
    captured = capsys.readouterr().out
    assert "would run" in captured
    assert not (tmp_path / "out").exists()


def test_cli_unusable_out_exits_2(tmp_path):
    # a plain file in place of the output directory (robust even as root,
    # which ignores permission bits)
    cfg = tmp_path / "c.cfg"
    cfg.write_text(QUICK, encoding="utf-8")
    blocked = tmp_path / "blocked"
    blocked.write_text("", encoding="utf-8")
    code = cli_main(["equidist", "--config", str(cfg), "--out", str(blocked)])
    assert code == 2


@pytest.fixture(scope="module")
def quick_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_out")
    cfg = out / "quick.cfg"
    cfg.write_text(QUICK, encoding="utf-8")
    code = cli_main(["equidist", "--config", str(cfg), "--out", str(out)])
    return out, code


def test_cli_equidist_artifacts(quick_run):
    out, code = quick_run
    assert code in (0, 1, 3)
    series = (out / "equidist.csv").read_text(encoding="utf-8")
    lines = series.splitlines()
    assert lines[0] == "T,sup_birkhoff,rms_birkhoff,rms_err,sup_clock_dev"
    assert "\r" not in series
    value = lines[1].split(",")[1]
    assert len(value.replace("-", "").replace(".", "").replace("e", "")
               .replace("+", "").lstrip("0")) >= 10    # 17 significant digits
    assert (out / "equidist.gp").exists()
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert "equidist.csv" in manifest["csv_hashes"]
    assert manifest["config_hash"]


def test_cli_seed_override_changes_output(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(QUICK, encoding="utf-8")
    outs = []
    for seed_args in ([], ["--seed-override", "999"]):
        out = tmp_path / ("o%d" % len(outs))
        cli_main(["equidist", "--config", str(cfg), "--out", str(out)]
                 + seed_args)
        outs.append((out / "equidist.csv").read_bytes())
    assert outs[0] != outs[1]


def test_cli_reruns_byte_identical(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(QUICK, encoding="utf-8")
    payloads = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        cli_main(["mixing", "--config", str(cfg), "--out", str(out),
                  "--threads", "4"])
        payloads.append(b"".join(sorted(
            p.read_bytes() for p in out.glob("*.csv"))))
    assert payloads[0] == payloads[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "horolab", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "check-identities" in proc.stdout
