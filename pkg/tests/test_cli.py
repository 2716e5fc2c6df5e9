import json
from pathlib import Path
import subprocess
import sys

import numpy as np
import pytest

from cavity_nls.cli.config import ConfigError, load_config, parse_override
from cavity_nls.cli.main import main
from cavity_nls.cli.output import render_csv

FAST = ["--set", "numerics.n_points=4096"]
TOML = """\
[system]
kind = "2ls"
omega0 = 100.0
gamma_phi = 0.5

[cavity]
g_sqrt_n = 3.0

[pump]
tau = 2.0
tau_w = 0.1

[probe]
tau_w = 0.1

[scan]
tau_delta = [0.0, 0.5, 1.0]
components = ["total", "2,-1"]
chunk = 1

[output]
omega_range = [-6.0, 6.0]
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(TOML)
    return p


def read_csv(path):
    lines = path.read_text().splitlines()
    meta = dict(line[2:].split("=", 1) for line in lines if line.startswith("# "))
    body = [line for line in lines if not line.startswith("#")]
    data = np.array([[float(x) for x in line.split(",")] for line in body[1:]])
    return meta, body[0].split(","), data


def test_linear_writes_table(cfg_file, tmp_path, capsys):
    out = tmp_path / "lin"
    assert main(["linear", "--config", str(cfg_file), "--out", str(out)] + FAST) == 0
    meta, cols, data = read_csv(out / "linear.csv")
    assert cols[:3] == ["omega", "omega_rot", "T"]
    assert meta["command"] == "linear" and "polariton_upper" in meta
    assert np.all(np.abs(data[:, 1]) <= 6.0)
    # closed form and hierarchy columns agree
    np.testing.assert_allclose(data[:, cols.index("T")], data[:, cols.index("T_closed")], rtol=1e-5)
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["system"]["gamma_phi"] == 0.5 and resolved["numerics"]["n_points"] == 4096


def test_dt_scan_is_independent_of_jobs(cfg_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["dt-scan", "--config", str(cfg_file), "--out", str(a), "--jobs", "1"] + FAST) == 0
    assert main(["dt-scan", "--config", str(cfg_file), "--out", str(b), "--jobs", "2", "--plot-script"] + FAST) == 0
    for name in ("dt.csv", "dt_v_2_-1.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (b / "plot_dt.py").exists() and not (a / "plot_dt.py").exists()
    _, cols, data = read_csv(a / "dt.csv")
    assert cols[:3] == ["tau_delta", "omega", "omega_rot"]
    assert sorted(set(data[:, 0])) == [0.0, 0.5, 1.0]


def test_full_and_phase_scan(cfg_file, tmp_path):
    out = tmp_path / "full"
    assert main(["full", "--config", str(cfg_file), "--out", str(out), "--set", "numerics.t_end=10.0",
                 "--set", "numerics.n_points=1001", "--set", "numerics.rwa=true"]) == 0
    _, cols, data = read_csv(out / "full.csv")
    np.testing.assert_allclose(data[:, cols.index("pop_0")] + data[:, cols.index("pop_1")], 1.0, atol=1e-10)
    out = tmp_path / "phase"
    assert main(["phase-scan", "--config", str(cfg_file), "--out", str(out)] + FAST) == 0
    _, _, tot = read_csv(out / "dt.csv")
    _, _, v01 = read_csv(out / "dt_v_0_1.csv")
    _, _, v21 = read_csv(out / "dt_v_2_-1.csv")
    np.testing.assert_allclose(v01[:, -1] + v21[:, -1], tot[:, -1], atol=1e-10 * np.abs(tot[:, -1]).max())


def test_bad_config_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(TOML.replace("gamma_phi = 0.5", "gamma_phi = -0.5"))
    out = tmp_path / "never"
    assert main(["linear", "--config", str(bad), "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert "bad.toml:4" in err and "gamma_phi" in err
    assert not out.exists()
    assert not list(tmp_path.glob(".cavity-nls-*"))


@pytest.mark.parametrize("edit, fragment", [
    (lambda t: t.replace("[cavity]", "[cavty]"), "unknown section"),
    (lambda t: t.replace("g_sqrt_n = 3.0", "g_sqrt_n = 3.0\nbogus = 1"), "bogus"),
    (lambda t: t.replace('kind = "2ls"', 'kind = "4ls"'), "kind"),
    (lambda t: t + "\n[numerics\n", "invalid TOML"),
])
def test_config_errors(tmp_path, edit, fragment):
    p = tmp_path / "c.toml"
    p.write_text(edit(TOML))
    with pytest.raises(ConfigError) as exc:
        load_config(str(p))
    assert fragment in str(exc.value)


def test_json_config_and_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"system": {"kind": "2ls", "omega0": 50.0}, "pump": {"tau_w": 0.2}}, indent=1))
    cfg = load_config(str(p), ["cavity.g_sqrt_n=2.5", "output.dir=somewhere"])
    assert cfg["cavity"]["g_sqrt_n"] == 2.5 and cfg["output"]["dir"] == "somewhere"
    assert cfg["cavity"]["omega_c"] == 50.0 and cfg["pump"]["omega"] == 50.0
    with pytest.raises(ConfigError):
        parse_override("no_section=1")
    with pytest.raises(ConfigError):
        load_config(str(p), ["pump.tau_w=-1"])


def test_probe_required_for_scans(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[system]\nkind = "2ls"\n[scan]\ntau_delta = [0.0]\n')
    assert main(["dt-scan", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def test_render_csv_rejects_nan():
    with pytest.raises(ValueError):
        render_csv(["a"], np.array([[np.nan]]), {})
    assert "inf" in render_csv(["a"], np.array([[np.inf]]), {}, allow_inf=True)


def test_module_entry_point(cfg_file, tmp_path):
    r = subprocess.run([sys.executable, "-m", "cavity_nls", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "oracle-check" in r.stdout


def test_multimode_outputs(tmp_path):
    out = tmp_path / "mm"
    assert main(["multimode", "--config", str(Path(__file__).resolve().parents[1] / "configs" / "multimode.toml"), "--out", str(out),
                 "--set", "numerics.n_points=2048"]) == 0
    _, cols, data = read_csv(out / "multimode_spectrum.csv")
    driven = cols.index("T_k5")
    peak = np.nanmax(data[:, 2:], axis=0)
    # identical sites: only the driven transverse mode responds
    assert np.argmax(peak) == driven - 2 and np.delete(peak, driven - 2).max() < 1e-12 * peak.max()
    _, cols, data = read_csv(out / "multimode.csv")
    assert "excitation_total" in cols
