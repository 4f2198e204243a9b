import csv
import json
import subprocess
import sys

import pytest

from palmflow import __version__
from palmflow.cli import ConfigError, main, parse_grid, read_config_text, resolve_config


def run_cli(tmp_path, capsys, text, *extra, name="out"):
    cfg = tmp_path / f"{name}.ini"
    cfg.write_text(text)
    out = tmp_path / name
    code = main(["run", str(cfg), "--out", str(out), *extra])
    captured = capsys.readouterr()
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, captured, out


def strip_ts(doc):
    d = dict(doc)
    d.pop("timestamp")
    return d


KAC = """
experiment = kac
system = two_circle
target = circle:1
samples = 20000
horizon = 10
seed = 7

[system]
q1 = 0.5
ell0 = 1
ell1 = 2

[kac]
n_max_steps = 5
"""


def test_config_sections_become_dotted_keys():
    raw = read_config_text(KAC)
    assert raw["system.q1"] == "0.5" and raw["kac.n_max_steps"] == "5" and raw["experiment"] == "kac"
    cfg = resolve_config(raw)
    assert cfg["system.params"] == {"q1": 0.5, "ell0": 1.0, "ell1": 2.0}
    assert cfg["samples"] == 20000 and cfg["r_grid"][0] == 0.0


def test_parse_grid():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("0.5, 1, 2") == [0.5, 1.0, 2.0]
    for bad in ("1,0.5", "-1,2", "", "a:b:c"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_kac_run(tmp_path, capsys):
    code, rep, cap, out = run_cli(tmp_path, capsys, KAC)
    assert code == 0 and rep["pass"]
    r = rep["reports"][0]
    assert r["lhs_estimate"]["value"] == 2.0
    assert abs(r["rhs_estimate"]["value"] - 2.0) <= 3 * r["rhs_estimate"]["se"]
    assert rep["schema"] == 1 and rep["version"] == __version__
    assert rep["config"]["system.params"]["ell1"] == 2.0 and rep["config"]["seed"] == 7
    assert "PASS kac" in cap.err
    rows = list(csv.reader((out / "tables" / "reports.csv").open()))
    assert rows[0][0] == "name" and rows[1][0] == "kac"


def test_deterministic_across_jobs(tmp_path, capsys):
    _, a, _, _ = run_cli(tmp_path, capsys, KAC.replace("samples = 20000", "samples = 25000"), "--jobs", "1", name="a")
    _, b, _, _ = run_cli(tmp_path, capsys, KAC.replace("samples = 20000", "samples = 25000"), "--jobs", "2", name="b")
    assert json.dumps(strip_ts(a), sort_keys=True) == json.dumps(strip_ts(b), sort_keys=True)
    _, c, _, _ = run_cli(tmp_path, capsys, KAC, "--seed", "8", name="c")
    assert c["reports"][0]["rhs_estimate"] != a["reports"][0]["rhs_estimate"]


def test_flags_override_file(tmp_path, capsys):
    code, rep, _, _ = run_cli(tmp_path, capsys, KAC, "--set", "samples=5000", "--set", "system.q1=0.25")
    assert rep["config"]["samples"] == 5000 and rep["config"]["system.params"]["q1"] == 0.25


def test_samples_zero(tmp_path, capsys):
    code, rep, cap, _ = run_cli(tmp_path, capsys, KAC, "--set", "samples=0")
    assert code != 0 and rep is None
    err = json.loads(cap.out)
    assert err["error"]["message"] == "samples must be positive"


def test_unknown_system(tmp_path, capsys):
    code, _, cap, _ = run_cli(tmp_path, capsys, "experiment = kac\nsystem = lorentz\ntarget = x\n")
    assert code == 2 and "unknown system" in json.loads(cap.out)["error"]["message"]


@pytest.mark.parametrize(
    "text",
    [
        "experiment = nothing\n",
        "system = rotation\n",
        "experiment = kac\nsystem = rotation\ntarget = interval:0,0.1\nhorizon = -1\n",
        "experiment = higher_order:x\n",
        "experiment = kac\nsystem = rotation\ntarget = cylinder:01\nsamples=10\n",
        "experiment = kac\nsystem = rotation\nsamples = 1.5\n",
        "experiment = kac\nr_grid = 3,1\n",
    ],
)
def test_config_errors(tmp_path, capsys, text):
    code, _, cap, _ = run_cli(tmp_path, capsys, text)
    assert code == 2 and "error" in json.loads(cap.out)


def test_khinchin_keeps_ensembles(tmp_path, capsys):
    text = "experiment = khinchin\nsystem = poisson\nsamples = 3000\nhorizon = 20\nr_grid = 0:2:5\n"
    code, rep, _, out = run_cli(tmp_path, capsys, text, "--keep-ensembles")
    assert code == 0 and len(rep["reports"]) == 5
    lines = (out / "ensembles" / "entry.ndjson").read_text().splitlines()
    assert len(lines) == 3000 and json.loads(lines[0])["window"] == [0.0, 20.0]


def test_higher_order_and_inversion(tmp_path, capsys):
    base = "system = two_circle\ntarget = circle:1\nsamples = 5000\nhorizon = 12\nr_grid = 0,1,3\n"
    code, rep, _, _ = run_cli(tmp_path, capsys, "experiment = higher_order:2\n" + base, name="h")
    assert code == 0 and rep["reports"][0]["name"].startswith("higher_order_j2")
    code, rep, _, _ = run_cli(tmp_path, capsys, "experiment = inversion\n" + base, name="i")
    assert code == 0 and rep["reports"][0]["name"] == "inversion[f=1]"


def test_intensity_and_slivnyak(tmp_path, capsys):
    code, rep, _, _ = run_cli(tmp_path, capsys, "experiment = intensity\nsystem = lattice_cluster\nsamples = 2000\nhorizon = 20\n[system]\nn = 5\n", name="l")
    assert code == 0 and rep["reports"][0]["lhs_estimate"]["value"] == pytest.approx(1.0)
    code, rep, _, _ = run_cli(tmp_path, capsys, "experiment = slivnyak\nsamples = 5000\n", name="s")
    assert code == 0 and rep["reports"][0]["details"]["eta_zero_all_one"]


def test_palm_compare_and_recurrence(tmp_path, capsys):
    text = "experiment = palm_compare\nsystem = rotation\ntarget = interval:0,0.2\nsamples = 5000\n"
    code, rep, _, _ = run_cli(tmp_path, capsys, text, name="p")
    assert code == 0 and len(rep["reports"]) == 3
    text = "experiment = recurrence\nsystem = shear\ntarget = hstrip:0,0.5\nsamples = 5000\n[recurrence]\nn_max_steps = 20\n"
    code, rep, _, _ = run_cli(tmp_path, capsys, text, name="r")
    assert code == 0 and abs(rep["mu_Z1"] - 0.5) < 0.03 and abs(rep["mu_Zinf"] - 0.5) < 0.03


def test_converge_lattice(tmp_path, capsys):
    text = """
experiment = converge
samples = 2000
horizon = 10
n_list = 5,20
r_grid = 0.5,1,2
[converge]
family = lattice_cluster
rho = dirac:0
tolerance = 0.5
intensity_limit = 0
xi_limit = zero
"""
    code, rep, _, out = run_cli(tmp_path, capsys, text)
    rows = list(csv.reader((out / "tables" / "family.csv").open()))
    assert rows[0] == ["n", "intensity", "intensity_se", "p_nonzero", "mean_tau1_eta", "mean_tau1_eta_se", "censor_frac"]
    assert [float(r[4]) for r in rows[1:]] == [1.0, 1.0]
    assert rep["two_of_three"]["flags"]["i"] is False
    assert (out / "tables" / "tightness.csv").exists()
    assert code == (0 if rep["pass"] else 1)


def test_zoo_selftest(tmp_path, capsys):
    code, rep, _, _ = run_cli(tmp_path, capsys, "experiment = zoo_selftest\nsamples = 20000\n")
    assert code == 0 and all(r["pass"] for r in rep["reports"])


def test_zoo_and_schema(capsys):
    assert main(["zoo", "--json"]) == 0
    cat = json.loads(capsys.readouterr().out)
    assert "two_circle" in cat and "lattice_cluster" in cat
    assert cat["rotation"]["params"]["alpha"]["type"] == "float"
    assert main(["zoo"]) == 0
    assert "poisson" in capsys.readouterr().out
    assert main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["schema"] == 1


def test_console_script_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "palmflow.cli", "zoo"], capture_output=True, text=True)
    assert res.returncode == 0 and "bernoulli" in res.stdout


def test_jobs_env_default(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PALMFLOW_JOBS", "2")
    cfg = resolve_config(read_config_text(KAC))
    assert cfg["jobs"] == 2
