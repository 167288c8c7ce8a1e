import json
import subprocess
import sys
from pathlib import Path

import pytest

from kbeta.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERIC, EXIT_OK, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(tmp_path, name, params, filename="exp.ini"):
    body = "[experiment]\nname = %s\n\n[parameters]\n" % name
    body += "".join(f"{k} = {v}\n" for k, v in params.items())
    path = tmp_path / filename
    path.write_text(body)
    return path


def run(args):
    return main([str(a) for a in args])


def test_snc_eval_prints_exact_value(tmp_path, capsys):
    code = run(["run", "--config", CONFIGS / "snc_eval.ini", "--output", tmp_path / "out", "--no-figures"])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "-1" in out
    results = json.loads((tmp_path / "out" / "results.json").read_text())
    assert results["status"] == "pass"
    values = {r["case"]: r["l_beta"]["exact"] for r in results["records"]}
    assert values == {"beta=1": "0", "beta=2": "0", "beta=4": "-1"}


def test_bare_flags_mean_run(tmp_path):
    assert run(["--config", CONFIGS / "snc_eval.ini", "--output", tmp_path, "--no-figures"]) == EXIT_OK
    assert (tmp_path / "results.json").is_file()


def test_validate_shipped_configs(capsys):
    for path in sorted(CONFIGS.glob("*.ini")):
        assert run(["validate", "--config", path]) == EXIT_OK, path.name


@pytest.mark.parametrize(
    "params, needle",
    [
        ({"betas": "8, -1"}, "betas"),
        ({"potential": "file:missing.dat"}, "potential"),
        ({"potential": "wobbly"}, "potential"),
        ({"n_points": "two"}, "n_points"),
        ({"ray": "dnc"}, "ray"),
    ],
)
def test_validate_names_bad_key(tmp_path, capsys, params, needle):
    path = write_config(tmp_path, "quantize-sweep", params)
    assert run(["validate", "--config", path]) == EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert run(["run", "--config", tmp_path / "nope.ini"]) == EXIT_CONFIG


def test_unknown_experiment(tmp_path):
    assert run(["validate", "--config", write_config(tmp_path, "frobnicate", {})]) == EXIT_CONFIG


def test_nonconvex_ray_rejected(tmp_path, capsys):
    path = write_config(tmp_path, "ray-slope", {"ray": "breakpoints = [1/2]; slopes = [1, 0]"})
    assert run(["validate", "--config", path]) == EXIT_CONFIG
    assert "ray" in capsys.readouterr().err


def test_zero_potential_report(tmp_path):
    path = write_config(tmp_path, "functional-report", {"potentials": "zero", "n_points": "401", "half_width": "20"})
    assert run(["run", "--config", path, "--output", tmp_path / "out", "--no-figures"]) == EXIT_OK
    rec = json.loads((tmp_path / "out" / "results.json").read_text())["records"][0]
    for key in ("i_energy", "j_energy", "entropy", "ent_beta", "k_energy", "k_beta"):
        assert rec[key] == 0.0


def test_invariant_violation_exit_code(tmp_path):
    # claims L^beta = 0 for a pair whose true value is -1
    params = {"u_ray": "dnc", "v_ray": "trivial", "betas": "4", "snc": "a = [1]; b = [0]; c = [0]; d = [0]"}
    path = write_config(tmp_path, "l-beta-compare", params)
    assert run(["run", "--config", path, "--output", tmp_path / "out", "--no-figures"]) == EXIT_INVARIANT
    assert json.loads((tmp_path / "out" / "results.json").read_text())["status"] == "fail"


def test_strict_unstable_slope_exit_code(tmp_path):
    params = {"ray": "dnc", "functionals": "K", "betas": "8", "residual_bound": "1e-14"}
    path = write_config(tmp_path, "ray-slope", params)
    assert run(["run", "--config", path, "--output", tmp_path / "a", "--no-figures", "--strict"]) == EXIT_NUMERIC
    # without --strict the unstable estimate is recorded, not fatal
    assert run(["run", "--config", path, "--output", tmp_path / "b", "--no-figures"]) in (EXIT_OK, EXIT_INVARIANT)
    assert "unstable" in (tmp_path / "b" / "results.json").read_text()


def test_results_are_byte_deterministic(tmp_path):
    params = {"potentials": "zero, seed-bump, harmonic:0.2:0.05", "n_points": "801", "half_width": "30"}
    path = write_config(tmp_path, "functional-report", params)
    assert run(["run", "--config", path, "--output", tmp_path / "a", "--no-figures"]) == EXIT_OK
    assert run(["run", "--config", path, "--output", tmp_path / "b", "--no-figures", "--jobs", "2"]) == EXIT_OK
    for rel in ["results.json", "summary.txt"] + [f"data/{p.name}" for p in (tmp_path / "a" / "data").iterdir()]:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_figures_rendered(tmp_path):
    assert run(["run", "--config", CONFIGS / "snc_eval.ini", "--output", tmp_path]) == EXIT_OK
    pngs = list((tmp_path / "figures").glob("*.png"))
    assert pngs and all(p.read_bytes()[:4] == b"\x89PNG" for p in pngs)


def test_quantize_sweep_small(tmp_path):
    params = {"n_points": "801", "half_width": "30", "betas": "8, 32"}
    path = write_config(tmp_path, "quantize-sweep", params)
    assert run(["run", "--config", path, "--output", tmp_path / "out", "--no-figures"]) == EXIT_OK
    assert list((tmp_path / "out" / "data").glob("*.dat"))


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "kbeta.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "kbeta" in proc.stdout
