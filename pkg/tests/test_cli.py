import csv
import json

import pytest

from pparabolic import cli


def run(tmp_path, kind, *args, config=None, name="out"):
    argv = [kind, "--out", str(tmp_path / name), *args]
    if config is not None:
        path = tmp_path / f"{name}.yaml"
        path.write_text(config)
        argv += ["--config", str(path)]
    return cli.main(argv), tmp_path / name


def load(path):
    return json.loads(path.read_text())


def test_jet_proptest_seeded_full_size(tmp_path):
    code, out = run(tmp_path, "jet-proptest", "--seed", "1", "--override", "samples=100000")
    assert code == 0
    manifest = load(out / "manifest.json")
    assert set(manifest["minimum_margins"]) == {"fundamental", "full_fundamental", "trivial", "sigma_lower_bound", "smo_esti"}
    assert all(v >= -1e-12 for v in manifest["minimum_margins"].values())
    assert manifest["config"]["seed"] == 1 and "numpy" in manifest["versions"]
    assert (out / "margins.csv").exists()


def test_sharpness_writes_classified_table(tmp_path):
    code, out = run(tmp_path, "sharpness", config="p: 3\ns_list: [-1.25, -1, -0.5, 0]\n")
    assert code == 0
    rows = list(csv.DictReader((out / "sharpness.csv").open()))
    assert len(rows) == 20
    by_s = {float(r["s"]): r["classification"] for r in rows}
    assert by_s == {-1.25: "divergent", -1.0: "divergent", -0.5: "convergent", 0.0: "convergent"}


def test_missing_p_names_the_key(tmp_path, capsys):
    code, out = run(tmp_path, "solve", config="s: 0.5\n")
    assert code == cli.EXIT_CONFIG
    assert "'p'" in capsys.readouterr().err
    assert not (out / "report.json").exists()


@pytest.mark.parametrize(
    "config, needle",
    [
        ("p: 3\nnx: abc\n", ":2: key 'nx'"),
        ("p: 3\n\nnxx: 40\n", ":3: unknown key 'nxx' (did you mean 'nx'?)"),
        ("p: 3\np: 4\n", ":2: key 'p' repeated"),
        ("p: 3\nscheme: crank\n", ":2: key 'scheme'"),
        ("p: 0.5\n", ":1: key 'p': must exceed 1"),
        ("p: [3\n", "YAML syntax error"),
        ("p: 3\ngrid: {nx: 3}\n", ":2: key 'grid'"),
        ("- p\n", "flat mapping"),
        ("p: 1.5\nscheme: explicit\n", "key 'eps'"),
        ("kind: sharpness\np: 3\n", "key 'kind'"),
    ],
)
def test_config_diagnostics(tmp_path, capsys, config, needle):
    code, _ = run(tmp_path, "solve", config=config)
    assert code == cli.EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_bad_override_is_reported(tmp_path, capsys):
    code, _ = run(tmp_path, "solve", "--override", "p")
    assert code == cli.EXIT_CONFIG
    assert "KEY=VALUE" in capsys.readouterr().err
    code, _ = run(tmp_path, "solve", "--override", "p=3", "--override", "eps=-1")
    assert code == cli.EXIT_CONFIG


def test_override_beats_file(tmp_path):
    code, out = run(tmp_path, "solve", "--override", "nx=16", config="p: 3\nnx: 64\neps: 1.0e-4\n")
    assert code == 0
    assert load(out / "report.json")["config"]["nx"] == 16


def test_report_json_byte_identical(tmp_path):
    cfg = "p: 3\ns: 0.5\neps: 1.0e-4\nnx: 16\npointwise: true\n"
    a, out_a = run(tmp_path, "verify-estimate", "--seed", "4", config=cfg, name="a")
    b, out_b = run(tmp_path, "verify-estimate", "--seed", "4", config=cfg, name="b")
    assert a == b == 0
    assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()
    assert (out_a / "estimates.csv").read_bytes() == (out_b / "estimates.csv").read_bytes()


def test_failed_check_gives_exit_one(tmp_path):
    code, out = run(tmp_path, "solve", "--override", "error_tol=1e-12", config="p: 3\neps: 1.0e-4\nnx: 16\n")
    assert code == cli.EXIT_CHECK_FAILED
    report = load(out / "report.json")
    assert not report["passed"]
    assert load(out / "manifest.json")["status"] == "checks_failed"


def test_numerical_failure_recorded_in_manifest(tmp_path):
    # Q_2r leaves the grid: the verifier's diagnostic ends up in the manifest
    code, out = run(tmp_path, "verify-estimate", config="p: 3\nnx: 16\ncylinder_r: 0.6\n")
    assert code == cli.EXIT_NUMERICAL
    manifest = load(out / "manifest.json")
    assert manifest["status"] == "numerical_failure"
    assert "does not fit" in manifest["error"]


def test_solve_snapshot_and_time_derivative(tmp_path):
    code, out = run(tmp_path, "solve", "--override", "snapshot=true", config="p: 2\nproblem: heat\nnx: 16\n")
    assert code == 0
    assert (out / "steps.csv").read_text().startswith("step,t,substeps,dt,max_update")
    rows = (out / "field_final.csv").read_text().splitlines()
    assert rows[0] == "x1,x2,t,value" and len(rows) == 17 * 17 + 1
    code, out = run(tmp_path, "time-derivative", config="p: 2\nproblem: counterexample\nfield: exact\nnx: 32\n", name="td")
    assert code == 0
    rep = load(out / "report.json")["results"]["report"]
    assert rep["params"]["s"] == 0.0


def test_heat_problem_needs_p_two(tmp_path, capsys):
    code, _ = run(tmp_path, "solve", config="p: 3\nproblem: heat\n")
    assert code == cli.EXIT_CONFIG
    assert "key 'p'" in capsys.readouterr().err


def test_module_entry_point_help():
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
