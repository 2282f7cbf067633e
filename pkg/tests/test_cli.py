import json
import subprocess
import sys

import numpy as np
import pytest

from isosim.cli import DEFAULTS, main

COUPLED = "builtin:coupled_harmonic:N=8,omega=40,kappa=200"


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def all_pairs_model(tmp_path):
    names = ["x1", "x2", "x3", "x4"]
    raw = {"wires": [{"name": n, "sites": 10} for n in names],
           "pair_potentials": [{"i": a, "j": b, "expr": f"1 + {a}*{b}"}
                               for k, a in enumerate(names) for b in names[k + 1:]],
           "one_body": [{"wire": n, "expr": f"2*{n}"} for n in names]}
    path = tmp_path / "all_pairs.json"
    path.write_text(json.dumps(raw))
    return str(path)


def test_compile_writes_layout(tmp_path, capsys):
    out = tmp_path / "layout.json"
    code, stdout, _ = run(["compile", "builtin:coupled_harmonic:N=24,omega=40,kappa=200",
                           "-o", str(out)], capsys)
    assert code == 0 and "connections 552/576" in stdout
    layout = json.loads(out.read_text())
    [table] = layout["coupling_tables"]
    assert table["shape"] == [24, 24] and len(table["values"]) == 576
    assert layout["basis"] == "mixed-radix-row-major-last-fastest"
    assert layout["resources"]["hilbert_dim"] == 576


def test_spectrum_json(tmp_path, capsys):
    out = tmp_path / "spec.json"
    code, stdout, _ = run(["spectrum", "builtin:box:N=16", "-k", "4", "--json", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    N, dx = 16, 1 / 17
    ref = [(1 - np.cos(k * np.pi * dx)) / dx**2 for k in range(1, 5)]
    assert doc["eigenvalues"] == pytest.approx(ref, abs=1e-9)
    assert doc["dimension"] == N and doc["seed"] == 42
    assert len(stdout.splitlines()) == 4 and "np.float64" not in stdout


def test_spectrum_too_many_eigs(capsys):
    code, _, err = run(["spectrum", "builtin:box:N=4", "-k", "5"], capsys)
    assert code == 2 and "eigenpairs" in err


def test_evolve_csv_columns_and_energy(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code, _, _ = run(["evolve", COUPLED, "--t", "0.1", "--dt", "0.01", "--csv", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "time,energy,norm,mean_x1,var_x1,mean_x2,var_x2"
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert rows.shape == (11, 7)
    assert np.ptp(rows[:, 1]) <= 1e-8 * abs(rows[0, 1])
    assert np.all(np.abs(rows[:, 2] - 1) <= 1e-10)


def test_evolve_state_round_trip(tmp_path, capsys):
    state = tmp_path / "psi.json"
    code, _, _ = run(["evolve", "builtin:box:N=6", "--t", "0.05", "--ground-start",
                      "--observables", "mean", "--csv", str(tmp_path / "a.csv"),
                      "--json", str(state)], capsys)
    assert code == 0
    code, _, _ = run(["evolve", "builtin:box:N=6", "--t", "0.05", "--state", str(state),
                      "--csv", str(tmp_path / "b.csv")], capsys)
    assert code == 0
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == "time,energy,norm,mean_x1"


def test_evolve_bad_observable(capsys):
    code, _, err = run(["evolve", "builtin:box:N=4", "--t", "0.01", "--observables", "skew"],
                       capsys)
    assert code == 2 and "skew" in err


def test_relax_imaginary(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    code, stdout, _ = run(["relax", "builtin:box:N=16", "--mode", "imaginary",
                           "--csv", str(trace)], capsys)
    assert code == 0
    dx = 1 / 17
    e = float(stdout.split()[2])
    assert e == pytest.approx((1 - np.cos(np.pi * dx)) / dx**2, abs=1e-8)
    energies = [float(line.split(",")[1]) for line in trace.read_text().splitlines()[1:]]
    assert all(b <= a + 1e-10 for a, b in zip(energies, energies[1:]))


def test_relax_lindblad_zero_temperature(tmp_path, capsys):
    rho = tmp_path / "rho.json"
    code, stdout, _ = run(["relax", "builtin:box:N=8", "--mode", "lindblad",
                           "--json", str(rho)], capsys)
    assert code == 0
    assert float(stdout.split()[-1]) >= 0.999
    assert "real" in json.loads(rho.read_text())


def test_relax_lindblad_warns_on_unreachable_levels(capsys):
    code, _, err = run(["relax", "builtin:coupled_harmonic:N=4,omega=40,kappa=200",
                        "--mode", "lindblad"], capsys)
    assert code == 0 and "warning" in err


def test_verify_resources_all_pairs(all_pairs_model, tmp_path, capsys):
    out = tmp_path / "verify.json"
    code, _, _ = run(["verify", all_pairs_model, "--check", "resources", "--json", str(out)],
                     capsys)
    assert code == 0
    [rep] = json.loads(out.read_text())
    assert rep["status"] == "pass"
    assert rep["details"]["connections_used"] == rep["details"]["connections_bound"] == 600
    assert rep["details"]["fields_used"] == 40


def test_verify_all(capsys):
    code, stdout, _ = run(["verify", COUPLED, "--check", "all", "--sites", "8,16,32"], capsys)
    assert code == 0
    assert stdout.count("pass") == 5


def test_verify_failure_exit_code(capsys):
    # two and four sites are far from the asymptotic regime: order ~4
    code, stdout, _ = run(["verify", "builtin:box:N=8", "--check", "convergence",
                           "--problem", "harmonic", "--sites", "2,4"], capsys)
    assert code == 5 and "fail" in stdout


def test_verify_indeterminate_exit_code(tmp_path, capsys):
    path = tmp_path / "heavy.json"
    path.write_text(json.dumps({"wires": [{"name": "x1", "sites": 6, "mass": 1e20}],
                                "one_body": [{"wire": "x1", "expr": "x1"}]}))
    code, stdout, _ = run(["verify", str(path), "--check", "ground"], capsys)
    assert code == 5 and "indeterminate" in stdout


def test_resources_text(all_pairs_model, capsys):
    code, stdout, _ = run(["resources", all_pairs_model], capsys)
    assert code == 0
    assert "connections 600 <= 600" in stdout and "fields      40 <= 40" in stdout


def test_builtin_writes_valid_model(tmp_path, capsys):
    path = tmp_path / "m.json"
    assert run(["builtin", "double_well_chain", "M=3", "N=5", "-o", str(path)], capsys)[0] == 0
    code, stdout, _ = run(["resources", str(path)], capsys)
    assert code == 0 and "hilbert dimension 125" in stdout


@pytest.mark.parametrize("argv, expected", [
    (["spectrum", "missing.json"], 1),
    (["spectrum", "builtin:box"], 2),
    (["spectrum", "builtin:nonsense:N=3"], 2),
    (["spectrum", "builtin:box:N=three"], 2),
    ([], 2),
])
def test_exit_codes(argv, expected, capsys, monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    assert run(argv, capsys)[0] == expected


def test_invalid_json_and_validation_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["compile", str(bad)], capsys)[0] == 2
    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"wires": [{"name": "y", "sites": 0}], "extra": 1}))
    code, _, err = run(["compile", str(invalid)], capsys)
    assert code == 2
    assert "wires[0].name" in err and "wires[0].sites" in err and "extra" in err


def test_evaluation_error_exit_code(tmp_path, capsys):
    path = tmp_path / "sing.json"
    path.write_text(json.dumps({"wires": [{"name": "x1", "sites": 4}, {"name": "x2", "sites": 4}],
                                "pair_potentials": [{"i": "x1", "j": "x2",
                                                     "expr": "1/(x1 - x2)"}]}))
    code, _, err = run(["compile", str(path)], capsys)
    assert code == 3 and "1.0 / (x1 - x2)" in err


def test_convergence_error_exit_code(capsys):
    code, _, _ = run(["relax", "builtin:box:N=8", "--dtau", "1e-9", "--relax-tol", "1e-15",
                        "--max-steps", "50"],
                     capsys)
    assert code == 4


def test_show_config(capsys):
    code, stdout, _ = run(["--show-config"], capsys)
    assert code == 0 and json.loads(stdout) == DEFAULTS


def test_seed_sources(tmp_path, capsys, monkeypatch):
    def trajectory(*extra):
        out = tmp_path / "t.csv"
        assert run([*extra, "evolve", "builtin:box:N=6", "--t", "0.01", "--csv", str(out)],
                   capsys)[0] == 0
        return out.read_text()

    default = trajectory()
    assert trajectory("--seed", "42") == default
    assert trajectory("--seed", "7") != default
    monkeypatch.setenv("ISOSIM_SEED", "7")
    assert trajectory() == trajectory("--seed", "7")
    monkeypatch.setenv("ISOSIM_SEED", "seven")
    assert run(["evolve", "builtin:box:N=6", "--t", "0.01"], capsys)[0] == 2


DETERMINISM_COMMANDS = [
    ["compile", COUPLED, "-o", "{out}"],
    ["spectrum", COUPLED, "--json", "{out}"],
    ["evolve", COUPLED, "--t", "0.05", "--csv", "{out}"],
    ["relax", COUPLED, "--mode", "imaginary", "--json", "{out}"],
    ["relax", "builtin:box:N=8", "--mode", "lindblad", "--temperature", "3", "--json", "{out}"],
    ["verify", COUPLED, "--check", "all", "--sites", "8,16", "--json", "{out}"],
    ["resources", COUPLED, "--json", "{out}"],
    ["builtin", "harmonic", "N=12", "omega=30", "-o", "{out}"],
]


@pytest.mark.parametrize("argv", DETERMINISM_COMMANDS, ids=lambda a: a[0] + "-" + a[-2])
def test_byte_identical_across_runs(argv, tmp_path):
    outputs = []
    for n in range(2):
        cwd = tmp_path / f"run{n}"
        cwd.mkdir()
        cmd = [sys.executable, "-m", "isosim.cli", "--seed", "3",
               *[a.replace("{out}", "result") for a in argv]]
        proc = subprocess.run(cmd, capture_output=True, check=False, cwd=cwd)
        assert proc.returncode == 0, proc.stderr
        outputs.append(((cwd / "result").read_bytes(), proc.stdout))
    assert outputs[0] == outputs[1]
