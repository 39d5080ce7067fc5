"""Tests for the command line front end."""

from __future__ import annotations

import json

import numpy as np
import pytest

from quantum_kolmogorov import cli
from quantum_kolmogorov.data import read_two_column_csv, write_two_column_csv
from quantum_kolmogorov.exceptions import NumericalInstabilityError
from quantum_kolmogorov.kernel_engine import FourierGrid


def _printed(capsys) -> dict[str, str]:
    values = {}
    for line in capsys.readouterr().out.splitlines():
        key, _, value = line.partition(" ")
        values[key] = value
    return values


@pytest.fixture(name="payoff")
def payoff_fixture(tmp_path):
    grid = FourierGrid.from_length(256, 20.0)
    path = tmp_path / "payoff.csv"
    write_two_column_csv(path, grid.x, np.exp(-0.5 * grid.x**2))
    return path


def _write_fixture(path, operators) -> None:
    path.write_text(json.dumps({"n": 64, "L": 8, "operators": operators}), encoding="utf-8")


def test_derive(tmp_path, capsys) -> None:
    output = tmp_path / "pde.json"
    assert cli.main(["derive", "-N", "4", "--output", str(output)]) == 0
    document = json.loads(output.read_text(encoding="utf-8"))
    assert set(document) == {"backward", "fokker_planck"}
    assert [entry["k"] for entry in document["backward"]["coeffs"]] == [2, 3, 4]
    assert "k=4 backward:" in capsys.readouterr().out


def test_derive_rejects_order_one(tmp_path) -> None:
    assert cli.main(["derive", "-N", "1", "--output", str(tmp_path / "pde.json")]) == 2


def test_kernel_dirac(tmp_path, capsys) -> None:
    output = tmp_path / "kernel.csv"
    argv = ["kernel", "--kind", "dirac", "--eps", "0", "-n", "1024", "--length", "20"]
    assert cli.main([*argv, "--output", str(output)]) == 0
    printed = _printed(capsys)
    assert float(printed["variance"]) == pytest.approx(1.0, rel=1e-6)
    assert float(printed["mass"]) == pytest.approx(1.0)
    assert output.exists()
    assert (tmp_path / "kernel.json").exists()


def test_kernel_gaussian(tmp_path, capsys) -> None:
    argv = ["kernel", "--kind", "gaussian", "--eps", "0.05", "--output", str(tmp_path / "k.csv")]
    assert cli.main(argv) == 0
    printed = _printed(capsys)
    assert float(printed["mu_2"]) == pytest.approx(1.0, rel=5e-3)
    assert float(printed["excess_kurtosis"]) == pytest.approx(6 * 0.05**2, rel=0.05)


def test_kernel_on_a_tiny_domain(tmp_path) -> None:
    argv = ["kernel", "--kind", "dirac", "--length", "2", "-n", "256"]
    assert cli.main([*argv, "--output", str(tmp_path / "kernel.csv")]) == 3


def test_bad_input_exit_code(tmp_path) -> None:
    argv = ["kernel", "-n", "1000", "--output", str(tmp_path / "kernel.csv")]
    assert cli.main(argv) == 2


def test_moments(tmp_path, capsys) -> None:
    output = tmp_path / "moments.json"
    argv = ["moments", "--kind", "gaussian", "--eps", "0.05", "-N", "4", "--output", str(output)]
    assert cli.main(argv) == 0
    assert "series=603/200" in capsys.readouterr().out
    rows = json.loads(output.read_text(encoding="utf-8"))
    assert [row["n"] for row in rows] == [0, 1, 2, 3, 4]
    assert rows[4]["partition"] == "603/200"


def test_solve_with_two_methods(tmp_path, capsys, payoff) -> None:
    output = tmp_path / "solution.csv"
    argv = [
        "solve",
        "--kind",
        "triangular",
        "--eps",
        "0.05",
        "--payoff",
        str(payoff),
        "--method",
        "spectral,kramers_moyal:4",
        "--output",
        str(output),
    ]
    assert cli.main(argv) == 0
    spectral = tmp_path / "solution_spectral.csv"
    truncated = tmp_path / "solution_kramers_moyal4.csv"
    assert spectral.exists()
    assert truncated.exists()
    _, first = read_two_column_csv(spectral)
    _, second = read_two_column_csv(truncated)
    assert np.max(np.abs(first - second)) <= 1e-3
    assert "spectral vs kramers_moyal:4" in capsys.readouterr().out


def test_solve_tabulated_with_kramers_moyal(tmp_path, capsys, payoff) -> None:
    y = np.linspace(-0.05, 0.05, 201)
    density = tmp_path / "density.csv"
    write_two_column_csv(density, y, (0.05 - np.abs(y)) / 0.05**2, header="density")
    output = tmp_path / "solution.csv"
    argv = [
        "solve",
        "--kind",
        "tabulated",
        "--density-csv",
        str(density),
        "--payoff",
        str(payoff),
        "--method",
        "spectral,kramers_moyal:4",
        "--output",
        str(output),
    ]
    assert cli.main(argv) == 0
    _, first = read_two_column_csv(tmp_path / "solution_spectral.csv")
    _, second = read_two_column_csv(tmp_path / "solution_kramers_moyal4.csv")
    assert np.max(np.abs(first - second)) <= 1e-3
    assert "spectral vs kramers_moyal:4" in capsys.readouterr().out


def test_solve_reports_instability(tmp_path, monkeypatch, payoff) -> None:
    def _blow_up(*args, **kwargs):
        raise NumericalInstabilityError("blew up at step 3 of 10")

    monkeypatch.setattr(cli, "solve_kramers_moyal", _blow_up)
    argv = [
        "solve",
        "--payoff",
        str(payoff),
        "--method",
        "kramers_moyal:6",
        "--output",
        str(tmp_path / "solution.csv"),
    ]
    assert cli.main(argv) == 4


def test_algebra_check_passes(tmp_path, capsys) -> None:
    fixture = tmp_path / "fixture.json"
    _write_fixture(
        fixture,
        {
            "position": {"symbol": {"expr": "x"}, "kernel": {"kind": "dirac"}},
            "smoothing": {"symbol": 1, "kernel": {"kind": "gaussian", "eps": "0.25"}},
        },
    )
    output = tmp_path / "report.json"
    argv = ["algebra-check", "--fixture", str(fixture), "--trials", "1", "--output", str(output)]
    assert cli.main(argv) == 0
    report = json.loads(output.read_text(encoding="utf-8"))
    assert report["passed"]
    assert report["associativity"]["defect_refined"] is not None
    assert "all algebra checks passed" in capsys.readouterr().out


def test_algebra_check_fails_for_commuting_operators(tmp_path) -> None:
    fixture = tmp_path / "fixture.json"
    _write_fixture(
        fixture,
        {
            "position": {"symbol": "x"},
            "wave": {"symbol": "cos(x)"},
        },
    )
    argv = ["algebra-check", "--fixture", str(fixture), "--output", str(tmp_path / "r.json")]
    assert cli.main(argv) == 1
    assert not json.loads((tmp_path / "r.json").read_text(encoding="utf-8"))["passed"]


def test_algebra_check_missing_fixture(tmp_path) -> None:
    argv = ["algebra-check", "--fixture", str(tmp_path / "missing.json")]
    assert cli.main([*argv, "--output", str(tmp_path / "r.json")]) == 2


def test_gauge(tmp_path, capsys) -> None:
    x = np.linspace(-3.0, 3.0, 121)
    v_csv = tmp_path / "v.csv"
    write_two_column_csv(v_csv, x, np.sin(x), header="v")
    output = tmp_path / "violation.csv"
    argv = [
        "gauge",
        "--v-csv",
        str(v_csv),
        "--eps-list",
        "0,0.1",
        "--xdot-max",
        "1",
        "--phase-points",
        "11",
        "--output",
        str(output),
    ]
    assert cli.main(argv) == 0
    lines = output.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "eps,sup_violation"
    assert len(lines) == 3
    assert float(lines[1].split(",")[1]) <= 1e-10
    assert float(lines[2].split(",")[1]) > 1e-6
    assert len(json.loads((tmp_path / "violation.json").read_text(encoding="utf-8"))) == 2
    assert "eps=0.10000000000000001" in capsys.readouterr().out


def test_config_file(tmp_path, capsys) -> None:
    config = tmp_path / "run.conf"
    config.write_text("kind = dirac\neps = 0\nn = 1024\nlength = 20\n", encoding="utf-8")
    output = tmp_path / "kernel.csv"
    assert cli.main(["kernel", "--config", str(config), "--output", str(output)]) == 0
    assert float(_printed(capsys)["variance"]) == pytest.approx(1.0, rel=1e-6)


def test_outputs_are_deterministic(tmp_path) -> None:
    argv = ["kernel", "--kind", "triangular", "--eps", "0.05", "-n", "1024"]
    first, second = tmp_path / "a" / "kernel.csv", tmp_path / "b" / "kernel.csv"
    assert cli.main([*argv, "--output", str(first)]) == 0
    assert cli.main([*argv, "--output", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.with_suffix(".json").read_bytes() == second.with_suffix(".json").read_bytes()


def test_unknown_command() -> None:
    with pytest.raises(SystemExit):
        cli.main(["integrate"])
