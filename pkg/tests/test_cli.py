import csv
import json
import logging
import subprocess
import sys

import pytest

from freefront import cli
from freefront.solver import NonFiniteValue

PROBLEM = {"d1": 1, "d2": 1, "p": 2, "q": 2, "mu": 1, "rho": 1, "s0": 1}


def write_config(tmp_path, name="config.json", **sections):
    body = {"problem": dict(PROBLEM), "initial": {"family": "parabola", "amplitude": 0.01}}
    body.update(sections)
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_minimal_simulate(tmp_path):
    cfg = write_config(tmp_path, solver={"t_end": 0.5})
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("front.csv", "snapshots.csv", "verdict.json"):
        assert (out / name).exists()
    rows = read_rows(out / "front.csv")
    assert list(rows[0]) == cli.FRONT_COLUMNS
    assert float(rows[-1]["t"]) == 0.5
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["status"] == "completed"
    assert verdict["spec"] == {k: float(v) for k, v in PROBLEM.items()}


def test_blowup_config_exits_zero(tmp_path):
    cfg = write_config(tmp_path, initial={"family": "parabola", "amplitude": 50}, solver={"t_end": 5})
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["kind"] == "BlowUp"
    assert verdict["evidence"]["t_cross"] < 1.0


def test_negative_exponent_names_field(tmp_path, capsys):
    cfg = write_config(tmp_path, problem=dict(PROBLEM, p=-1))
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "parameter p " in capsys.readouterr().err


@pytest.mark.parametrize("sections, fragment", [
    ({"solver": {"Nx": 3}}, "solver.Nx"),
    ({"extra": {}}, "extra"),
    ({"problem": {"d1": 1}}, "problem.d2"),
    ({"solver": {"N": 32.5}}, "solver.N"),
    ({"solver": {"t_end": "long"}}, "solver.t_end"),
    ({"initial": {"family": "parabola"}}, "initial.amplitude"),
    ({"initial": {"family": "box", "amplitude": 1}}, "box"),
    ({"initial": {"samples_u": [1, 0.5, 0.1], "samples_v": [1, 0.5, 0]}}, "u0"),
])
def test_config_errors_exit_one(tmp_path, capsys, sections, fragment):
    cfg = write_config(tmp_path, **sections)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert fragment in capsys.readouterr().err


def test_unreadable_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["simulate", "--config", str(bad)]) == 1
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == 1


def test_sampled_initial_data(tmp_path):
    xs = [i / 8 for i in range(9)]
    cfg = write_config(tmp_path, initial={"samples_u": [0.01 * (1 - x * x) for x in xs],
                                          "samples_v": [0.02 * (1 - x * x) for x in xs]},
                       solver={"t_end": 0.1})
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


def test_non_finite_exits_two(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise NonFiniteValue("u became NaN at node 3")

    monkeypatch.setattr(cli, "simulate", boom)
    cfg = write_config(tmp_path)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_simulate_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, solver={"t_end": 1.0, "snapshot_times": [0.5]})
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("front.csv", "snapshots.csv", "verdict.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    raw = (a / "front.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_float_format_round_trips():
    x = 0.1 + 0.2
    assert float(cli.fmt(x)) == x
    assert cli.fmt(3) == "3" and cli.fmt(None) == ""


def test_snapshot_rows_cover_grid(tmp_path):
    cfg = write_config(tmp_path, solver={"t_end": 0.2, "N": 16, "snapshot_times": [0.1]})
    out = tmp_path / "o"
    cli.main(["simulate", "--config", str(cfg), "--out", str(out)])
    rows = read_rows(out / "snapshots.csv")
    assert len(rows) == 3 * 17
    assert {float(r["t"]) for r in rows} == {0.0, 0.1, 0.2}
    last = [r for r in rows if float(r["t"]) == 0.2]
    assert float(last[-1]["y"]) == 1.0 and float(last[-1]["u"]) == 0.0


# -- sweep ----------------------------------------------------------------------

def sweep_config(tmp_path, **sweep):
    return write_config(tmp_path, solver={"t_end": 2.0}, sweep=sweep)


def test_sweep_grid_regimes(tmp_path):
    cfg = sweep_config(tmp_path, p=[2, 1, 0.5], q=[0.5, 1, 2], amplitude=[50, 0.01], max_runs=18)
    out = tmp_path / "o"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out), "--jobs", "2"]) == 0
    rows = read_rows(out / "regime_map.csv")
    assert len(rows) == 18
    keys = [(float(r["p"]), float(r["q"]), float(r["amplitude"])) for r in rows]
    assert keys == sorted(keys)
    for r in rows:
        if float(r["p"]) * float(r["q"]) <= 1:
            assert r["verdict"] != "BlowUp"
    big = {(r["p"], r["q"]): r["verdict"] for r in rows if r["amplitude"] == "50"}
    assert big[("2", "2")] == "BlowUp"

    again = tmp_path / "again"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(again)]) == 0
    assert (out / "regime_map.csv").read_bytes() == (again / "regime_map.csv").read_bytes()


def test_single_cell_sweep_matches_simulate(tmp_path):
    cfg = sweep_config(tmp_path, amplitude=[0.01])
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "m")]) == 0
    row = read_rows(tmp_path / "s" / "regime_map.csv")[0]
    verdict = json.loads((tmp_path / "m" / "verdict.json").read_text())
    assert row["verdict"] == verdict["kind"] == "GlobalCertified"
    assert float(row["certified_eps"]) == verdict["evidence"]["eps1"]


def test_sweep_cap_enforced(tmp_path, capsys):
    cfg = sweep_config(tmp_path, amplitude=[0.01, 0.02, 0.03], max_runs=2)
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "max_runs" in capsys.readouterr().err


def test_failed_cell_recorded(tmp_path, monkeypatch):
    real = cli.simulate

    def flaky(spec, data, config):
        if data.u0.amplitude == 0.02:
            raise NonFiniteValue("v became inf")
        return real(spec, data, config)

    monkeypatch.setattr(cli, "simulate", flaky)
    cfg = sweep_config(tmp_path, amplitude=[0.01, 0.02, 0.03])
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "regime_map.csv")
    assert [r["verdict"] for r in rows] == ["GlobalCertified", "Error", "GlobalCertified"]
    assert "NonFiniteValue" in rows[1]["error"]


# -- cascade / mms / verify -------------------------------------------------------

def test_cascade_sublinear(tmp_path):
    cfg = write_config(tmp_path, problem=dict(PROBLEM, p=0.5), initial={"family": "parabola", "amplitude": 1},
                       solver={"t_end": 1.0, "snapshot_times": [0.5]}, cascade={"schedule": [1, 2, 4, 8]})
    out = tmp_path / "o"
    assert cli.main(["cascade", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "cascade.json").read_text())
    assert report["schedule"] == [1, 2, 4, 8]
    assert report["differences_non_increasing"]
    assert all(r["holds"] for r in report["ordering"])


def test_cascade_lipschitz_warns(tmp_path, caplog):
    cfg = write_config(tmp_path, solver={"t_end": 0.1})
    out = tmp_path / "o"
    with caplog.at_level(logging.WARNING):
        assert cli.main(["cascade", "--config", str(cfg), "--out", str(out)]) == 0
    assert "Lipschitz regime" in caplog.text
    report = json.loads((out / "cascade.json").read_text())
    assert report["lipschitz"] and report["schedule"] == [0]


def test_mms_command(tmp_path):
    path = tmp_path / "mms.json"
    path.write_text(json.dumps({"problem": PROBLEM}))
    out = tmp_path / "o"
    assert cli.main(["mms", "--config", str(path), "--out", str(out)]) == 0
    rows = read_rows(out / "convergence.csv")
    assert list(rows[0]) == cli.CONVERGENCE_COLUMNS
    assert [int(r["N"]) for r in rows] == [32, 64, 128]
    assert float(rows[-1]["order_u"]) >= 1.8


def test_verify_command(tmp_path, capsys):
    path = tmp_path / "v.json"
    path.write_text(json.dumps({"verify": {"ordering_rtol": 1e-6}}))
    out = tmp_path / "o"
    assert cli.main(["verify", "--config", str(path), "--out", str(out)]) == 0
    suite = json.loads((out / "suite.json").read_text())
    assert suite["green"]
    assert "PASS" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, solver={"t_end": 0.05})
    res = subprocess.run([sys.executable, "-m", "freefront", "simulate", "--config", str(cfg),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "o" / "front.csv").exists()
