import json
import math

import pytest

import switchflock as sf
from switchflock import cli

from conftest import suite_run_config


def oracle_config():
    return {
        "model": "HK", "N": 2, "d": 1,
        "kernel": {"family": "constant", "value": 1.0},
        "schedule": {"family": "explicit", "times": [0.0, 1.0, 1.5]},
        "horizon": 3.0, "h_max": 1e-3, "seed": 0,
        "init": {"positions": [[0.0], [1.0]]},
    }


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    return header, rows


def test_simulate_oracle_config(tmp_path):
    cfg_path = write_config(tmp_path, oracle_config())
    out = tmp_path / "out"
    rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out / "trajectory.csv")
    assert header[:3] == ["t", "alpha", "d"]
    sch = sf.explicit_schedule([0.0, 1.0, 1.5], 3.0)
    for row in rows[:: max(1, len(rows) // 40)]:
        t, d = float(row["t"]), float(row["d"])
        assert d == pytest.approx(sf.two_agent_hk(1.0, 1.0, sch, t), abs=1e-7)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["model"] == "HK"
    assert summary["d_final"] == pytest.approx(math.exp(-4.0), rel=1e-7)


def test_simulate_byte_identical_reruns(tmp_path):
    cfg_path = write_config(tmp_path, oracle_config())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out2)]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == \
        (out2 / "trajectory.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == \
        (out2 / "summary.json").read_bytes()


def test_simulate_rejects_bad_cap(tmp_path, capsys):
    cfg = oracle_config()
    cfg["schedule"] = {"family": "constant", "good_len": 1.0, "bad_len": 0.8}
    cfg_path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 3
    err = capsys.readouterr().err
    assert "ln2/K" in err and "0.6931" in err
    assert not (out / "trajectory.csv").exists()


def test_simulate_zero_horizon(tmp_path):
    cfg = oracle_config()
    cfg["horizon"] = 0.0
    cfg_path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
    _, rows = read_csv(out / "trajectory.csv")
    assert len(rows) == 1 and float(rows[0]["t"]) == 0.0


def test_simulate_blowup_exit_code(tmp_path, capsys):
    # admissible schedule, but the state starts near the guard: repulsion
    # growth crosses the 1e12 blow-up limit and must exit 2, not overflow
    cfg = oracle_config()
    cfg["schedule"] = {"family": "explicit", "times": [0.0, 1e-6, 0.6]}
    cfg["horizon"] = 0.6
    cfg["h_max"] = 1e-2
    cfg["init"] = {"positions": [[0.0], [9e11]]}
    cfg_path = write_config(tmp_path, cfg)
    rc = cli.main(["simulate", "--config", str(cfg_path),
                   "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "blow-up" in capsys.readouterr().err


def test_certify_hk_all_ok(tmp_path):
    cfg = suite_run_config(1)
    cfg["horizon"] = 4.0
    cfg_path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    rc = cli.main(["certify", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "certificates.json").read_text())
    assert report["all_ok"] is True
    certs = report["certificates"]
    assert certs["contraction"]["ok"] and certs["growth"]["ok"]
    assert certs["max_principle"]["ok"] and certs["bounds"]["ok"]
    for entry in certs["contraction"]["per_interval"]:
        assert set(entry) == {"n", "d_start", "d_end", "C2n", "ok", "margin"}


def test_certify_fault_injection_locates_violation():
    cfg = suite_run_config(1)
    cfg["horizon"] = 4.0
    ctx, traj, report, extra = cli.run_certify(
        cfg, fault={"sample": 1500, "agent": 0, "coord": 0, "delta": 1.0})
    assert report["all_ok"] is False
    mp = report["certificates"]["max_principle"]
    assert len(mp["violations"]) == 1
    assert mp["violations"][0]["t"] == pytest.approx(traj.times[1500])


def test_certify_cs_flocking(tmp_path):
    cfg = {
        "model": "CS", "N": 5, "d": 2,
        "kernel": {"family": "rational", "beta": 0.25, "sup_norm_K": 1.0},
        "schedule": {"family": "constant", "good_len": 2.0, "bad_len": 0.1},
        "horizon": 14.7, "h_max": 1e-3, "seed": 3,
        "init": {"positions_box": [-1.0, 1.0], "velocities_box": [-0.5, 0.5]},
        "tolerances": {"eps_v": 1e-2},
    }
    cfg_path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    rc = cli.main(["certify", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "certificates.json").read_text())
    assert report["all_ok"] is True
    verdict = report["certificates"]["flocking_verdict"]
    assert verdict["flocked"] is True
    assert verdict["d_star_bound_ok"] is True
    header, rows = read_csv(out / "trajectory.csv")
    assert header[:4] == ["t", "alpha", "dX", "dV"]
    assert {"D", "phi", "L"}.issubset(header)


def test_certify_cs_rejects_short_good_intervals(tmp_path, capsys):
    cfg = {
        "model": "CS", "N": 3, "d": 1,
        "kernel": {"family": "rational", "beta": 0.25, "sup_norm_K": 1.0},
        "schedule": {"family": "constant", "good_len": 0.9, "bad_len": 0.1},
        "horizon": 3.0, "seed": 0,
    }
    cfg_path = write_config(tmp_path, cfg)
    rc = cli.main(["certify", "--config", str(cfg_path),
                   "--out", str(tmp_path / "out")])
    assert rc == 3
    assert "1/K" in capsys.readouterr().err


def test_sweep_bad0_degrades_final_diameter(tmp_path):
    cfg = suite_run_config(2)
    cfg["horizon"] = 5.0
    cfg_path = write_config(tmp_path, cfg)
    out = tmp_path / "sweep"
    rc = cli.main(["sweep", "--config", str(cfg_path), "--out", str(out),
                   "--axis", "schedule.bad0",
                   "--values", "0.1,0.3,0.5,0.69"])
    assert rc == 0
    header, rows = read_csv(out / "aggregate.csv")
    assert header == ["value", "d_final", "dV_final", "all_ok", "error"]
    assert len(rows) == 4
    finals = [float(r["d_final"]) for r in rows]
    assert all(b > a for a, b in zip(finals, finals[1:])), finals
    assert all(r["error"] == "" for r in rows)
    assert (out / "run_000" / "trajectory.csv").exists()


def test_sweep_empty_values(tmp_path):
    cfg_path = write_config(tmp_path, oracle_config())
    out = tmp_path / "sweep"
    rc = cli.main(["sweep", "--config", str(cfg_path), "--out", str(out),
                   "--axis", "horizon", "--values", ""])
    assert rc == 0
    _, rows = read_csv(out / "aggregate.csv")
    assert rows == []


def test_validate_subcommand(tmp_path, capsys):
    cfg = {
        "model": "HK",
        "kernel": {"family": "rational", "sup_norm_K": 1.0,
                   "analytic_floor": 0.05},
        "schedule": {"family": "geometric", "good_len": 1.0, "bad0": 0.1,
                     "ratio": 0.5},
        "horizon": 10.0,
    }
    cfg_path = write_config(tmp_path, cfg)
    rc = cli.main(["validate", "--config", str(cfg_path)])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {"bad_cap_ok", "S1", "S2_diverges", "bad_total",
                           "good_floor_ok", "first_violation"}
    assert report["bad_cap_ok"] is True
    assert report["S2_diverges"] is True
    assert report["bad_total"] == pytest.approx(0.2, abs=1e-12)


def test_seed_override_changes_run(tmp_path):
    cfg = suite_run_config(3)
    cfg["horizon"] = 1.0
    cfg_path = write_config(tmp_path, cfg)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out1),
                     "--seed", "77"]) == 0
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out2),
                     "--seed", "78"]) == 0
    assert (out1 / "trajectory.csv").read_bytes() != \
        (out2 / "trajectory.csv").read_bytes()
