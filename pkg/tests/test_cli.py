import json

import pytest

from hedonic_tasks.cli import main


def test_run_writes_log(tmp_path, capsys):
    assert main(["run", "--seed", "3", "--out", str(tmp_path)]) == 0
    logs = list(tmp_path.glob("run/*/formation_log.csv"))
    assert len(logs) == 1
    assert logs[0].read_text().startswith("turn,player_kind,player_index,from_size,to_size,gain")
    assert "avg_payoff" in capsys.readouterr().out


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"task_count": 10, "surprise": True}))
    assert main(["run", "--config", str(bad)]) == 2
    bad.write_text("{")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["run", "--eq4-form", "nonsense"]) == 2
    assert main(["dynamics"]) == 2  # no dynamics section
    assert main(["sweep"]) == 2


def test_sweep_output_tree(tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"name": "p", "sweep_var": "beta", "values": [0.5], "replications": 1,
                                "orders": 1, "base": {"task_count": 8}}))
    assert main(["sweep", "--config", str(plan), "--out", str(tmp_path / "results"), "--orders", "2",
                 "--eq4-form", "standard"]) == 0
    (d,) = list((tmp_path / "results" / "p").iterdir())
    assert {f.name for f in d.iterdir()} == {"raw.csv", "summary.csv", "plan.json"}
    saved = json.loads((d / "plan.json").read_text())
    assert saved["orders"] == 2 and saved["eq4_form"] == "standard"


def test_dynamics_csv(tmp_path):
    cfg = tmp_path / "dyn.json"
    cfg.write_text(json.dumps({"task_count": 8, "dynamics": {"psi": 10, "speed": 5, "churn_rate": 1,
                                                              "horizon": 60}}))
    assert main(["dynamics", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    (f,) = list(tmp_path.glob("dynamics/*/metrics.csv"))
    assert f.read_text().splitlines()[0] == "timestamp,event,coalition,size,payoff"


@pytest.mark.parametrize("check", ["stability", "oracle", "polling", "tsp"])
def test_verify(check, capsys):
    assert main(["verify", check, "--count", "3"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_verify_failure_exit_code(monkeypatch):
    from hedonic_tasks import cli
    from hedonic_tasks.verify import VerifyReport

    monkeypatch.setitem(cli.CHECKS, "tsp", lambda **kw: VerifyReport("tsp", 1, [(0, "forced")]))
    assert main(["verify", "tsp"]) == 1
