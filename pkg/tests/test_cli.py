import numpy as np
import yaml

from dmpsteer.channels import FREE_SPACE_CHANNELS
from dmpsteer.cli import EXIT_CONFIG, EXIT_OK, main
from dmpsteer.demos import demo_to_doc, min_jerk, waypoint_demo
from dmpsteer.scenario import save_scenario

from conftest import mini_scenario


def test_run_and_metrics_round_trip(tmp_path, capsys):
    bundle = tmp_path / "mini"
    bundle.mkdir()
    scenario_path = save_scenario(mini_scenario(), str(bundle))
    trace_path = tmp_path / "out.jsonl"

    code = main(["run", "--scenario", scenario_path, "--user", "none", "--record", str(trace_path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "t_input (corrective)" in out and "t_total" in out
    assert trace_path.exists()

    code = main(["metrics", str(trace_path), "--scenario", scenario_path])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "t_input (corrective)  0.000 s" in out
    assert "saturation ticks" in out


def test_run_with_user_script_file(tmp_path, capsys):
    bundle = tmp_path / "mini"
    bundle.mkdir()
    scenario_path = save_scenario(mini_scenario(), str(bundle))
    user_path = tmp_path / "user.yaml"
    yaml.safe_dump(
        [{"start": {"time_gte": 0.2}, "stop": {"time_gte": 0.8}, "u": [0.5, 0.0, 0.0]}],
        open(user_path, "w"),
    )
    code = main(["run", "--scenario", scenario_path, "--user", str(user_path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "t_input (corrective)  0.6" in out


def test_replay_user_source(tmp_path, capsys):
    bundle = tmp_path / "mini"
    bundle.mkdir()
    scenario_path = save_scenario(mini_scenario(), str(bundle))
    t1 = tmp_path / "a.jsonl"
    t2 = tmp_path / "b.jsonl"
    user_path = tmp_path / "user.yaml"
    yaml.safe_dump(
        [{"start": {"time_gte": 0.1}, "stop": {"time_gte": 1.0}, "u": [0.3, -0.2, 0.1]}],
        open(user_path, "w"),
    )
    assert main(["run", "--scenario", scenario_path, "--user", str(user_path), "--record", str(t1)]) == EXIT_OK
    assert main(["run", "--scenario", scenario_path, "--user", f"replay:{t1}", "--record", str(t2)]) == EXIT_OK
    capsys.readouterr()
    assert t1.read_bytes() == t2.read_bytes()


def test_missing_scenario_is_exit_2(capsys):
    assert main(["run", "--scenario", "/nonexistent/s.yaml", "--user", "none"]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_metrics_version_mismatch_is_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"schema": "trace/777", "dt": 0.004}\n')
    assert main(["metrics", str(bad)]) == EXIT_CONFIG
    assert "trace/777" in capsys.readouterr().err


def test_metrics_partial_trace_flagged(tmp_path, capsys):
    bundle = tmp_path / "mini"
    bundle.mkdir()
    scenario_path = save_scenario(mini_scenario(), str(bundle))
    trace_path = tmp_path / "out.jsonl"
    assert main(["run", "--scenario", scenario_path, "--user", "none", "--record", str(trace_path)]) == EXIT_OK
    lines = trace_path.read_text().splitlines()
    trace_path.write_text("\n".join(lines[:-1]))  # drop the end marker
    capsys.readouterr()
    assert main(["metrics", str(trace_path)]) == EXIT_OK
    assert "partial trace" in capsys.readouterr().out


def test_fit_subcommand(tmp_path, capsys):
    demo = waypoint_demo(
        FREE_SPACE_CHANNELS, np.array([[0.0, 0.0, 0.0], [0.1, 0.05, 0.02]]), T=1.0, dt=4e-3
    )
    demo_path = tmp_path / "demo.yaml"
    yaml.safe_dump(demo_to_doc(demo), open(demo_path, "w"), sort_keys=False)
    model_path = tmp_path / "model.yaml"
    assert main(["fit", "--demo", str(demo_path), "--out", str(model_path)]) == EXIT_OK
    doc = yaml.safe_load(open(model_path))
    assert doc["schema"] == "dmp-model/1"
    assert len(doc["channels"]) == 3
    assert "fitted 3 channels" in capsys.readouterr().out


def test_unknown_user_spec_is_exit_2(tmp_path, capsys):
    bundle = tmp_path / "mini"
    bundle.mkdir()
    scenario_path = save_scenario(mini_scenario(), str(bundle))
    assert main(["run", "--scenario", scenario_path, "--user", "notauser"]) == EXIT_CONFIG
