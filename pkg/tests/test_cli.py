import json
import subprocess
import sys
import time
import xml.etree.ElementTree as ET

import pytest

from nteg.cli import main
from nteg.perturbation import run_with_events
from nteg.scenario import (
    ScenarioError,
    bundled_names,
    load_scenario,
    parse_event_json,
    parse_scenario,
    read_trace_csv,
    trace_csv,
    trace_rows,
)


def last_json(out: str) -> dict:
    return json.loads(out.strip().splitlines()[-1])


def test_bundled_scenarios_parse():
    names = bundled_names()
    for name in ("two_player", "osc_unconstrained", "osc_damped", "reward_deviation", "ten_player"):
        assert name in names
    for name in names:
        load_scenario(name)


def test_simulate_two_player(tmp_path, capsys):
    assert main(["simulate", "two_player", "--out", str(tmp_path)]) == 0
    payload = last_json(capsys.readouterr().out)
    assert payload["settle_step"] == 3
    assert payload["final_profile"] == [1.0, 1.0]
    assert payload["equilibrium"]["family"] == "OneValue"
    rows = read_trace_csv((tmp_path / "trace.csv").read_text())
    assert rows[0][:3] == (0, 1, 3.0)
    assert (tmp_path / "report.json").exists()


def test_simulate_oscillation_exit_codes(tmp_path, capsys):
    assert main(["simulate", "osc_unconstrained", "--out", str(tmp_path / "a")]) == 2
    assert last_json(capsys.readouterr().out)["outcome"] == "CycleDetected"
    assert main(["simulate", "osc_damped", "--out", str(tmp_path / "b")]) == 0
    assert last_json(capsys.readouterr().out)["outcome"] == "Converged"


def test_csv_round_trip_and_determinism(tmp_path):
    scen = load_scenario("osc_damped")
    result = run_with_events(scen.initial, scen.spec, scen.dynamics, scen.events)
    text = trace_csv(result)
    assert text.splitlines()[0] == "step,player_id,contribution,utility,reliability"
    parsed = read_trace_csv(text)
    expected = list(trace_rows(result))
    assert len(parsed) == len(expected)
    for got, want in zip(parsed, expected):
        assert got[:2] == want[:2]
        for a, b in zip(got[2:], want[2:]):
            assert a == float("%.12g" % b)
    main(["simulate", "osc_damped", "--out", str(tmp_path / "x")])
    main(["simulate", "osc_damped", "--out", str(tmp_path / "y")])
    assert (tmp_path / "x/trace.csv").read_bytes() == (tmp_path / "y/trace.csv").read_bytes()


def test_svg_is_self_contained(tmp_path):
    main(["simulate", "ten_player", "--out", str(tmp_path)])
    text = (tmp_path / "trace.svg").read_text()
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    assert "href" not in text and "url(" not in text
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) >= 10


def test_malformed_scenarios_fail_without_artifacts(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "game": {"beta": [4, 6]},\n  "initial": [1, 2,\n}\n')
    out = tmp_path / "out"
    assert main(["simulate", str(bad), "--out", str(out)]) == 1
    assert not out.exists()
    assert "bad.json:4" in capsys.readouterr().err

    bad.write_text('{\n  "game": {"beta": [4, 6]},\n  "colour": "red"\n}\n')
    assert main(["simulate", str(bad), "--out", str(out)]) == 1
    assert "bad.json:3" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.parametrize("doc,fragment", [
    ({"game": {"beta": [4, 6]}, "random": {"n": 3}}, "exactly one"),
    ({"game": {"beta": [4, 4]}}, "distinct"),
    ({"game": {"beta": [4, 6]}, "initial": [1]}, "2 entries"),
    ({"game": {"beta": [4, 6]}, "events": [{"step": 5, "leave": 1}, {"step": 5, "leave": 2}]}, "increasing"),
    ({"game": {"beta": [4, 6]}, "dynamics": {"delta": 0.1, "delta_up": 0.2}}, "either"),
    ({"game": {"beta": [4, 6]}, "outputs": ["pdf"]}, "outputs"),
])
def test_scenario_validation(doc, fragment):
    with pytest.raises(ScenarioError, match=fragment):
        parse_scenario(json.dumps(doc))


def test_seed_environment_override(monkeypatch):
    doc = json.dumps({"random": {"n": 4}, "seed": 1})
    base = parse_scenario(doc)
    monkeypatch.setenv("NTEG_SEED", "2")
    other = parse_scenario(doc)
    assert other.seed == 2
    assert other.spec != base.spec
    monkeypatch.setenv("NTEG_SEED", "1")
    assert parse_scenario(doc).spec == base.spec


def test_event_parsing():
    assert parse_event_json('{"leave": 2}').player == 2
    dev = parse_event_json('{"deviate": {"player": 1, "value": 2.5}}')
    assert dev.frozen and dev.new_value == 2.5
    with pytest.raises(ScenarioError):
        parse_event_json('{"leave": 0}')
    with pytest.raises(ScenarioError):
        parse_event_json('{"swap": 1}')


def test_equilibria_command(capsys):
    assert main(["equilibria", "--beta", "4,6"]) == 0
    assert "x_eq ∈ [0, 2]" in capsys.readouterr().out
    main(["equilibria", "--beta", "3,6,9"])
    out = capsys.readouterr().out
    assert "OneValue i=1: x_eq ∈ [1.5, 3]" in out
    assert "OneValue i=0: x_eq ∈ [0, 1]" in out
    assert "TwoValue i=1: x_M ∈ (1, 1.5)" in out
    main(["equilibria", "--v", "2,2", "--c", "1,1", "--reward", "1"])
    out = capsys.readouterr().out
    assert "discriminant 25" in out and "(0, 1.25)" in out
    assert main(["equilibria", "--beta", "4,4"]) == 1


def test_perturb_command(capsys):
    assert main(["perturb", "one_value_join", "--event", '{"join": {"cost": 1, "valuation": 4}}']) == 0
    payload = last_json(capsys.readouterr().out)
    assert payload["prediction"]["others_change"] and payload["observed_change"]

    assert main(["perturb", "two_value", "--event", '{"leave": 2}']) == 0
    payload = last_json(capsys.readouterr().out)
    assert payload["prediction"]["others_change"] and payload["observed_change"]

    assert main(["perturb", "one_value_four", "--event", '{"deviate": {"player": 2, "value": 0.5}}']) == 0
    payload = last_json(capsys.readouterr().out)
    assert not payload["prediction"]["others_change"] and not payload["observed_change"]


def test_perturb_refuses_unsettled_and_reward(capsys):
    assert main(["perturb", "osc_unconstrained", "--event", '{"leave": 1}']) == 2
    assert main(["perturb", "reward_deviation", "--event", '{"leave": 1}']) == 1


def test_sweep_command(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "ten_player", "--axis", "delta", "--values", "0.1,0.3,0.5",
                 "--jobs", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "value,outcome,settle_step,family,x_eq,contributors,reliability"
    assert [line.split(",")[0] for line in lines[1:]] == ["0.1", "0.3", "0.5"]
    assert all(line.split(",")[1] == "Converged" for line in lines[1:])
    capsys.readouterr()
    assert main(["sweep", "ten_player", "--axis", "delta_up", "--values", "0.05,0.4", "--jobs", "1"]) == 0
    assert "delta_down" in capsys.readouterr().err


def test_seed_sweep_ten_players_all_converge(capsys):
    values = ",".join(str(s) for s in range(20))
    assert main(["sweep", "ten_player", "--axis", "seed", "--values", values]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    assert len(rows) == 20
    assert all(r.split(",")[1] == "Converged" for r in rows)


def test_sweep_rejects_empty_axis(capsys):
    assert main(["sweep", "ten_player", "--axis", "delta", "--values", ""]) == 1


def test_verify_command(capsys):
    assert main(["verify", "--profile", "0,2,2", "--beta", "3,6,9"]) == 0
    payload = last_json(capsys.readouterr().out)
    assert payload["oracle"] and payload["classify"]["is_equilibrium"] and payload["agree"]
    assert main(["verify", "--profile", "2,2,2", "--beta", "3,6,9"]) == 0
    payload = last_json(capsys.readouterr().out)
    assert not payload["oracle"] and payload["agree"]
    assert main(["verify", "--profile", "0,1.5,1.5", "--beta", "3,6,9"]) == 0
    payload = last_json(capsys.readouterr().out)
    assert payload["classify"]["is_equilibrium"] and payload["boundary"]
    assert main(["verify", "--profile", "1,x", "--beta", "3,6"]) == 1


def test_console_script_runs_ten_players_quickly(tmp_path):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "nteg.cli", "simulate", "ten_player", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    assert elapsed < 1.0
