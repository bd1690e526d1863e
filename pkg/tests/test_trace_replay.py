import json

import numpy as np
import pytest

from dmpsteer.session import run
from dmpsteer.scripted import ReplayUser, ScriptedUser, ScriptEntry
from dmpsteer.trace import (
    TraceVersionError,
    eq1_audit,
    extract_inputs,
    load_trace,
    traces_equal,
)

from conftest import mini_scenario


@pytest.fixture(scope="module")
def recorded(tmp_path_factory):
    sc = mini_scenario()
    user = ScriptedUser(
        [ScriptEntry(start={"time_gte": 0.2}, stop={"time_gte": 1.4}, u=[0.7, -0.3, 0.5])]
    )
    path = tmp_path_factory.mktemp("traces") / "run.jsonl"
    res = run(sc, user=user, record_path=str(path))
    return sc, res, path


def test_save_load_round_trip_bit_exact(recorded):
    _, res, path = recorded
    loaded = load_trace(path)
    assert traces_equal(res.trace, loaded)
    assert loaded.complete
    assert loaded.header["config_hash"] == res.trace.header["config_hash"]


def test_loaded_trace_still_passes_audit(recorded):
    _, _, path = recorded
    assert eq1_audit(load_trace(path)) == 0.0


def test_replay_from_file_reproduces_trace(recorded):
    sc, res, path = recorded
    loaded = load_trace(path)
    replay = run(sc, user=ReplayUser(extract_inputs(loaded)))
    assert traces_equal(res.trace, replay.trace)


def test_saved_file_is_line_json(recorded):
    _, _, path = recorded
    lines = path.read_text().splitlines()
    header = json.loads(lines[0])
    assert header["schema"] == "trace/1"
    rec = json.loads(lines[1])
    assert set(rec) >= {"t", "seg", "s", "tau", "xn", "dy", "xc", "u", "pos", "f", "sat"}
    assert json.loads(lines[-1]).get("end") is True


def test_truncated_file_flags_partial(recorded, tmp_path):
    _, _, path = recorded
    lines = path.read_text().splitlines()
    torn = tmp_path / "torn.jsonl"
    torn.write_text("\n".join(lines[:50]) + '\n{"t": 0.3, "seg": "appr')  # torn tail
    loaded = load_trace(torn)
    assert not loaded.complete
    assert len(loaded) == 49  # header consumed one line


def test_version_mismatch_rejected(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"schema": "trace/999", "dt": 0.004}\n')
    with pytest.raises(TraceVersionError):
        load_trace(bad)


def test_resaved_trace_is_byte_identical(recorded, tmp_path):
    _, _, path = recorded
    loaded = load_trace(path)
    out = tmp_path / "resaved.jsonl"
    loaded.save(out)
    assert out.read_bytes() == path.read_bytes()
