import json

import numpy as np
import pytest

from resetsim.cli import run_check
from resetsim.config import ConfigError, config_hash, load_config, parse_config
from resetsim.fixtures import fixture_names, get_fixture

RAW = {"raw": {"A": [[0.0, -1.0], [1.0, 0.0]], "C": [1.0, -1.0], "n_r": 1}, "initial_state": [0.75, 0.25]}


def _with(doc, path, value):
    d = json.loads(json.dumps(doc))
    node = d
    for k in path[:-1]:
        node = node[k]
    if value is KeyError:
        del node[path[-1]]
    else:
        node[path[-1]] = value
    return d


@pytest.mark.parametrize(
    "path, value, field",
    [
        (("raw", "A"), [[0.0, 1.0], [1.0]], "raw.A"),
        (("raw", "A"), [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0]], "raw.A"),
        (("raw", "C"), [1.0, 0.0, 0.0], "raw.C"),
        (("raw", "C"), [1.0, "x"], "raw.C[1]"),
        (("raw", "n_r"), 5, "raw.n_r"),
        (("raw", "n_r"), KeyError, "raw.n_r"),
        (("initial_state",), [1.0], "initial_state"),
        (("numeric_options",), {"t_max": -1.0}, "numeric_options.t_max"),
        (("numeric_options",), {"bogus": 1.0}, "numeric_options.bogus"),
        (("extra",), 1, "extra"),
    ],
)
def test_raw_errors_name_the_field(path, value, field):
    with pytest.raises(ConfigError) as ei:
        parse_config(_with(RAW, path, value))
    assert ei.value.path == field


def test_structured_errors_name_the_field():
    doc = get_fixture("table1-row4")
    bad = _with(doc, ("structured", "plant", "B_p"), [1.0, 2.0])
    with pytest.raises(ConfigError, match=r"structured\.plant\.B_p"):
        parse_config(bad)
    bad = _with(doc, ("structured", "compensator", "n_rho"), 0)
    with pytest.raises(ConfigError, match=r"structured\.compensator\.n_rho"):
        parse_config(bad)
    bad = _with(doc, ("structured", "compensator", "series", "R2", "A"), [[-3.0]])
    with pytest.raises(ConfigError, match=r"series"):
        parse_config(bad)
    bad = _with(doc, ("structured", "exosystems", "disturbance", "w0"), [1.0])
    with pytest.raises(ConfigError, match=r"exosystems\.disturbance\.w0"):
        parse_config(bad)
    bad = _with(doc, ("structured", "exosystems", "noise"), {"sinusoids": [-1.0]})
    with pytest.raises(ConfigError, match=r"noise\.sinusoids"):
        parse_config(bad)


def test_exactly_one_description():
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config({"initial_state": [1.0]})
    both = dict(RAW, structured=get_fixture("table1-row1")["structured"])
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(both)


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "raw": {"A": [[1]] "C": [1], "n_r": 1}\n}\n')
    with pytest.raises(ConfigError) as ei:
        load_config(p)
    assert ":2:" in str(ei.value)


def test_options_and_hash():
    cfg = parse_config(dict(RAW, numeric_options={"t_max": 3.0, "max_events": 7}))
    assert cfg.options.t_max == 3.0 and cfg.options.max_events == 7
    assert config_hash(RAW) == config_hash(json.loads(json.dumps(RAW)))
    assert config_hash(RAW) != config_hash(_with(RAW, ("initial_state",), [0.75, 0.26]))


def test_tolerance_env_reaches_systems(monkeypatch):
    monkeypatch.setenv("RESETSIM_TOL", "1e-6")
    assert parse_config(RAW).system.tol == 1e-6


@pytest.mark.parametrize("name", fixture_names())
def test_export_parse_round_trip(name, tmp_path):
    doc = get_fixture(name)
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(doc))
    cfg = load_config(p)
    again = parse_config(doc)
    assert np.array_equal(cfg.system.A, again.system.A)
    assert cfg.hash == again.hash
    rep, _ = run_check(cfg)
    assert rep.verdict.value == doc["expected"]["verdict"]


def test_fixture_corpus():
    names = fixture_names()
    assert len(names) >= 16
    assert {f"table1-row{k}" for k in range(1, 9)} <= set(names)
    for n in names:
        doc = get_fixture(n)
        assert doc["description"] and "expected" in doc
    row4 = get_fixture("table1-row4")
    assert row4["blocks"] == {"P": "1/(s+1)", "G1": "1/(s+2)", "R2": "1/s", "Sigma": "1/s^2"}
    iv2 = get_fixture("example-IV.2")["raw"]
    assert iv2["A"] == [[0.0, -3.0, 1.0], [1.0, -1.0, 0.0], [0.0, -1.0, -1.0]] and iv2["C"] == [0.0, 1.0, 0.0]
    with pytest.raises(KeyError):
        get_fixture("nope")
