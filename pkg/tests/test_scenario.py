from __future__ import annotations

import pytest

from conftest import scenario_text
from zwavesim.attacker import DosController, WeakestLinkProbe
from zwavesim.presets import PRESETS, preset_text
from zwavesim.scenario import (
    ParseError,
    ValidationError,
    format_duration,
    load_scenario,
    parse_bool,
    parse_duration,
    parse_id_list,
)
from zwavesim.sim import HOUR, MINUTE, MS, SECOND


@pytest.mark.parametrize("text,us", [
    ("250us", 250), ("350ms", 350 * MS), ("2s", 2 * SECOND), ("1.5", 1_500_000),
    ("71min", 71 * MINUTE), ("12h", 12 * HOUR), ("3 sec", 3 * SECOND),
])
def test_parse_duration(text, us):
    assert parse_duration(text) == us


@pytest.mark.parametrize("bad", ["", "fast", "-3s", "10 parsecs"])
def test_parse_duration_rejects(bad):
    with pytest.raises(ValueError):
        parse_duration(bad)


def test_format_duration_round_trips():
    for us in (0, 350 * MS, 71 * MINUTE, 12 * HOUR, 1234):
        assert parse_duration(format_duration(us)) == us


def test_small_parsers():
    assert parse_bool("Yes") and not parse_bool("off")
    assert parse_id_list("0x05, 6,0x07") == (5, 6, 7)
    with pytest.raises(ValueError):
        parse_bool("maybe")


def test_load_minimal():
    sc = load_scenario(scenario_text(duration="1h", devices=("contact", "motion")))
    assert sc.duration == HOUR
    assert [d.config.node_id for d in sc.devices] == [5, 6]
    assert sc.devices[1].config.kind == "motion"
    assert sc.controller.home_id == 0xC0FFEE01
    assert sc.attacker is None


def _errors(text: str) -> list[str]:
    with pytest.raises(ValidationError) as exc:
        load_scenario(text)
    return exc.value.errors


def test_duplicate_node_ids_name_both_lines():
    text = scenario_text().replace("node_id = 5", "node_id = 0x05") + \
        "\n[device]\nnode_id = 5\nkind = contact\nposition = 1,1\n"
    (err,) = _errors(text)
    lines = [i for i, ln in enumerate(text.splitlines(), 1) if ln == "[device]"]
    assert f"lines {lines[0]} and {lines[1]}" in err and "0x05" in err


def test_missing_controller():
    errs = _errors("[scenario]\nseed = 1\nduration = 1h\n")
    assert any("[controller]" in e for e in errs)


def test_no_devices():
    errs = _errors(scenario_text(devices=()))
    assert any("device" in e for e in errs)


def test_unknown_key_and_section_reported_with_line():
    text = scenario_text() + "\n[weather]\nrain = yes\n"
    text = text.replace("kind = contact", "kind = contact\ncolour = red")
    errs = _errors(text)
    line = text.splitlines().index("colour = red") + 1
    assert any("colour" in e and f"line {line}" in e for e in errs)
    assert any("[weather]" in e for e in errs)


def test_soc_must_be_a_fraction():
    errs = _errors(scenario_text(device_extra="soc = 1.5"))
    assert any("soc" in e for e in errs)


def test_attacker_must_reference_known_nodes():
    errs = _errors(scenario_text(attacker="strategy = drain_flirs\ntarget = 0x09\nposition = 1,1"))
    assert any("0x09" in e for e in errs)


def test_known_nodes_need_home_id():
    errs = _errors(scenario_text(attacker="strategy = probe\nposition = 1,1\nknown_nodes = 0x05"))
    assert any("known_nodes" in e for e in errs)


def test_malformed_lines_are_parse_errors():
    with pytest.raises(ParseError, match="line 2"):
        load_scenario("[scenario]\nseed 1\n")
    with pytest.raises(ParseError, match="duplicate key"):
        load_scenario("[scenario]\nseed = 1\nSEED = 2\n")


def test_stimulus_repetition():
    sc = load_scenario(scenario_text(
        stimuli="[stimulus]\ntime = 10s\nevery = 5s\ncount = 3\ntarget = 0x05\nkind = door_open\n"))
    assert [s.time for s in sc.stimuli] == [10 * SECOND, 15 * SECOND, 20 * SECOND]


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_validates(name):
    sc = load_scenario(preset_text(name))
    assert sc.devices and sc.controller


def test_preset_strategies():
    assert isinstance(load_scenario(preset_text("weakest_link")).attacker.strategy, WeakestLinkProbe)
    foreign = load_scenario(preset_text("dos_controller_foreign")).attacker.strategy
    assert isinstance(foreign, DosController) and foreign.alter_home_id
