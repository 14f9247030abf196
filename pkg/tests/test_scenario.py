import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from femtosim.engine import BaselineMode, Scenario, SweepSettings
from femtosim.errors import ConfigError, ScenarioSyntaxError
from femtosim.protocol import MACRO, UeState
from femtosim.radio import RadioConfig
from femtosim.scenario import (
    SCENARIO_DIR_ENV,
    load_scenario,
    parse_scenario,
    resolve_scenario_path,
    serialize_scenario,
)
from femtosim.topology import LayoutSpec

from scenarios import random_scenario


def test_empty_file_is_all_defaults():
    s = parse_scenario("")
    assert s == Scenario()
    assert s.radio == RadioConfig() and s.layout_spec == LayoutSpec()
    assert len(s.layout.neighbors) == 30
    assert (s.radio.f_ue, s.radio.p0_fap, s.radio.gamma_inner) == (1800, 15, 12.55)


def test_comments_and_blank_lines():
    s = parse_scenario("# hello\n\n[radio]  # trailing\n  f_ue = 900   # MHz\n")
    assert s.radio.f_ue == 900.0


def test_threshold_ordering_error():
    with pytest.raises(ConfigError, match=r"^<scenario>:3: .*gamma_outer"):
        parse_scenario("[radio]\ngamma_inner = 12.55\ngamma_outer = 13\n")


def test_unknown_key_names_key_and_line():
    with pytest.raises(ScenarioSyntaxError) as info:
        parse_scenario("[radio]\nf_ue = 1800\nfue_power = 20\n", source="a.scn")
    assert info.value.line == 3
    assert "fue_power" in str(info.value)
    assert str(info.value).startswith("a.scn:3:")


@pytest.mark.parametrize("text, line", [
    ("[radios]\n", 1),
    ("f_ue = 1\n", 1),
    ("[radio]\nf_ue 1800\n", 2),
    ("[radio]\nf_ue = abc\n", 2),
    ("[radio]\nf_ue = 1\nf_ue = 2\n", 3),
    ("[radio]\n[radio]\n", 2),
    ("[layout]\ntier1_count = 1.5\n", 2),
    ("[schedule]\nmode = sometimes\n", 2),
    ("[schedule]\nue = a 0 0 flying\n", 2),
    ("[schedule]\nue = a 0 0 idle\nevent = 3 a jump\n", 3),
    ("[schedule]\nue = a 0 0 idle colour=red\n", 2),
    ("[sweep]\ncrn = maybe\n", 2),
    ("[sweep]\ntrials = 0\n", 2),
    ("[layout]\nsite = a 0 0\n", 2),
    ("[schedule]\nticks = -4\n", 2),
])
def test_errors_carry_line(text, line):
    with pytest.raises(ScenarioSyntaxError) as info:
        parse_scenario(text)
    assert info.value.line == line


def test_full_example():
    text = """
[layout]
site = a 0 0 0
site = b 20 0 1
[schedule]
ticks = 50
mode = existing
link_down = b
ue = m1 30 0 active serving=macro vx=-1.5 until=20
ue = f1 1 1 detached
event = 5 f1 power_on
event = 7 f1 move 1 -0.5
[sweep]
trials = 7
crn = true
subset = fixed
"""
    s = parse_scenario(text)
    assert [x.id for x in s.layout.sites] == ["a", "b"]
    assert s.mode is BaselineMode.EXISTING and s.link_down == ("b",)
    assert s.ues[0].serving == MACRO and s.ues[0].vx == -1.5 and s.ues[0].until == 20
    assert s.ues[1].state is UeState.DETACHED
    assert str(s.schedule[1].event) == "move 1.0 -0.5"
    assert s.sweep == SweepSettings(trials=7, crn=True, subset="fixed")


def test_bundled_figure2_round_trips():
    s = load_scenario(resolve_scenario_path("figure2"))
    assert parse_scenario(serialize_scenario(s)) == s


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_round_trip_random(seed):
    s = random_scenario(seed, ticks=50)
    text = serialize_scenario(s)
    again = parse_scenario(text)
    assert again == s
    assert serialize_scenario(again) == text


def test_env_dir_takes_precedence(tmp_path, monkeypatch):
    (tmp_path / "figure2.scn").write_text("[schedule]\nticks = 7\n")
    monkeypatch.setenv(SCENARIO_DIR_ENV, str(tmp_path))
    assert load_scenario(resolve_scenario_path("figure2")).ticks == 7
    monkeypatch.delenv(SCENARIO_DIR_ENV)
    assert load_scenario(resolve_scenario_path("figure2")).ticks == 300


def test_missing_scenario():
    with pytest.raises(FileNotFoundError):
        resolve_scenario_path("no-such-scenario")
