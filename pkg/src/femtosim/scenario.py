"""Scenario files: a strict, sectioned ``key = value`` text format.

Example::

    # lines starting with '#' are comments
    [radio]
    f_ue = 1800
    macro_coupling = 0.0

    [layout]
    site = fap1 0 0 0          # id x y tier (repeatable; replaces the rings)

    [schedule]
    ticks = 300
    mode = proposed
    ue = mue2 60 0 active serving=macro vx=-2 start=1 until=45
    event = 60 fue1 call_start
    event = 70 fue3 move 1.5 0

    [sweep]
    trials = 1000

Every key is optional and defaults to the values in ``RadioConfig``,
``LayoutSpec``, ``Scenario`` and ``SweepSettings``.  Unknown sections or
keys are errors, reported with their line number.
"""

from __future__ import annotations

import os
import re
from dataclasses import fields
from pathlib import Path
from typing import Optional

from .engine import BaselineMode, Scenario, ScheduledEvent, SweepSettings, UeSpec
from .errors import ConfigError, ProtocolError, ScenarioSyntaxError
from .protocol import UeEvent, UeState
from .radio import RadioConfig
from .topology import LayoutSpec

__all__ = ["parse_scenario", "load_scenario", "serialize_scenario", "resolve_scenario_path",
           "SCENARIO_DIR_ENV", "BUNDLED_DIR"]

SCENARIO_DIR_ENV = "FEMTOSIM_SCENARIO_DIR"
BUNDLED_DIR = Path(__file__).parent / "data"

_RADIO_KEYS = {f.name: f.type for f in fields(RadioConfig)}
_LAYOUT_KEYS = {f.name: f.type for f in fields(LayoutSpec)}
_SCHEDULE_SCALARS = {"ticks": int, "tick_seconds": float, "mode": str, "seed": int,
                     "wake_margin": float}
_SWEEP_KEYS = {"trials": int, "seed": int, "crn": str, "subset": str, "ue_distance": float}
_REPEATABLE = {"layout": {"site"}, "schedule": {"ue", "event", "link_down"}}
_SECTIONS = ("radio", "layout", "schedule", "sweep")

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_][\w-]*)\s*\]$")
_ENTRY_RE = re.compile(r"^([A-Za-z_]\w*)\s*=\s*(.*)$")


def _number(text: str, kind, line: int, src: str, key: str):
    try:
        if kind in (int, "int"):
            return int(text)
        return float(text)
    except ValueError:
        raise ScenarioSyntaxError(f"{key}: expected {getattr(kind, '__name__', kind)}, "
                                  f"got {text!r}", line, src) from None


def _tokens(text: str):
    return text.split()


def _parse_site(value: str, line: int, src: str):
    parts = _tokens(value)
    if len(parts) != 4:
        raise ScenarioSyntaxError(f"site needs 'id x y tier', got {value!r}", line, src)
    fap_id, x, y, tier = parts
    return (fap_id, _number(x, float, line, src, "site"), _number(y, float, line, src, "site"),
            _number(tier, int, line, src, "site"))


_UE_OPTIONS = {"serving": str, "vx": float, "vy": float, "start": int, "until": int}


def _parse_ue(value: str, line: int, src: str) -> UeSpec:
    parts = _tokens(value)
    if len(parts) < 4:
        raise ScenarioSyntaxError(f"ue needs 'id x y state [key=value ...]', got {value!r}",
                                  line, src)
    ue_id, x, y, state = parts[:4]
    try:
        st = UeState(state)
    except ValueError:
        raise ScenarioSyntaxError(f"unknown UE state {state!r}", line, src) from None
    opts = {}
    for item in parts[4:]:
        key, sep, raw = item.partition("=")
        if not sep or key not in _UE_OPTIONS:
            raise ScenarioSyntaxError(f"unknown UE option {item!r}", line, src)
        if key in opts:
            raise ScenarioSyntaxError(f"UE option {key!r} given twice", line, src)
        kind = _UE_OPTIONS[key]
        opts[key] = raw if kind is str else _number(raw, kind, line, src, key)
    try:
        return UeSpec(ue_id, _number(x, float, line, src, "ue"), _number(y, float, line, src, "ue"),
                      st, **opts)
    except (ConfigError, ProtocolError) as exc:
        raise ScenarioSyntaxError(str(exc), line, src) from None


def _parse_event(value: str, line: int, src: str) -> ScheduledEvent:
    parts = _tokens(value)
    if len(parts) < 3:
        raise ScenarioSyntaxError(f"event needs 'tick ue kind [dx dy]', got {value!r}", line, src)
    tick = _number(parts[0], int, line, src, "event")
    kind = parts[2]
    args = parts[3:]
    try:
        if kind == "move":
            if len(args) != 2:
                raise ScenarioSyntaxError("move needs dx and dy", line, src)
            ev = UeEvent("move", _number(args[0], float, line, src, "move"),
                         _number(args[1], float, line, src, "move"))
        else:
            if args:
                raise ScenarioSyntaxError(f"{kind} takes no arguments", line, src)
            ev = UeEvent(kind)
    except ProtocolError as exc:
        raise ScenarioSyntaxError(str(exc), line, src) from None
    return ScheduledEvent(tick, parts[1], ev)


def _scalar(section: str, key: str, value: str, line: int, src: str):
    table = {"radio": _RADIO_KEYS, "layout": _LAYOUT_KEYS, "schedule": _SCHEDULE_SCALARS,
             "sweep": _SWEEP_KEYS}[section]
    kind = table[key]
    if kind in (str, "str"):
        if not value or len(value.split()) != 1:
            raise ScenarioSyntaxError(f"{key}: expected a single word, got {value!r}", line, src)
        return value
    return _number(value, kind, line, src, key)


def _blame(exc: Exception, lines: dict, section_line: Optional[int]):
    msg = str(exc)
    hits = []
    for k in lines:
        m = re.search(rf"\b{k}\b", msg)
        if m:
            hits.append((m.start(), lines[k]))
    if hits:
        return min(hits)[1]  # the key the message names first
    return section_line


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Parse and fully validate a scenario file's text."""
    values = {s: {} for s in _SECTIONS}
    key_lines = {s: {} for s in _SECTIONS}
    repeated = {s: {k: [] for k in _REPEATABLE.get(s, ())} for s in _SECTIONS}
    section_lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = _SECTION_RE.match(stripped)
        if m:
            section = m.group(1)
            if section not in _SECTIONS:
                raise ScenarioSyntaxError(f"unknown section [{section}]", lineno, source)
            if section in section_lines:
                raise ScenarioSyntaxError(f"section [{section}] appears twice", lineno, source)
            section_lines[section] = lineno
            continue
        m = _ENTRY_RE.match(stripped)
        if not m:
            raise ScenarioSyntaxError(f"expected 'key = value', got {stripped!r}", lineno, source)
        if section is None:
            raise ScenarioSyntaxError("entry before any [section] header", lineno, source)
        key, value = m.group(1), m.group(2).strip()
        if key in repeated[section]:
            repeated[section][key].append((value, lineno))
            continue
        allowed = {"radio": _RADIO_KEYS, "layout": _LAYOUT_KEYS,
                   "schedule": _SCHEDULE_SCALARS, "sweep": _SWEEP_KEYS}[section]
        if key not in allowed:
            raise ScenarioSyntaxError(f"unknown key {key!r} in [{section}]", lineno, source)
        if key in values[section]:
            raise ScenarioSyntaxError(f"key {key!r} given twice in [{section}]", lineno, source)
        values[section][key] = _scalar(section, key, value, lineno, source)
        key_lines[section][key] = lineno

    def build(section, factory, **kwargs):
        try:
            return factory(**kwargs)
        except (ConfigError, ProtocolError) as exc:
            if isinstance(exc, ScenarioSyntaxError):
                raise
            line = _blame(exc, key_lines[section], section_lines.get(section))
            raise ScenarioSyntaxError(str(exc), line, source) from None

    radio_cfg = build("radio", RadioConfig, **values["radio"])
    layout_spec = build("layout", LayoutSpec, **values["layout"])
    site_entries = repeated["layout"]["site"]
    sites = tuple(_parse_site(v, ln, source) for v, ln in site_entries) or None

    sched = values["schedule"]
    mode_word = sched.pop("mode", BaselineMode.PROPOSED.value)
    try:
        mode = BaselineMode(mode_word)
    except ValueError:
        raise ScenarioSyntaxError(f"mode must be 'proposed' or 'existing', got {mode_word!r}",
                                  key_lines["schedule"]["mode"], source) from None
    ues = tuple(_parse_ue(v, ln, source) for v, ln in repeated["schedule"]["ue"])
    events = tuple(_parse_event(v, ln, source) for v, ln in repeated["schedule"]["event"])
    link_down = []
    for v, ln in repeated["schedule"]["link_down"]:
        link_down.extend(_tokens(v))

    sweep_vals = dict(values["sweep"])
    crn_word = sweep_vals.pop("crn", "auto")
    crn_map = {"auto": None, "true": True, "false": False}
    if crn_word not in crn_map:
        raise ScenarioSyntaxError(f"crn must be auto, true or false, got {crn_word!r}",
                                  key_lines["sweep"]["crn"], source)
    sweep = build("sweep", SweepSettings, crn=crn_map[crn_word], **sweep_vals)

    # Errors in the composed scenario point at the most specific line we know.
    all_lines = {**key_lines["schedule"]}
    try:
        return Scenario(radio=radio_cfg, layout_spec=layout_spec, sites=sites, ues=ues,
                        schedule=events, mode=mode, link_down=tuple(link_down), sweep=sweep,
                        **sched)
    except (ConfigError, ProtocolError) as exc:
        line = _blame(exc, all_lines, None)
        if line is None:
            for v, ln in (site_entries + repeated["schedule"]["ue"]
                          + repeated["schedule"]["event"]):
                if any(tok in str(exc) for tok in _tokens(v)[:2]):
                    line = ln
                    break
        raise ScenarioSyntaxError(str(exc), line, source) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), source=str(path))


def resolve_scenario_path(name) -> Path:
    """A literal path, or a bundled scenario name like ``figure2``.

    Names are looked up in ``$FEMTOSIM_SCENARIO_DIR`` first, then in the
    scenarios shipped with the package.
    """
    path = Path(name)
    if path.exists():
        return path
    dirs = []
    if os.environ.get(SCENARIO_DIR_ENV):
        dirs.append(Path(os.environ[SCENARIO_DIR_ENV]))
    dirs.append(BUNDLED_DIR)
    for d in dirs:
        for candidate in (d / name, d / f"{name}.scn"):
            if candidate.exists():
                return candidate
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name!r}")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_scenario(s: Scenario) -> str:
    """Render a scenario with every key explicit; parses back to an equal Scenario."""
    out = ["[radio]"]
    out += [f"{f.name} = {_fmt(getattr(s.radio, f.name))}" for f in fields(RadioConfig)]
    out += ["", "[layout]"]
    out += [f"{f.name} = {_fmt(getattr(s.layout_spec, f.name))}" for f in fields(LayoutSpec)]
    for fap_id, x, y, tier in s.sites or ():
        out.append(f"site = {fap_id} {_fmt(float(x))} {_fmt(float(y))} {tier}")
    out += ["", "[schedule]",
            f"ticks = {s.ticks}",
            f"tick_seconds = {_fmt(s.tick_seconds)}",
            f"mode = {s.mode.value}",
            f"seed = {s.seed}",
            f"wake_margin = {_fmt(s.wake_margin)}"]
    if s.link_down:
        out.append("link_down = " + " ".join(s.link_down))
    for u in s.ues:
        line = f"ue = {u.id} {_fmt(float(u.x))} {_fmt(float(u.y))} {u.state.value}"
        if u.serving is not None:
            line += f" serving={u.serving}"
        if u.vx:
            line += f" vx={_fmt(float(u.vx))}"
        if u.vy:
            line += f" vy={_fmt(float(u.vy))}"
        if u.start != 1:
            line += f" start={u.start}"
        if u.until is not None:
            line += f" until={u.until}"
        out.append(line)
    for e in s.schedule:
        out.append(f"event = {e.tick} {e.ue} {e.event}")
    crn = {None: "auto", True: "true", False: "false"}[s.sweep.crn]
    out += ["", "[sweep]",
            f"trials = {s.sweep.trials}",
            f"seed = {s.sweep.seed}",
            f"crn = {crn}",
            f"subset = {s.sweep.subset}",
            f"ue_distance = {_fmt(s.sweep.ue_distance)}"]
    return "\n".join(out) + "\n"
