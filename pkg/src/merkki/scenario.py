"""Plain-text scenario files.

A file is a list of ``[section]`` headers followed by ``key = value`` lines.
``[scenario]`` and ``[radio]`` take scalar values; in ``[devices]``,
``[pictures]``, ``[gatherings]`` and ``[behaviors]`` the key is an id and the
value is a whitespace-separated list of ``attr=value`` tokens::

    [scenario]
    seed = 7

    [radio]
    range_m = 50

    [devices]
    1 = group=red colour=#ff0000 pictures=10,11

    [pictures]
    10 = owner=1
    11 = owner=1 lock=never

    [gatherings]
    g1 = start=0 end=5400 placement=disc radius=20

    [behaviors]
    1 = archetype=TRADER mean_interval_s=60

``#`` at line start or after whitespace starts a comment. Lock values are
``never`` or an unlock time in seconds.
"""

from __future__ import annotations

import re
from dataclasses import fields
from importlib import resources

from .core import (
    NEVER,
    Archetype,
    BehaviorSpec,
    ChallengeLock,
    DeviceSpec,
    Gathering,
    Picture,
    RadioParams,
    Scenario,
    format_time,
    to_ms,
    validate_scenario,
)


class ScenarioParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ScenarioValidationError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("invalid scenario: " + "; ".join(violations))
        self.violations = violations


SECTIONS = ("scenario", "radio", "devices", "pictures", "gatherings", "behaviors")
_SECTION_RE = re.compile(r"\[([a-z]+)\]")
_INT_RE = re.compile(r"-?\d+")
# "#" opens a comment at line start or after whitespace, so colour=#ff0000 survives
_COMMENT_RE = re.compile(r"(^|\s)#.*$")

_RADIO_KEYS = {f.name for f in fields(RadioParams)}
_BEHAVIOR_FLOATS = {"mean_interval_s", "hold_s", "join_prob", "locked_fraction", "beat_mean_s", "beat_bpm"}


def _int(tok: str, lineno: int, what: str) -> int:
    if not _INT_RE.fullmatch(tok):
        raise ScenarioParseError(lineno, f"{what} must be an integer, got {tok!r}")
    return int(tok)


def _float(tok: str, lineno: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ScenarioParseError(lineno, f"{what} must be a number, got {tok!r}") from None


def _ints(tok: str, lineno: int, what: str) -> tuple[int, ...]:
    if tok == "":
        return ()
    return tuple(_int(x, lineno, what) for x in tok.split(","))


def _attrs(value: str, lineno: int, allowed: set[str]) -> dict[str, str]:
    out = {}
    for tok in value.split():
        k, eq, v = tok.partition("=")
        if not eq:
            raise ScenarioParseError(lineno, f"expected attr=value, got {tok!r}")
        if k not in allowed:
            raise ScenarioParseError(lineno, f"unknown attribute {k!r}")
        if k in out:
            raise ScenarioParseError(lineno, f"attribute {k!r} given twice")
        out[k] = v
    return out


def parse_scenario(text: str) -> Scenario:
    """Parse scenario text without validating cross-references."""
    section = None
    scalars: dict[str, dict[str, tuple[int, str]]] = {"scenario": {}, "radio": {}}
    rows: dict[str, list[tuple[int, str, str]]] = {s: [] for s in SECTIONS[2:]}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _COMMENT_RE.sub("", raw).strip()
        if not line:
            continue
        m = _SECTION_RE.fullmatch(line)
        if m:
            section = m.group(1)
            if section not in SECTIONS:
                raise ScenarioParseError(lineno, f"unknown section [{section}]")
            continue
        if line.startswith("["):
            raise ScenarioParseError(lineno, f"malformed section header {line!r}")
        if section is None:
            raise ScenarioParseError(lineno, "entry before any section header")
        key, eq, value = line.partition("=")
        if not eq:
            raise ScenarioParseError(lineno, f"expected key = value, got {line!r}")
        key, value = key.strip(), value.strip()
        if not key:
            raise ScenarioParseError(lineno, "empty key")
        if section in scalars:
            if key in scalars[section]:
                raise ScenarioParseError(lineno, f"duplicate key {key!r}")
            scalars[section][key] = (lineno, value)
        else:
            rows[section].append((lineno, key, value))

    seed = 0
    duration_s = None
    battery = 1000.0
    for key, (lineno, value) in scalars["scenario"].items():
        if key == "seed":
            seed = _int(value, lineno, "seed")
        elif key == "duration_s":
            duration_s = _float(value, lineno, key)
        elif key == "battery_mah":
            battery = _float(value, lineno, key)
        else:
            raise ScenarioParseError(lineno, f"unknown scenario key {key!r}")

    radio_kw = {}
    for key, (lineno, value) in scalars["radio"].items():
        if key not in _RADIO_KEYS:
            raise ScenarioParseError(lineno, f"unknown radio key {key!r}")
        radio_kw[key] = _float(value, lineno, key)
    radio = RadioParams(**radio_kw)

    devices = []
    for lineno, key, value in rows["devices"]:
        a = _attrs(value, lineno, {"group", "colour", "pictures"})
        devices.append(DeviceSpec(
            id=_int(key, lineno, "device id"),
            group=a.get("group"),
            colour=a.get("colour", "#ffffff"),
            pictures=_ints(a.get("pictures", ""), lineno, "picture id"),
        ))

    pictures = []
    for lineno, key, value in rows["pictures"]:
        a = _attrs(value, lineno, {"owner", "lock"})
        lock = None
        if "lock" in a:
            lock = ChallengeLock(None if a["lock"] == NEVER else to_ms(_float(a["lock"], lineno, "lock")))
        owner = _int(a["owner"], lineno, "owner") if "owner" in a else None
        pictures.append(Picture(_int(key, lineno, "picture id"), owner, lock))

    gatherings = []
    for lineno, key, value in rows["gatherings"]:
        a = _attrs(value, lineno, {"start", "end", "placement", "radius", "spacing", "devices"})
        for req in ("start", "end"):
            if req not in a:
                raise ScenarioParseError(lineno, f"gathering {key} needs {req}=")
        placement = a.get("placement", "disc")
        if placement not in ("disc", "grid"):
            raise ScenarioParseError(lineno, f"unknown placement {placement!r}")
        gatherings.append(Gathering(
            start_ms=to_ms(_float(a["start"], lineno, "start")),
            end_ms=to_ms(_float(a["end"], lineno, "end")),
            placement=placement,
            radius_m=_float(a.get("radius", "20"), lineno, "radius"),
            spacing_m=_float(a.get("spacing", "5"), lineno, "spacing"),
            devices=_ints(a["devices"], lineno, "device id") if "devices" in a else None,
        ))

    behaviors = {}
    allowed = {f.name for f in fields(BehaviorSpec)}
    for lineno, key, value in rows["behaviors"]:
        a = _attrs(value, lineno, allowed)
        d = _int(key, lineno, "device id")
        if d in behaviors:
            raise ScenarioParseError(lineno, f"second behavior for device {d}")
        if "archetype" not in a:
            raise ScenarioParseError(lineno, "behavior needs archetype=")
        token = a.pop("archetype")
        try:
            arch = Archetype(token)
        except ValueError:
            raise ScenarioParseError(lineno, f"unknown archetype {token!r}") from None
        kw: dict = {}
        for k, v in a.items():
            if k in _BEHAVIOR_FLOATS:
                kw[k] = _float(v, lineno, k)
            elif k in ("max_taps", "spam_picture"):
                kw[k] = _int(v, lineno, k)
            elif k in ("targets", "locked"):
                kw[k] = _ints(v, lineno, k)
        behaviors[d] = BehaviorSpec(arch, **kw)

    return Scenario(
        radio=radio,
        devices=tuple(devices),
        pictures=tuple(pictures),
        gatherings=tuple(gatherings),
        behaviors=behaviors,
        seed=seed,
        duration_s=duration_s,
        battery_mah=battery,
    )


def load_scenario(text: str) -> Scenario:
    scenario = parse_scenario(text)
    violations = validate_scenario(scenario)
    if violations:
        raise ScenarioValidationError(violations)
    return scenario


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def dump_scenario(s: Scenario) -> str:
    """Render a scenario back to text; ``load_scenario(dump_scenario(s)) == s``."""
    lines = ["[scenario]", f"seed = {s.seed}"]
    if s.duration_s is not None:
        lines.append(f"duration_s = {_num(s.duration_s)}")
    lines.append(f"battery_mah = {_num(s.battery_mah)}")
    lines += ["", "[radio]"]
    for f in fields(RadioParams):
        lines.append(f"{f.name} = {_num(getattr(s.radio, f.name))}")
    lines += ["", "[devices]"]
    for d in s.devices:
        attrs = []
        if d.group is not None:
            attrs.append(f"group={d.group}")
        attrs.append(f"colour={d.colour}")
        attrs.append("pictures=" + ",".join(map(str, d.pictures)))
        lines.append(f"{d.id} = " + " ".join(attrs))
    lines += ["", "[pictures]"]
    for p in s.pictures:
        attrs = [] if p.initial_owner is None else [f"owner={p.initial_owner}"]
        if p.lock is not None:
            attrs.append("lock=" + (NEVER if p.lock.never else format_time(p.lock.unlock_ms)))
        lines.append(f"{p.id} = " + " ".join(attrs))
    lines += ["", "[gatherings]"]
    for i, g in enumerate(s.gatherings):
        attrs = [
            f"start={format_time(g.start_ms)}",
            f"end={format_time(g.end_ms)}",
            f"placement={g.placement}",
            f"radius={_num(g.radius_m)}",
            f"spacing={_num(g.spacing_m)}",
        ]
        if g.devices is not None:
            attrs.append("devices=" + ",".join(map(str, g.devices)))
        lines.append(f"g{i} = " + " ".join(attrs))
    lines += ["", "[behaviors]"]
    default = BehaviorSpec(Archetype.IDLE)
    for d, b in sorted(s.behaviors.items()):
        attrs = [f"archetype={b.archetype.value}"]
        for f in fields(BehaviorSpec):
            if f.name == "archetype":
                continue
            v = getattr(b, f.name)
            if v == getattr(default, f.name):
                continue
            if isinstance(v, tuple):
                attrs.append(f"{f.name}=" + ",".join(map(str, v)))
            elif isinstance(v, float):
                attrs.append(f"{f.name}={_num(v)}")
            else:
                attrs.append(f"{f.name}={v}")
        lines.append(f"{d} = " + " ".join(attrs))
    return "\n".join(lines) + "\n"


def bundled_scenario_text(name: str) -> str:
    """Text of a scenario shipped with the package (``reference``, ``replication``, ...)."""
    return resources.files("merkki").joinpath("scenarios", f"{name}.scn").read_text(encoding="utf-8")


def bundled_scenario(name: str) -> Scenario:
    return load_scenario(bundled_scenario_text(name))
