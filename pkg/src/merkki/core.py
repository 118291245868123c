"""Shared domain types, configuration defaults and the canonical log format.

Time is carried internally as integer milliseconds and rendered as seconds
with three decimals, so a log is byte-identical across platforms.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

DeviceId = int
PictureId = int

NEVER = "never"
DEFAULT_INITIAL_PICTURES = 3
BATTERY_CAPACITY_MAH = 1000.0


class LogParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


# ---------------------------------------------------------------------------
# time helpers


def to_ms(seconds: float) -> int:
    return int(round(seconds * 1000))


def format_time(ms: int) -> str:
    sign = "-" if ms < 0 else ""
    ms = abs(ms)
    return f"{sign}{ms // 1000}.{ms % 1000:03d}"


_TIME_RE = re.compile(r"-?(0|[1-9]\d*)\.\d{3}")


def parse_time(text: str) -> int:
    if not _TIME_RE.fullmatch(text):
        raise ValueError(f"bad time {text!r}")
    neg = text.startswith("-")
    whole, frac = text.lstrip("-").split(".")
    ms = int(whole) * 1000 + int(frac)
    return -ms if neg else ms


# ---------------------------------------------------------------------------
# pictures and configuration


@dataclass(frozen=True)
class ChallengeLock:
    """A dare: the picture is not released before ``unlock_ms`` (None = never)."""

    unlock_ms: int | None

    @property
    def never(self) -> bool:
        return self.unlock_ms is None

    def is_locked(self, now_ms: int) -> bool:
        return self.unlock_ms is None or now_ms < self.unlock_ms


@dataclass(frozen=True)
class Picture:
    id: PictureId
    initial_owner: DeviceId | None
    lock: ChallengeLock | None = None

    def locked_at(self, now_ms: int) -> bool:
        return self.lock is not None and self.lock.is_locked(now_ms)


@dataclass(frozen=True)
class RadioParams:
    range_m: float = 50.0
    latency_s: float = 0.1
    loss_prob: float = 0.0
    hold_duration_s: float = 5.0
    beat_window_s: float = 10.0
    tick_s: float = 0.1

    @property
    def range_mm(self) -> int:
        return to_ms(self.range_m)  # same x1000 scaling

    @property
    def latency_ms(self) -> int:
        return to_ms(self.latency_s)

    @property
    def hold_ms(self) -> int:
        return to_ms(self.hold_duration_s)

    @property
    def beat_window_ms(self) -> int:
        return to_ms(self.beat_window_s)

    @property
    def tick_ms(self) -> int:
        return to_ms(self.tick_s)

    def violations(self) -> list[str]:
        out = []
        if not self.range_m > 0:
            out.append(f"range_m must be > 0, got {self.range_m}")
        if not 0 <= self.loss_prob <= 1:
            out.append(f"loss_prob must be in [0, 1], got {self.loss_prob}")
        if not self.hold_duration_s > 0:
            out.append(f"hold_duration_s must be > 0, got {self.hold_duration_s}")
        if not self.latency_s >= 0:
            out.append(f"latency_s must be >= 0, got {self.latency_s}")
        if not self.tick_ms > 0:
            out.append(f"tick_s must be > 0, got {self.tick_s}")
        return out


@dataclass(frozen=True)
class GroupConfig:
    group_of: Mapping[DeviceId, str]
    colour: Mapping[DeviceId, str] = field(default_factory=dict)

    def same_group(self, a: DeviceId, b: DeviceId) -> bool:
        return self.group_of.get(a) == self.group_of.get(b)

    @property
    def groups(self) -> dict[str, list[DeviceId]]:
        out: dict[str, list[DeviceId]] = {}
        for d in sorted(self.group_of):
            out.setdefault(self.group_of[d], []).append(d)
        return out


# ---------------------------------------------------------------------------
# scenario description


class Archetype(enum.Enum):
    TRADER = "TRADER"
    SPAMMER = "SPAMMER"
    COLLECTOR = "COLLECTOR"
    CHALLENGE_KEEPER = "CHALLENGE_KEEPER"
    IDLE = "IDLE"


@dataclass(frozen=True)
class BehaviorSpec:
    archetype: Archetype
    mean_interval_s: float = 60.0
    hold_s: float = 8.0
    join_prob: float = 0.5
    max_taps: int = 3
    spam_picture: PictureId | None = None
    targets: tuple[PictureId, ...] = ()
    locked: tuple[PictureId, ...] = ()
    locked_fraction: float = 0.5
    beat_mean_s: float = 0.0
    beat_bpm: float = 120.0


@dataclass(frozen=True)
class DeviceSpec:
    id: DeviceId
    group: str | None
    colour: str = "#ffffff"
    pictures: tuple[PictureId, ...] = ()


@dataclass(frozen=True)
class Gathering:
    start_ms: int
    end_ms: int
    placement: str = "disc"  # "disc" or "grid"
    radius_m: float = 20.0
    spacing_m: float = 5.0
    devices: tuple[DeviceId, ...] | None = None  # None means everyone

    def attendees(self, all_devices: Iterable[DeviceId]) -> list[DeviceId]:
        if self.devices is None:
            return sorted(set(all_devices))
        return sorted(set(self.devices))


@dataclass(frozen=True)
class Scenario:
    radio: RadioParams
    devices: tuple[DeviceSpec, ...]
    pictures: tuple[Picture, ...]
    gatherings: tuple[Gathering, ...]
    behaviors: Mapping[DeviceId, BehaviorSpec]
    seed: int = 0
    duration_s: float | None = None
    battery_mah: float = BATTERY_CAPACITY_MAH

    @property
    def device_ids(self) -> list[DeviceId]:
        return sorted({d.id for d in self.devices})

    @property
    def picture_map(self) -> dict[PictureId, Picture]:
        return {p.id: p for p in self.pictures}

    @property
    def group_config(self) -> GroupConfig:
        return GroupConfig(
            {d.id: d.group for d in self.devices if d.group is not None},
            {d.id: d.colour for d in self.devices},
        )

    def device(self, d: DeviceId) -> DeviceSpec:
        for spec in self.devices:
            if spec.id == d:
                return spec
        raise KeyError(d)

    def behavior(self, d: DeviceId) -> BehaviorSpec:
        return self.behaviors.get(d, BehaviorSpec(Archetype.IDLE))


def validate_scenario(scenario: Scenario) -> list[str]:
    """Return every invariant violation found; an empty list means valid."""
    out: list[str] = []
    out.extend(scenario.radio.violations())

    seen: set[DeviceId] = set()
    for d in scenario.devices:
        if d.id < 0:
            out.append(f"negative DeviceId {d.id}")
        if d.id in seen:
            out.append(f"duplicate DeviceId {d.id}")
        seen.add(d.id)
        if d.group is None or d.group == "":
            out.append(f"device {d.id} has no group")

    pics: dict[PictureId, Picture] = {}
    for p in scenario.pictures:
        if p.id in pics:
            out.append(f"duplicate PictureId {p.id}")
        pics[p.id] = p
        if p.initial_owner is None:
            out.append(f"picture {p.id} unowned")
        elif p.initial_owner not in seen:
            out.append(f"picture {p.id} owned by unknown device {p.initial_owner}")

    for d in scenario.devices:
        if len(set(d.pictures)) != len(d.pictures):
            out.append(f"device {d.id} lists a picture twice")
        for pid in d.pictures:
            p = pics.get(pid)
            if p is None:
                out.append(f"device {d.id} starts with undefined picture {pid}")
            elif p.initial_owner is not None and p.initial_owner != d.id:
                out.append(f"device {d.id} starts with picture {pid} owned by {p.initial_owner}")
    for p in scenario.pictures:
        if p.initial_owner in seen:
            owner = scenario.device(p.initial_owner)
            if p.id not in owner.pictures:
                out.append(f"picture {p.id} missing from owner {p.initial_owner}'s initial collection")

    # gatherings: well-formed and non-overlapping per device
    spans: dict[DeviceId, list[tuple[int, int]]] = {}
    for i, g in enumerate(scenario.gatherings):
        if g.end_ms <= g.start_ms:
            out.append(f"gathering {i} ends before it starts")
        if g.start_ms < 0:
            out.append(f"gathering {i} starts before time 0")
        if g.placement not in ("disc", "grid"):
            out.append(f"gathering {i} has unknown placement {g.placement}")
        for d in g.attendees(seen):
            if d not in seen:
                out.append(f"gathering {i} references unknown device {d}")
            spans.setdefault(d, []).append((g.start_ms, g.end_ms))
    for d, sp in sorted(spans.items()):
        sp.sort()
        for (s0, e0), (s1, _) in zip(sp, sp[1:]):
            if s1 < e0:
                out.append(f"gatherings overlap for device {d}")
                break

    for d, b in sorted(scenario.behaviors.items()):
        if d not in seen:
            out.append(f"behavior for unknown device {d}")
            continue
        owned = scenario.device(d).pictures
        if b.archetype is Archetype.SPAMMER:
            if b.spam_picture is None or b.spam_picture not in owned:
                out.append(f"spammer {d} spam picture {b.spam_picture} not in its initial collection")
        if b.archetype is Archetype.CHALLENGE_KEEPER:
            for pid in b.locked:
                p = pics.get(pid)
                if p is None or p.lock is None:
                    out.append(f"challenge keeper {d} locked picture {pid} has no lock")
        if b.mean_interval_s < 0 or b.hold_s <= 0:
            out.append(f"behavior {d} has non-positive timing")
        if not 0 <= b.join_prob <= 1 or not 0 <= b.locked_fraction <= 1:
            out.append(f"behavior {d} probability out of range")
    return out


# ---------------------------------------------------------------------------
# event records


class EventKind(enum.Enum):
    # Declaration order is the same-instant tie-break rank.
    POWER_ON = "POWER_ON"
    TIER_CHANGE = "TIER_CHANGE"
    TAP_L = "TAP_L"
    TAP_R = "TAP_R"
    HOLD_L_START = "HOLD_L_START"
    HOLD_L_END = "HOLD_L_END"
    HOLD_R_START = "HOLD_R_START"
    HOLD_R_END = "HOLD_R_END"
    HOLD_LR = "HOLD_LR"
    PUSH_A = "PUSH_A"
    PUSH_B = "PUSH_B"
    PICTURE_SELECT = "PICTURE_SELECT"
    ANIM_SELECT = "ANIM_SELECT"
    TEMPO_SET = "TEMPO_SET"
    SEARCH_START = "SEARCH_START"
    EXCHANGE = "EXCHANGE"
    SEARCH_STOP = "SEARCH_STOP"
    BATTERY = "BATTERY"
    POWER_OFF = "POWER_OFF"

    @property
    def rank(self) -> int:
        return _RANK[self]


_RANK = {k: i for i, k in enumerate(EventKind)}


def _render_value(v: object) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.3f}"
    if isinstance(v, (tuple, list)):
        return ",".join(_render_value(x) for x in v)
    return str(v)


_KEY_RE = re.compile(r"[a-z_][a-z0-9_]*")


@dataclass(frozen=True, slots=True)
class EventRecord:
    time_ms: int
    device: DeviceId
    kind: EventKind
    payload: tuple[tuple[str, str], ...] = ()

    @classmethod
    def make(cls, time_ms: int, device: DeviceId, kind: EventKind, **fields: object) -> "EventRecord":
        payload = tuple([(k, _render_value(fields[k])) for k in sorted(fields)])
        return cls(time_ms, device, kind, payload)

    @property
    def time_s(self) -> float:
        return self.time_ms / 1000

    def get(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.payload:
            if k == key:
                return v
        return default

    def get_int(self, key: str) -> int:
        v = self.get(key)
        if v is None:
            raise KeyError(key)
        return int(v)

    def get_ints(self, key: str) -> tuple[int, ...]:
        v = self.get(key)
        if not v:
            return ()
        return tuple(int(x) for x in v.split(","))

    def get_bool(self, key: str) -> bool:
        return self.get(key) == "true"

    def sort_key(self) -> tuple[int, int, int]:
        return (self.time_ms, self.device, self.kind.rank)

    def to_line(self) -> str:
        parts = [format_time(self.time_ms), str(self.device), self.kind.value]
        parts.extend(f"{k}={v}" for k, v in self.payload)
        return "\t".join(parts)


# Payload key sets per kind, checked when parsing.
EXCHANGE_KEYS = ("duplicate_flag", "partner", "received_picture", "sent_picture")


def serialize_log(records: Iterable[EventRecord]) -> str:
    return "".join(r.to_line() + "\n" for r in records)


_INT_RE = re.compile(r"0|[1-9]\d*")


def parse_log(text: str) -> list[EventRecord]:
    """Parse a log; only the canonical rendering is accepted."""
    out: list[EventRecord] = []
    if text == "":
        return out
    if not text.endswith("\n"):
        raise LogParseError(text.count("\n") + 1, "missing final newline")
    last = None
    for lineno, line in enumerate(text[:-1].split("\n"), start=1):
        if "\r" in line:
            raise LogParseError(lineno, "CR in line")
        fields = line.split("\t")
        if len(fields) < 3:
            raise LogParseError(lineno, "expected time, device, kind")
        try:
            t = parse_time(fields[0])
        except ValueError as e:
            raise LogParseError(lineno, str(e)) from None
        if not _INT_RE.fullmatch(fields[1]):
            raise LogParseError(lineno, f"bad device id {fields[1]!r}")
        try:
            kind = EventKind(fields[2])
        except ValueError:
            raise LogParseError(lineno, f"unknown event kind {fields[2]!r}") from None
        payload = []
        for item in fields[3:]:
            k, eq, v = item.partition("=")
            if not eq or not _KEY_RE.fullmatch(k):
                raise LogParseError(lineno, f"bad payload item {item!r}")
            payload.append((k, v))
        keys = [k for k, _ in payload]
        if keys != sorted(set(keys)):
            raise LogParseError(lineno, "payload keys must be unique and sorted")
        if kind is EventKind.EXCHANGE:
            if tuple(keys) != EXCHANGE_KEYS:
                raise LogParseError(lineno, "EXCHANGE needs " + ", ".join(EXCHANGE_KEYS))
            vals = dict(payload)
            for k in ("partner", "received_picture", "sent_picture"):
                if not _INT_RE.fullmatch(vals[k]):
                    raise LogParseError(lineno, f"bad {k} {vals[k]!r}")
            if vals["duplicate_flag"] not in ("true", "false"):
                raise LogParseError(lineno, "duplicate_flag must be true or false")
        rec = EventRecord(t, int(fields[1]), kind, tuple(payload))
        if last is not None and rec.time_ms < last:
            raise LogParseError(lineno, "time goes backwards")
        last = rec.time_ms
        out.append(rec)
    return out
