"""Per-patch firmware state machine.

Every function here is a pure transition ``(state, input) -> (state, records)``;
the engine owns time and calls them in order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Mapping

from .core import (
    BATTERY_CAPACITY_MAH,
    DeviceId,
    EventKind,
    EventRecord,
    Picture,
    PictureId,
)


class Power(enum.Enum):
    OFF = "OFF"
    ON = "ON"


class Mode(enum.Enum):
    OFF = "OFF"
    DEFAULT = "DEFAULT"
    BATTERY_DISPLAY = "BATTERY_DISPLAY"
    BEAT_MODE = "BEAT_MODE"
    SEARCHING = "SEARCHING"


class Tier(enum.Enum):
    NONE = "NONE"
    PEER = "PEER"
    STRANGER = "STRANGER"


class GestureKind(enum.Enum):
    TAP_L = "TAP_L"
    TAP_R = "TAP_R"
    HOLD_L_START = "HOLD_L_START"
    HOLD_L_END = "HOLD_L_END"
    HOLD_R_START = "HOLD_R_START"
    HOLD_R_END = "HOLD_R_END"
    HOLD_LR = "HOLD_LR"
    PUSH_A = "PUSH_A"
    PUSH_B = "PUSH_B"


@dataclass(frozen=True)
class Gesture:
    kind: GestureKind
    time_ms: int


@dataclass(frozen=True)
class ProximitySummary:
    strangers_in_range: int = 0
    peers_in_range: int = 0


@dataclass(frozen=True)
class DeviceConfig:
    capacity_mah: float = BATTERY_CAPACITY_MAH
    base_drain_mah_h: float = 2.0
    tier_drain_mah_h: Mapping[Tier, float] = field(
        default_factory=lambda: {Tier.NONE: 1.0, Tier.PEER: 2.0, Tier.STRANGER: 4.0}
    )
    animations: Mapping[Tier, int] = field(
        default_factory=lambda: {Tier.NONE: 3, Tier.PEER: 3, Tier.STRANGER: 2}
    )
    default_tempo_bpm: float = 120.0
    min_tempo_bpm: float = 30.0
    max_tempo_bpm: float = 300.0
    beat_window_ms: int = 10_000
    battery_display_ms: int = 3_000
    status_display_ms: int = 3_000

    def drain_per_ms(self, tier: Tier) -> float:
        return (self.base_drain_mah_h + self.tier_drain_mah_h[tier]) / 3_600_000


DEFAULT_CONFIG = DeviceConfig()


@dataclass(frozen=True, slots=True)
class DeviceState:
    device: DeviceId
    power: Power = Power.OFF
    mode: Mode = Mode.OFF
    owned: tuple[PictureId, ...] = ()
    selected_index: int = 0
    tier: Tier = Tier.NONE
    anim_index: int = 0
    tempo_bpm: float = 120.0
    beat_taps: tuple[int, ...] = ()
    battery_mah: float = BATTERY_CAPACITY_MAH
    mode_until_ms: int | None = None
    status_until_ms: int | None = None
    last_ms: int = 0
    battery_ms: int = 0  # time up to which the battery has been drained

    @property
    def selected(self) -> PictureId | None:
        if not self.owned:
            return None
        return self.owned[self.selected_index]

    @property
    def searching(self) -> bool:
        return self.mode is Mode.SEARCHING


_STATE_FIELDS = tuple(f.name for f in fields(DeviceState))
_set = object.__setattr__


def _with(s: DeviceState, **changes) -> DeviceState:
    # dataclasses.replace dominates long runs; this skips its validation pass
    new = object.__new__(DeviceState)
    for name in _STATE_FIELDS:
        _set(new, name, changes[name] if name in changes else getattr(s, name))
    return new


def new_device(device: DeviceId, pictures=(), cfg: DeviceConfig = DEFAULT_CONFIG) -> DeviceState:
    return DeviceState(
        device=device,
        owned=tuple(dict.fromkeys(pictures)),
        tempo_bpm=cfg.default_tempo_bpm,
        battery_mah=cfg.capacity_mah,
    )


def check_invariants(s: DeviceState, cfg: DeviceConfig = DEFAULT_CONFIG) -> list[str]:
    out = []
    if (s.mode is Mode.OFF) != (s.power is Power.OFF):
        out.append("mode/power mismatch")
    if not cfg.min_tempo_bpm <= s.tempo_bpm <= cfg.max_tempo_bpm:
        out.append(f"tempo {s.tempo_bpm} out of range")
    if not 0 <= s.battery_mah <= cfg.capacity_mah:
        out.append(f"battery {s.battery_mah} out of range")
    if not 0 <= s.anim_index < cfg.animations[s.tier]:
        out.append(f"anim_index {s.anim_index} invalid for {s.tier}")
    if len(set(s.owned)) != len(s.owned):
        out.append("duplicate pictures in collection")
    if s.owned and not 0 <= s.selected_index < len(s.owned):
        out.append("selected_index out of range")
    return out


def _rec(s: DeviceState, t: int, kind: EventKind, **fields) -> EventRecord:
    return EventRecord.make(t, s.device, kind, **fields)


def _expire(s: DeviceState, now: int) -> DeviceState:
    if s.mode in (Mode.BATTERY_DISPLAY, Mode.BEAT_MODE) and s.mode_until_ms is not None:
        if now >= s.mode_until_ms:
            s = _with(s, mode=Mode.DEFAULT, mode_until_ms=None, beat_taps=())
    if s.status_until_ms is not None and now >= s.status_until_ms:
        s = _with(s, status_until_ms=None)
    return s


def power_on(s: DeviceState, now: int, cfg: DeviceConfig = DEFAULT_CONFIG, **extra) -> tuple[DeviceState, list[EventRecord]]:
    """Power the device on; ``extra`` fields (e.g. placement) go into the POWER_ON payload."""
    if s.power is Power.ON or s.battery_mah <= 0:
        return _with(s, last_ms=max(s.last_ms, now)), []
    s = _with(
        s,
        power=Power.ON,
        mode=Mode.DEFAULT,
        tier=Tier.NONE,
        anim_index=0,
        tempo_bpm=cfg.default_tempo_bpm,
        beat_taps=(),
        mode_until_ms=None,
        status_until_ms=None,
        last_ms=now,
    )
    return s, [
        _rec(s, now, EventKind.POWER_ON, owned=s.owned, **extra),
        _rec(s, now, EventKind.BATTERY, mah=float(s.battery_mah)),
    ]


def power_off(s: DeviceState, now: int) -> tuple[DeviceState, list[EventRecord]]:
    if s.power is Power.OFF:
        return s, []
    recs = []
    if s.mode is Mode.SEARCHING:
        recs.append(_rec(s, now, EventKind.SEARCH_STOP))
    s = _with(
        s,
        power=Power.OFF,
        mode=Mode.OFF,
        tier=Tier.NONE,
        anim_index=0,
        beat_taps=(),
        mode_until_ms=None,
        status_until_ms=None,
        last_ms=max(s.last_ms, now),
    )
    recs.append(_rec(s, now, EventKind.BATTERY, mah=float(s.battery_mah)))
    recs.append(_rec(s, now, EventKind.POWER_OFF))
    return s, recs


def handle_gesture(s: DeviceState, g: Gesture, cfg: DeviceConfig = DEFAULT_CONFIG) -> tuple[DeviceState, list[EventRecord]]:
    """Apply one control gesture. Gestures with no meaning in the current mode are
    logged and otherwise ignored."""
    if g.time_ms < s.last_ms:
        raise ValueError(f"gesture at {g.time_ms} ms precedes last processed time {s.last_ms} ms")
    now = g.time_ms
    s = _with(_expire(s, now), last_ms=now)
    recs = [_rec(s, now, EventKind(g.kind.value))]
    k = g.kind

    if s.power is Power.OFF:
        if k in (GestureKind.PUSH_A, GestureKind.HOLD_LR):
            s, more = power_on(s, now, cfg)
            recs += more
        return s, recs

    if k is GestureKind.HOLD_LR:
        s, more = power_off(s, now)
        return s, recs + more

    mode = s.mode
    if mode is Mode.DEFAULT:
        if k is GestureKind.TAP_R and s.owned:
            s = _with(s, selected_index=(s.selected_index + 1) % len(s.owned))
            recs.append(_rec(s, now, EventKind.PICTURE_SELECT, index=s.selected_index, picture=s.selected))
        elif k is GestureKind.TAP_L:
            s = _with(s, anim_index=(s.anim_index + 1) % cfg.animations[s.tier])
            recs.append(_rec(s, now, EventKind.ANIM_SELECT, index=s.anim_index, tier=s.tier.value))
        elif k is GestureKind.HOLD_R_START:
            s = _with(s, mode=Mode.SEARCHING)
            extra = {} if s.selected is None else {"picture": s.selected}
            recs.append(_rec(s, now, EventKind.SEARCH_START, **extra))
        elif k is GestureKind.HOLD_L_START:
            s = _with(s, mode=Mode.BEAT_MODE, mode_until_ms=now + cfg.beat_window_ms, beat_taps=())
        elif k is GestureKind.PUSH_B:
            s = _with(s, mode=Mode.BATTERY_DISPLAY, mode_until_ms=now + cfg.battery_display_ms)
            recs.append(_rec(s, now, EventKind.BATTERY, mah=float(s.battery_mah)))
        elif k is GestureKind.PUSH_A:
            s = _with(s, status_until_ms=now + cfg.status_display_ms)
    elif mode is Mode.SEARCHING:
        if k is GestureKind.HOLD_R_END:
            s = _with(s, mode=Mode.DEFAULT)
            recs.append(_rec(s, now, EventKind.SEARCH_STOP))
    elif mode is Mode.BEAT_MODE:
        if k is GestureKind.TAP_L:
            s, tempo = apply_tap_tempo(s, now, cfg)
            if tempo is not None:
                recs.append(_rec(s, now, EventKind.TEMPO_SET, bpm=float(tempo)))
    elif mode is Mode.BATTERY_DISPLAY:
        if k is GestureKind.PUSH_B:
            s = _with(s, mode=Mode.DEFAULT, mode_until_ms=None)
    return s, recs


def tempo_from_taps(taps, cfg: DeviceConfig = DEFAULT_CONFIG) -> float | None:
    """60 / mean inter-tap interval, clamped; ``taps`` in ms."""
    if len(taps) < 2:
        return None
    mean_ms = (taps[-1] - taps[0]) / (len(taps) - 1)
    bpm = math.inf if mean_ms <= 0 else 60_000 / mean_ms
    return min(cfg.max_tempo_bpm, max(cfg.min_tempo_bpm, bpm))


def apply_tap_tempo(s: DeviceState, tap_ms: int, cfg: DeviceConfig = DEFAULT_CONFIG) -> tuple[DeviceState, float | None]:
    if s.mode is not Mode.BEAT_MODE:
        return s, None
    window_start = (s.mode_until_ms or tap_ms) - cfg.beat_window_ms
    taps = tuple(t for t in s.beat_taps if t >= window_start) + (tap_ms,)
    tempo = tempo_from_taps(taps, cfg)
    s = _with(s, beat_taps=taps)
    if tempo is not None:
        s = _with(s, tempo_bpm=tempo)
    return s, tempo


def receive_tempo(s: DeviceState, bpm: float, now: int, source: DeviceId, cfg: DeviceConfig = DEFAULT_CONFIG) -> tuple[DeviceState, list[EventRecord]]:
    if s.power is Power.OFF:
        return s, []
    bpm = min(cfg.max_tempo_bpm, max(cfg.min_tempo_bpm, bpm))
    s = _with(s, tempo_bpm=bpm, last_ms=max(s.last_ms, now))
    return s, [_rec(s, now, EventKind.TEMPO_SET, bpm=float(bpm), source=source)]


def tier_for(p: ProximitySummary) -> Tier:
    # strangers dominate peers when both are around
    if p.strangers_in_range > 0:
        return Tier.STRANGER
    if p.peers_in_range > 0:
        return Tier.PEER
    return Tier.NONE


def on_proximity(s: DeviceState, p: ProximitySummary, now: int | None = None) -> tuple[DeviceState, EventRecord | None]:
    if s.power is Power.OFF:
        return s, None
    now = s.last_ms if now is None else now
    tier = tier_for(p)
    if tier is s.tier:
        return s, None
    s = _with(s, tier=tier, anim_index=0, last_ms=max(s.last_ms, now))
    return s, _rec(
        s, now, EventKind.TIER_CHANGE,
        peers=p.peers_in_range, strangers=p.strangers_in_range, tier=tier.value,
    )


def commit_exchange(s: DeviceState, incoming: PictureId) -> tuple[DeviceState, bool]:
    if incoming in s.owned:
        return s, True
    return _with(s, owned=s.owned + (incoming,)), False


def outgoing_picture(s: DeviceState, now_ms: int, pictures: Mapping[PictureId, Picture]) -> PictureId | None:
    """The picture this device would send right now, or None if nothing may leave."""
    if s.mode is not Mode.SEARCHING:
        return None
    sel = s.selected
    if sel is None:
        return None
    pic = pictures.get(sel)
    if pic is not None and pic.locked_at(now_ms):
        return None
    return sel


def depletion_ms(s: DeviceState, cfg: DeviceConfig = DEFAULT_CONFIG) -> int | None:
    """Milliseconds after ``battery_ms`` until the battery runs flat at the current drain rate."""
    if s.power is Power.OFF:
        return None
    return math.ceil(s.battery_mah / cfg.drain_per_ms(s.tier))


def battery_step(s: DeviceState, dt_ms: int, cfg: DeviceConfig = DEFAULT_CONFIG) -> tuple[DeviceState, list[EventRecord]]:
    """Drain the battery linearly over ``dt_ms`` starting at ``s.battery_ms``."""
    if dt_ms < 0:
        raise ValueError("dt must be non-negative")
    end = s.battery_ms + dt_ms
    if s.power is Power.OFF or dt_ms == 0:
        return _with(s, battery_ms=end, last_ms=max(s.last_ms, end)), []
    until_flat = depletion_ms(s, cfg)
    if dt_ms < until_flat:
        left = s.battery_mah - cfg.drain_per_ms(s.tier) * dt_ms
        return _with(s, battery_mah=max(0.0, left), battery_ms=end, last_ms=max(s.last_ms, end)), []
    t_flat = s.battery_ms + until_flat
    s = _with(s, battery_mah=0.0, battery_ms=t_flat)
    s, recs = power_off(s, t_flat)
    return _with(s, battery_ms=end, last_ms=max(s.last_ms, end)), recs
