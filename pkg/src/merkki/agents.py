"""Behavior policies that turn an agent's view of its patch into gestures."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable

from .core import Archetype, BehaviorSpec, PictureId
from .device import DeviceState, Gesture, GestureKind, Power, ProximitySummary

TAP_GAP_MS = 200
REACTION_MS = 500
MIN_GAP_MS = 100


@dataclass(frozen=True)
class Observation:
    state: DeviceState
    proximity: ProximitySummary
    now_ms: int
    reason: str = "wake"  # "start", "wake" or "notice"


class Agent:
    """Policy memory for one device. ``next_wake_ms`` tells the engine when to call back."""

    def __init__(self, spec: BehaviorSpec, universe: Iterable[PictureId] = ()):
        self.spec = spec
        self.targets = frozenset(spec.targets) if spec.targets else frozenset(universe)
        self.busy_until_ms = 0
        self.next_attempt_ms: int | None = None
        self.next_beat_ms: int | None = None
        self.next_wake_ms: int | None = None

    # -- helpers ------------------------------------------------------------

    def _gap(self, mean_s: float, rng: random.Random) -> int:
        return max(MIN_GAP_MS, int(round(rng.expovariate(1.0 / mean_s) * 1000)))

    def wants_to_trade(self, state: DeviceState) -> bool:
        a = self.spec.archetype
        if a in (Archetype.IDLE, Archetype.SPAMMER) or self.spec.mean_interval_s <= 0:
            return False
        if a is Archetype.COLLECTOR and self.targets <= set(state.owned):
            return False
        return bool(state.owned)

    def _choose_index(self, state: DeviceState, rng: random.Random) -> int:
        n = len(state.owned)
        if self.spec.archetype is Archetype.CHALLENGE_KEEPER:
            locked = [i for i, p in enumerate(state.owned) if p in self.spec.locked]
            free = [i for i, p in enumerate(state.owned) if p not in self.spec.locked]
            if locked and (not free or rng.random() < self.spec.locked_fraction):
                return rng.choice(locked)
            return rng.choice(free)
        taps = rng.randint(0, max(0, min(self.spec.max_taps, n - 1)))
        return (state.selected_index + taps) % n

    def _taps_to(self, state: DeviceState, index: int, t: int) -> tuple[list[Gesture], int]:
        n = len(state.owned)
        taps = (index - state.selected_index) % n if n else 0
        out = [Gesture(GestureKind.TAP_R, t + i * TAP_GAP_MS) for i in range(taps)]
        return out, t + taps * TAP_GAP_MS

    def _episode(self, state: DeviceState, t: int, rng: random.Random) -> list[Gesture]:
        out, t = self._taps_to(state, self._choose_index(state, rng), t)
        end = t + int(round(self.spec.hold_s * 1000))
        out += [Gesture(GestureKind.HOLD_R_START, t), Gesture(GestureKind.HOLD_R_END, end)]
        self.busy_until_ms = end + TAP_GAP_MS
        return out

    def _beat(self, t: int) -> list[Gesture]:
        period = int(round(60_000 / self.spec.beat_bpm))
        out = [Gesture(GestureKind.HOLD_L_START, t), Gesture(GestureKind.HOLD_L_END, t + 1000)]
        out += [Gesture(GestureKind.TAP_L, t + 1500 + i * period) for i in range(4)]
        self.busy_until_ms = out[-1].time_ms + TAP_GAP_MS
        return out

    def _spam(self, obs: Observation) -> list[Gesture]:
        s, now, spec = obs.state, obs.now_ms, self.spec
        if obs.reason != "start" or spec.spam_picture not in s.owned:
            return []
        out, t = self._taps_to(s, s.owned.index(spec.spam_picture), now)
        out.append(Gesture(GestureKind.HOLD_R_START, t))
        self.busy_until_ms = t
        self.next_wake_ms = None
        return out

    def _reschedule(self) -> None:
        times = [x for x in (self.next_attempt_ms, self.next_beat_ms) if x is not None]
        self.next_wake_ms = max(self.busy_until_ms, min(times)) if times else None

    # -- policy -------------------------------------------------------------

    def notice(self, s: DeviceState, proximity: ProximitySummary, now: int, rng: random.Random) -> list[Gesture]:
        """A neighbour just started searching. The pending wake is kept unless we join."""
        if (s.power is Power.OFF or now < self.busy_until_ms
                or self.spec.archetype in (Archetype.IDLE, Archetype.SPAMMER)):
            return []
        # spread the response over the crowd: about join_prob responders per trade call
        crowd = max(1, proximity.peers_in_range + proximity.strangers_in_range - 1)
        if not (self.wants_to_trade(s) and rng.random() < self.spec.join_prob / crowd):
            return []
        out = self._episode(s, now + REACTION_MS, rng)
        self._reschedule()
        return out

    def step(self, obs: Observation, rng: random.Random) -> list[Gesture]:
        s, now, spec = obs.state, obs.now_ms, self.spec
        if s.power is Power.OFF or spec.archetype is Archetype.IDLE:
            self.next_wake_ms = None
            return []

        if spec.archetype is Archetype.SPAMMER:
            return self._spam(obs)

        if obs.reason == "start":
            self.busy_until_ms = now
            self.next_attempt_ms = now + self._gap(spec.mean_interval_s, rng) if spec.mean_interval_s > 0 else None
            self.next_beat_ms = now + self._gap(spec.beat_mean_s, rng) if spec.beat_mean_s > 0 else None
            self._reschedule()
            return []

        if now < self.busy_until_ms:
            return []

        out: list[Gesture] = []
        if obs.reason == "notice":
            return self.notice(s, obs.proximity, now, rng)
        else:
            if self.next_attempt_ms is not None and now >= self.next_attempt_ms:
                if self.wants_to_trade(s):
                    out = self._episode(s, now, rng)
                    self.next_attempt_ms = self.busy_until_ms + self._gap(spec.mean_interval_s, rng)
                else:
                    self.next_attempt_ms = None
            elif self.next_beat_ms is not None and now >= self.next_beat_ms:
                out = self._beat(now)
                self.next_beat_ms = self.busy_until_ms + self._gap(spec.beat_mean_s, rng)
        self._reschedule()
        return out


def agent_policy_step(agent: Agent, observation: Observation, rng: random.Random) -> list[Gesture]:
    return agent.step(observation, rng)
