"""Deterministic discrete-event engine.

One heap of timed events drives devices, agents and the radio. Within one
millisecond events run in phase order: power-on, deliveries and unlocks,
agent decisions and gestures, the rendezvous tick, then power-off. Rendezvous
ticks live on a fixed global grid and are skipped in bulk while nothing can
ripen, which is exactly equivalent to stepping every tick.
"""

from __future__ import annotations

import heapq
import itertools
import os
import random
from dataclasses import dataclass

from .agents import Agent, Observation
from .core import (
    DeviceId,
    EventKind,
    EventRecord,
    Scenario,
    format_time,
    serialize_log,
)
from .device import (
    DeviceConfig,
    DeviceState,
    Gesture,
    GestureKind,
    Power,
    battery_step,
    commit_exchange,
    depletion_ms,
    handle_gesture,
    new_device,
    on_proximity,
    outgoing_picture,
    power_off,
    power_on,
    receive_tempo,
)
from .radio import (
    WorldSnapshot,
    advance_pairs,
    co_searching_pairs,
    connectivity,
    disc_positions,
    grid_positions,
    pair,
    propagate_tempo,
    proximity_summary,
    rendezvous_step,
    reset_device,
    ticks_until_ripe_pairs,
)

EventLog = list[EventRecord]

DEFAULT_MAX_EVENTS = 2_000_000
SEED_ENV = "MERKKI_SEED"

# phases within one instant
P_START, P_DELIVER, P_AGENT, P_TICK, P_STOP = range(5)


class EventLimitExceeded(RuntimeError):
    pass


def effective_seed(scenario: Scenario, cli_seed: int | None = None) -> int:
    """--seed beats MERKKI_SEED beats the scenario's own seed."""
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip() != "":
        return int(env)
    return scenario.seed


@dataclass
class _Event:
    kind: str
    device: DeviceId | None = None
    data: object = None


class Simulation:
    def __init__(self, scenario: Scenario, seed: int, max_events: int = DEFAULT_MAX_EVENTS,
                 cfg: DeviceConfig | None = None):
        self.sc = scenario
        self.seed = seed
        self.max_events = max_events
        self.radio = scenario.radio
        self.cfg = cfg or DeviceConfig(
            capacity_mah=scenario.battery_mah,
            beat_window_ms=scenario.radio.beat_window_ms,
        )
        self.pictures = scenario.picture_map
        self.groups = scenario.group_config
        universe = sorted(self.pictures)
        self.states: dict[DeviceId, DeviceState] = {
            d.id: new_device(d.id, d.pictures, self.cfg) for d in scenario.devices
        }
        self.agents = {d: Agent(scenario.behavior(d), universe) for d in self.states}
        self.agent_rng = {d: random.Random(f"{seed}:agent:{d}") for d in self.states}
        self.wake_version = {d: 0 for d in self.states}
        self.rv_rng = random.Random(f"{seed}:rendezvous")
        self.tempo_rng = random.Random(f"{seed}:tempo")

        self.positions: dict[DeviceId, tuple[int, int]] = {}
        self.adjacency: dict[DeviceId, frozenset[DeviceId]] = {}
        self.searchers: set[DeviceId] = set()
        self.pairs: list = []
        self.pairs_dirty = False
        self.proximity: dict = {}
        self.timers: dict = {}
        self.records: EventLog = []
        self.heap: list = []
        self._seq = itertools.count()
        self.dt = self.radio.tick_ms
        self.end_ms = None if scenario.duration_s is None else int(round(scenario.duration_s * 1000))

    # -- plumbing -------------------------------------------------------------

    def push(self, t: int, phase: int, ev: _Event) -> None:
        if self.end_ms is not None and t > self.end_ms:
            return
        heapq.heappush(self.heap, (t, phase, next(self._seq), ev))

    def emit(self, recs) -> None:
        self.records.extend(recs)
        if len(self.records) > self.max_events:
            raise EventLimitExceeded(f"more than {self.max_events} events")

    def touch(self, d: DeviceId, t: int) -> None:
        """Bring ``d``'s battery up to time ``t``; handles depletion."""
        s = self.states[d]
        if t <= s.battery_ms:
            return
        was_on = s.power is Power.ON
        s, recs = battery_step(s, t - s.battery_ms, self.cfg)
        self.states[d] = s
        self.emit(recs)
        if was_on and s.power is Power.OFF:
            self.agents[d].next_wake_ms = None
            self.refresh_radio(t)

    def schedule_depletion(self, d: DeviceId) -> None:
        s = self.states[d]
        left = depletion_ms(s, self.cfg)
        if left is not None:
            self.push(s.battery_ms + left, P_STOP, _Event("deplete", d))

    def schedule_wake(self, d: DeviceId) -> None:
        self.wake_version[d] += 1
        t = self.agents[d].next_wake_ms
        if t is not None:
            self.push(t, P_AGENT, _Event("wake", d, self.wake_version[d]))

    def refresh_radio(self, now: int) -> None:
        powered = frozenset(d for d, s in self.states.items() if s.power is Power.ON)
        self.adjacency = connectivity(WorldSnapshot(self.positions, powered), self.radio)
        self.proximity = {}
        for d in sorted(powered):
            self.touch(d, now)
            if self.states[d].power is not Power.ON:
                continue
            p = self.proximity[d] = proximity_summary(d, self.adjacency, self.groups)
            s, rec = on_proximity(self.states[d], p, now)
            if rec is not None:
                self.states[d] = s
                self.emit([rec])
                self.schedule_depletion(d)
        self.refresh_searchers(now)

    def refresh_searchers(self, now: int) -> None:
        new = {
            d for d, s in self.states.items()
            if s.power is Power.ON and d in self.adjacency
            and outgoing_picture(s, now, self.pictures) is not None
        }
        for d in self.searchers - new:
            self.timers = reset_device(self.timers, d)
        self.searchers = new
        self.pairs = co_searching_pairs(new, self.adjacency)
        self.pairs_dirty = True

    def update_searcher(self, d: DeviceId, now: int) -> None:
        """Cheap form of ``refresh_searchers`` when only ``d`` may have changed."""
        s = self.states[d]
        eligible = (s.power is Power.ON and d in self.adjacency
                    and outgoing_picture(s, now, self.pictures) is not None)
        if eligible == (d in self.searchers):
            return
        if eligible:
            self.searchers.add(d)
            self.pairs += [pair(d, n) for n in self.adjacency[d] if n in self.searchers and n != d]
        else:
            self.searchers.discard(d)
            self.timers = reset_device(self.timers, d)
            self.pairs = [p for p in self.pairs if d not in p]
        self.pairs_dirty = True

    def observe(self, d: DeviceId, now: int, reason: str) -> Observation:
        return Observation(
            state=self.states[d],
            proximity=self.proximity.get(d) or proximity_summary(d, self.adjacency, self.groups),
            now_ms=now,
            reason=reason,
        )

    def run_agent(self, d: DeviceId, now: int, reason: str) -> None:
        agent = self.agents[d]
        gestures = agent.step(self.observe(d, now, reason), self.agent_rng[d])
        self.push_gestures(d, gestures)
        self.schedule_wake(d)

    def push_gestures(self, d: DeviceId, gestures) -> None:
        for g in gestures:
            self.push(g.time_ms, P_AGENT, _Event("gesture", d, g))

    # -- event handlers ---------------------------------------------------------

    def on_gathering_start(self, now: int, index: int) -> None:
        g = self.sc.gatherings[index]
        who = [d for d in g.attendees(self.states) if d in self.states]
        if g.placement == "grid":
            pos = grid_positions(who, g.spacing_m)
        else:
            pos = disc_positions(who, g.radius_m, random.Random(f"{self.seed}:place:{index}"))
        for d in who:
            self.touch(d, now)
            self.positions[d] = pos[d]
            x, y = pos[d]
            s, recs = power_on(self.states[d], now, self.cfg, x=format_time(x), y=format_time(y))
            self.states[d] = s
            self.emit(recs)
        self.refresh_radio(now)
        for d in who:
            self.schedule_depletion(d)
            self.run_agent(d, now, "start")

    def on_gathering_end(self, now: int, index: int) -> None:
        g = self.sc.gatherings[index]
        for d in g.attendees(self.states):
            if d not in self.states:
                continue
            self.touch(d, now)
            s, recs = power_off(self.states[d], now)
            self.states[d] = s
            self.emit(recs)
            self.positions.pop(d, None)
            self.agents[d].next_wake_ms = None
            self.wake_version[d] += 1
        self.refresh_radio(now)

    def on_gesture(self, now: int, d: DeviceId, g: Gesture) -> None:
        if g.kind in (GestureKind.PUSH_B, GestureKind.HOLD_LR, GestureKind.PUSH_A):
            self.touch(d, now)  # these may report or switch on battery state
        before = self.states[d]
        s, recs = handle_gesture(before, g, self.cfg)
        self.states[d] = s
        if s.power is Power.ON and before.power is Power.OFF and d in self.positions:
            # a manual power-on inside a gathering keeps its spot; log it like the automatic one
            x, y = self.positions[d]
            recs = [EventRecord.make(now, d, r.kind, owned=s.owned, x=format_time(x), y=format_time(y))
                    if r.kind is EventKind.POWER_ON else r for r in recs]
        self.emit(recs)
        if (before.power is Power.ON) != (s.power is Power.ON):
            self.refresh_radio(now)
            if s.power is Power.ON:
                self.schedule_depletion(d)
            return
        for r in recs:
            if r.kind is EventKind.TEMPO_SET:
                bpm = float(r.get("bpm"))
                for target, at in propagate_tempo(d, self.adjacency, self.radio, now, self.tempo_rng):
                    self.push(at, P_DELIVER, _Event("tempo", target, (bpm, d)))
            elif r.kind is EventKind.SEARCH_START:
                for n in sorted(self.adjacency.get(d, ())):
                    agent = self.agents[n]
                    if now >= agent.busy_until_ms:
                        gestures = agent.notice(self.states[n], self.proximity[n], now, self.agent_rng[n])
                        if gestures:
                            self.push_gestures(n, gestures)
                            self.schedule_wake(n)
        if s.mode is not before.mode:
            self.update_searcher(d, now)

    def on_tick(self, now: int, commits) -> None:
        for a, b in commits:
            pa = outgoing_picture(self.states[a], now, self.pictures)
            pb = outgoing_picture(self.states[b], now, self.pictures)
            sa, dup_a = commit_exchange(self.states[a], pb)
            sb, dup_b = commit_exchange(self.states[b], pa)
            self.states[a], self.states[b] = sa, sb
            self.emit([
                EventRecord.make(now, a, EventKind.EXCHANGE, partner=b, sent_picture=pa,
                                 received_picture=pb, duplicate_flag=dup_a),
                EventRecord.make(now, b, EventKind.EXCHANGE, partner=a, sent_picture=pb,
                                 received_picture=pa, duplicate_flag=dup_b),
            ])

    def dispatch(self, now: int, ev: _Event) -> None:
        k, d = ev.kind, ev.device
        if k == "start":
            self.on_gathering_start(now, ev.data)
        elif k == "end":
            self.on_gathering_end(now, ev.data)
        elif k == "gesture":
            self.on_gesture(now, d, ev.data)
        elif k == "wake":
            if ev.data == self.wake_version[d]:
                self.run_agent(d, now, "wake")
        elif k == "tempo":
            bpm, src = ev.data
            s, recs = receive_tempo(self.states[d], bpm, now, src, self.cfg)
            self.states[d] = s
            self.emit(recs)
        elif k == "unlock":
            self.refresh_searchers(now)
        elif k == "deplete":
            self.touch(d, now)

    # -- main loop ----------------------------------------------------------------

    def run(self) -> EventLog:
        for i, g in enumerate(self.sc.gatherings):
            end = g.end_ms if self.end_ms is None else min(g.end_ms, self.end_ms)
            if g.start_ms > end:
                continue
            self.push(g.start_ms, P_START, _Event("start", None, i))
            self.push(end, P_STOP, _Event("end", None, i))
        for p in self.pictures.values():
            if p.lock is not None and p.lock.unlock_ms is not None:
                self.push(p.lock.unlock_ms, P_DELIVER, _Event("unlock"))

        dt, hold = self.dt, self.radio.hold_ms
        cur_tick = -dt
        ripe_at = None  # absolute time of the next ripening tick; bulk advances don't move it
        while self.heap:
            e, ph = self.heap[0][0], self.heap[0][1]
            if self.pairs_dirty:
                n = ticks_until_ripe_pairs(self.pairs, self.timers, dt, hold)
                ripe_at = None if n is None else cur_tick + n * dt
                self.pairs_dirty = False
            if ripe_at is not None and (ripe_at, P_TICK) < (e, ph):
                n = (ripe_at - cur_tick) // dt
                self.timers = advance_pairs(self.pairs, self.timers, n - 1, dt)
                self.timers, commits = rendezvous_step(
                    self.searchers, self.adjacency, self.timers, dt, self.rv_rng, hold, pairs=self.pairs)
                cur_tick = ripe_at
                self.on_tick(ripe_at, commits)
                self.pairs_dirty = True
                continue
            # run every tick that precedes the next event without ripening
            last = e if ph > P_TICK else e - 1
            m = max(0, (last - cur_tick) // dt)
            if self.pairs and m:
                self.timers = advance_pairs(self.pairs, self.timers, m, dt)
            cur_tick += m * dt
            t, _, _, ev = heapq.heappop(self.heap)
            self.dispatch(t, ev)

        self.records.sort(key=EventRecord.sort_key)
        return self.records


def run(scenario: Scenario, seed_override: int | None = None, max_events: int = DEFAULT_MAX_EVENTS) -> EventLog:
    """Simulate ``scenario``; the result depends only on the arguments."""
    seed = scenario.seed if seed_override is None else seed_override
    return Simulation(scenario, seed, max_events).run()


def run_text(scenario: Scenario, seed_override: int | None = None) -> str:
    return serialize_log(run(scenario, seed_override))
