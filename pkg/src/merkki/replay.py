"""Check a log against the rules the engine is supposed to obey.

Everything is reconstructed from the log and the scenario alone: positions
come from the ``x``/``y`` fields of POWER_ON, collections from ``owned`` and the
EXCHANGE records that follow. Records that share a timestamp are replayed as
power-ons and search starts first, then exchanges, then stops, which is the
order the engine itself uses inside one instant.
"""

from __future__ import annotations

from collections import defaultdict
from itertools import groupby

from .core import DeviceId, EventKind, EventRecord, Scenario, format_time, parse_time
from .radio import in_range, pair

_STARTS = (EventKind.POWER_ON, EventKind.SEARCH_START)
_STOPS = (EventKind.SEARCH_STOP, EventKind.POWER_OFF)


class _Replay:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.known = set(scenario.device_ids)
        self.initial = {d.id: set(d.pictures) for d in scenario.devices}
        self.locks = {p.id: p.lock for p in scenario.pictures if p.lock is not None}
        self.hold = scenario.radio.hold_ms
        self.range_mm = scenario.radio.range_mm
        self.owned: dict[DeviceId, set] = {}
        self.powered: set[DeviceId] = set()
        self.position: dict[DeviceId, tuple[int, int] | None] = {}
        self.search_since: dict[DeviceId, int] = {}
        self.last_commit: dict[DeviceId, int] = {}
        self.out: list[str] = []
        self.flagged_unknown: set[DeviceId] = set()

    def bad(self, t: int, msg: str) -> None:
        self.out.append(f"{msg} at t={format_time(t)}")

    # -- per-kind handlers ---------------------------------------------------------

    def start(self, r: EventRecord) -> None:
        d, t = r.device, r.time_ms
        if r.kind is EventKind.SEARCH_START:
            if d not in self.powered:
                self.bad(t, f"device {d} searches while off")
            self.search_since[d] = t
            return
        self.powered.add(d)
        try:
            x, y = r.get("x"), r.get("y")
            self.position[d] = None if x is None or y is None else (parse_time(x), parse_time(y))
            claimed = set(r.get_ints("owned"))
        except ValueError:
            self.bad(t, f"device {d} has a malformed POWER_ON")
            return
        have = self.owned.setdefault(d, set(self.initial.get(d, ())))
        if claimed != have:
            self.bad(t, f"collection of device {d} is {sorted(claimed)} but replay says {sorted(have)}")
            self.owned[d] = claimed | have
        for p in claimed - self.initial.get(d, set()):
            lock = self.locks.get(p)
            if lock is not None and lock.never:
                self.bad(t, f"locked picture {p} held by device {d}")

    def stop(self, r: EventRecord) -> None:
        self.search_since.pop(r.device, None)
        if r.kind is EventKind.POWER_OFF:
            self.powered.discard(r.device)

    def exchanges(self, t: int, recs: list[EventRecord]) -> None:
        by_dev: dict[DeviceId, EventRecord] = {}
        for r in recs:
            if r.device in by_dev:
                self.bad(t, f"device {r.device} commits twice")
            by_dev[r.device] = r
        parsed = {}
        for d, r in by_dev.items():
            try:
                parsed[d] = (r.get_int("partner"), r.get_int("sent_picture"),
                             r.get_int("received_picture"), r.get_bool("duplicate_flag"))
            except (KeyError, ValueError):
                self.bad(t, f"malformed EXCHANGE for device {d}")
        # mirror pairing first, so each commit is checked once
        commits = []
        for a, (b, sent, got, _dup) in sorted(parsed.items()):
            m = parsed.get(b)
            if m is None or m[0] != a or m[1] != got or m[2] != sent:
                self.bad(t, f"EXCHANGE of device {a} with {b} has no mirror record")
            elif a < b:
                commits.append((a, b))
        for a, b in commits:
            self.commit(t, a, b, parsed[a], parsed[b])
        # collections change only after every commit of the instant has been judged
        for d, (_b, _sent, got, dup) in sorted(parsed.items()):
            have = self.owned.setdefault(d, set(self.initial.get(d, ())))
            if dup != (got in have):
                self.bad(t, f"duplicate_flag of device {d} is wrong for picture {got}")
            have.add(got)
            self.last_commit[d] = t

    def commit(self, t: int, a: DeviceId, b: DeviceId, ra, rb) -> None:
        pa, pb = self.position.get(a), self.position.get(b)
        if a not in self.powered or b not in self.powered or pa is None or pb is None \
                or not in_range(pa, pb, self.range_mm):
            self.bad(t, f"exchange locality violated for {a}-{b}")
        if a not in self.search_since or b not in self.search_since:
            self.bad(t, f"exchange {a}-{b} while not both searching")
        else:
            since = max(self.search_since[a], self.search_since[b],
                        self.last_commit.get(a, -1), self.last_commit.get(b, -1))
            for rec in (ra, rb):
                lock = self.locks.get(rec[1])
                if lock is not None and lock.unlock_ms is not None:
                    since = max(since, lock.unlock_ms)
            if t - since < self.hold:
                self.bad(t, f"hold-time violated for {a}-{b}: overlap {format_time(t - since)} s")
        for d, rec in ((a, ra), (b, rb)):
            sent = rec[1]
            if sent not in self.owned.get(d, ()):
                self.bad(t, f"device {d} sent picture {sent} it does not own")
            lock = self.locks.get(sent)
            if lock is not None and lock.is_locked(t):
                self.bad(t, f"locked picture {sent} left device {d}")

    def run(self, log: list[EventRecord]) -> list[str]:
        prev = None
        for t, group in groupby(log, key=lambda r: r.time_ms):
            if prev is not None and t < prev:
                self.bad(t, "log goes back in time")
            prev = t
            recs = []
            for r in group:
                if r.device not in self.known:
                    if r.device not in self.flagged_unknown:
                        self.flagged_unknown.add(r.device)
                        self.bad(t, f"unknown device {r.device}")
                    continue
                recs.append(r)
            for r in recs:
                if r.kind in _STARTS:
                    self.start(r)
            self.exchanges(t, [r for r in recs if r.kind is EventKind.EXCHANGE])
            for r in recs:
                if r.kind in _STOPS:
                    self.stop(r)
        return self.out


def replay_check(log: list[EventRecord], scenario: Scenario) -> list[str]:
    """All rule violations found in ``log``; empty for a log the engine could have written."""
    return _Replay(scenario).run(log)


def exchange_pairs(log: list[EventRecord]) -> list[tuple[int, tuple[DeviceId, DeviceId]]]:
    """(time, pair) for every commit, read from the lower-id side's record."""
    out = []
    for r in log:
        if r.kind is EventKind.EXCHANGE:
            b = r.get_int("partner")
            if r.device < b:
                out.append((r.time_ms, pair(r.device, b)))
    return out


def collections_from_log(log: list[EventRecord]) -> dict[DeviceId, set]:
    """Final collection per device: first POWER_ON inventory plus every delivery."""
    owned: dict[DeviceId, set] = defaultdict(set)
    seen = set()
    for r in log:
        if r.kind is EventKind.POWER_ON and r.device not in seen:
            seen.add(r.device)
            owned[r.device] |= set(r.get_ints("owned"))
        elif r.kind is EventKind.EXCHANGE:
            owned[r.device].add(r.get_int("received_picture"))
    return dict(owned)
