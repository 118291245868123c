"""Generators shared by the test modules: random scenarios and random logs."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from merkki.core import (
    Archetype,
    BehaviorSpec,
    ChallengeLock,
    DeviceSpec,
    EventKind,
    EventRecord,
    Gathering,
    Picture,
    RadioParams,
    Scenario,
    format_time,
)


def build_scenario(rng: random.Random, n_devices: int | None = None) -> Scenario:
    """A small valid scenario with every archetype possible and short gatherings."""
    n = n_devices or rng.randint(2, 6)
    ids = rng.sample(range(1, 40), n)
    groups = ["a", "b", "c"][: rng.randint(1, 3)]
    radio = RadioParams(
        range_m=rng.choice([8, 20, 50]),
        latency_s=rng.choice([0.05, 0.1, 0.3]),
        loss_prob=rng.choice([0.0, 0.0, 0.3]),
        hold_duration_s=rng.choice([1, 3, 5]),
        tick_s=rng.choice([0.1, 0.1, 0.25]),
    )
    next_pic = 1
    devices, pictures, behaviors = [], [], {}
    for d in ids:
        own = list(range(next_pic, next_pic + rng.randint(1, 3)))
        next_pic += len(own)
        devices.append(DeviceSpec(d, rng.choice(groups), "#123456", tuple(own)))
        locked = []
        for p in own:
            lock = None
            roll = rng.random()
            if roll < 0.15:
                lock = ChallengeLock(None)
                locked.append(p)
            elif roll < 0.3:
                lock = ChallengeLock(rng.randint(0, 400_000))
                locked.append(p)
            pictures.append(Picture(p, d, lock))
        arch = rng.choice(list(Archetype))
        kw: dict = {
            "mean_interval_s": rng.choice([0.0, 5.0, 20.0, 60.0]),
            "hold_s": rng.choice([2.0, 6.0, 12.0]),
            "join_prob": rng.random(),
            "max_taps": rng.randint(0, 4),
            "beat_mean_s": rng.choice([0.0, 0.0, 30.0]),
            "beat_bpm": rng.choice([60.0, 120.0, 400.0]),
        }
        if arch is Archetype.SPAMMER:
            kw["spam_picture"] = rng.choice(own)
        if arch is Archetype.CHALLENGE_KEEPER:
            kw["locked"] = tuple(locked)
            kw["locked_fraction"] = rng.random()
        if arch is Archetype.COLLECTOR and rng.random() < 0.5:
            kw["targets"] = tuple(rng.sample(range(1, next_pic + 5), 2))
        behaviors[d] = BehaviorSpec(arch, **kw)
    gatherings = []
    t = rng.randint(0, 100) * 1000
    for _ in range(rng.randint(1, 2)):
        length = rng.randint(60, 400) * 1000
        who = None if rng.random() < 0.6 else tuple(sorted(rng.sample(ids, rng.randint(1, n))))
        gatherings.append(Gathering(
            t, t + length, rng.choice(["disc", "grid"]),
            radius_m=rng.choice([3.0, 15.0, 60.0]), spacing_m=rng.choice([2.0, 10.0]), devices=who))
        t += length + rng.randint(0, 200) * 1000
    return Scenario(
        radio=radio,
        devices=tuple(devices),
        pictures=tuple(pictures),
        gatherings=tuple(gatherings),
        behaviors=behaviors,
        seed=rng.randint(0, 2**32),
        battery_mah=rng.choice([1000.0, 1000.0, 0.5]),
    )


scenarios = st.builds(build_scenario, st.randoms(use_true_random=False))


def random_log(rng: random.Random, max_events: int = 1000, n_devices: int = 6, n_pictures: int = 8) -> list[EventRecord]:
    """POWER_ON inventories followed by mirrored EXCHANGE pairs, sometimes several per instant.

    Pictures sent need not be owned; the analysis functions must not care.
    """
    devs = list(range(1, n_devices + 1))
    owned = {d: set(rng.sample(range(1, n_pictures + 1), rng.randint(0, 3))) for d in devs}
    log = [EventRecord.make(0, d, EventKind.POWER_ON, owned=sorted(owned[d]), x="0.000", y="0.000") for d in devs]
    t = 0
    while len(log) + 2 <= max_events:
        if rng.random() < 0.02:
            break
        t += rng.choice([0, 100, 1000, 5000])
        free = devs[:]
        rng.shuffle(free)
        for _ in range(rng.randint(1, max(1, n_devices // 2))):
            if len(free) < 2 or len(log) + 2 > max_events:
                break
            a, b = free.pop(), free.pop()
            pa, pb = rng.randint(1, n_pictures), rng.randint(1, n_pictures)
            log.append(EventRecord.make(t, a, EventKind.EXCHANGE, partner=b, sent_picture=pa,
                                        received_picture=pb, duplicate_flag=pb in owned[a]))
            log.append(EventRecord.make(t, b, EventKind.EXCHANGE, partner=a, sent_picture=pb,
                                        received_picture=pa, duplicate_flag=pa in owned[b]))
            owned[a].add(pb)
            owned[b].add(pa)
    log.sort(key=EventRecord.sort_key)
    return log


logs = st.builds(random_log, st.randoms(use_true_random=False), st.integers(2, 300))


def line(t_ms: int, device: int, kind: str, **fields) -> str:
    return EventRecord.make(t_ms, device, EventKind(kind), **fields).to_line() + "\n"


__all__ = ["build_scenario", "scenarios", "random_log", "logs", "line", "format_time"]
