"""Simulated short-range radio.

Positions are integer millimetres so that range checks are exact. Overlap
timers are integer milliseconds keyed by unordered device pairs.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import DeviceId, GroupConfig, RadioParams
from .device import ProximitySummary

Adjacency = dict[DeviceId, frozenset[DeviceId]]
Pair = tuple[DeviceId, DeviceId]


def pair(a: DeviceId, b: DeviceId) -> Pair:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class WorldSnapshot:
    positions: Mapping[DeviceId, tuple[int, int]]  # millimetres
    powered: frozenset[DeviceId] = field(default_factory=frozenset)


def in_range(p: tuple[int, int], q: tuple[int, int], range_mm: int) -> bool:
    dx = p[0] - q[0]
    dy = p[1] - q[1]
    return dx * dx + dy * dy <= range_mm * range_mm


def connectivity(world: WorldSnapshot, params: RadioParams) -> Adjacency:
    """Single-hop disk graph over powered, placed devices."""
    rmm = params.range_mm
    live = sorted(d for d in world.powered if d in world.positions)
    nbrs: dict[DeviceId, set[DeviceId]] = {d: set() for d in live}
    for i, a in enumerate(live):
        pa = world.positions[a]
        for b in live[i + 1:]:
            if in_range(pa, world.positions[b], rmm):
                nbrs[a].add(b)
                nbrs[b].add(a)
    return {d: frozenset(s) for d, s in nbrs.items()}


def proximity_summary(d: DeviceId, adjacency: Adjacency, groups: GroupConfig) -> ProximitySummary:
    peers = strangers = 0
    for n in adjacency.get(d, ()):
        if groups.same_group(d, n):
            peers += 1
        else:
            strangers += 1
    return ProximitySummary(strangers_in_range=strangers, peers_in_range=peers)


# ---------------------------------------------------------------------------
# rendezvous


def co_searching_pairs(searchers: Iterable[DeviceId], adjacency: Adjacency) -> list[Pair]:
    s = set(searchers)
    out = []
    for a in sorted(s):
        for b in sorted(adjacency.get(a, ())):
            if b > a and b in s:
                out.append((a, b))
    return out


def rendezvous_step(
    searchers: Iterable[DeviceId],
    adjacency: Adjacency,
    timers: Mapping[Pair, int],
    dt_ms: int,
    rng: random.Random,
    hold_ms: int,
    pairs: Iterable[Pair] | None = None,
) -> tuple[dict[Pair, int], list[Pair]]:
    """Advance overlap timers by one tick and commit ripe pairs.

    A pair's timer only grows on ticks where it was already co-searching at
    the previous tick, so a timer never exceeds the real overlap. Ripe pairs
    are matched greedily in ascending device order, each device picking a
    partner uniformly among its still-free ripe candidates. ``pairs`` may carry
    a precomputed ``co_searching_pairs(searchers, adjacency)``.
    """
    if pairs is None:
        pairs = co_searching_pairs(searchers, adjacency)
    new: dict[Pair, int] = {}
    for p in pairs:
        new[p] = timers[p] + dt_ms if p in timers else 0

    ripe: dict[DeviceId, list[DeviceId]] = {}
    for (a, b), t in new.items():
        if t >= hold_ms:
            ripe.setdefault(a, []).append(b)
            ripe.setdefault(b, []).append(a)

    committed: set[DeviceId] = set()
    commits: list[Pair] = []
    for d in sorted(ripe):
        if d in committed:
            continue
        cands = sorted(c for c in ripe[d] if c not in committed)
        if not cands:
            continue
        partner = rng.choice(cands)
        committed.update((d, partner))
        commits.append(pair(d, partner))

    if committed:
        for p in new:
            if p[0] in committed or p[1] in committed:
                new[p] = 0
    return new, commits


def advance_timers(
    searchers: Iterable[DeviceId],
    adjacency: Adjacency,
    timers: Mapping[Pair, int],
    n_ticks: int,
    dt_ms: int,
) -> dict[Pair, int]:
    """Equivalent to ``n_ticks`` rendezvous steps in which nothing ripens."""
    return advance_pairs(co_searching_pairs(searchers, adjacency), timers, n_ticks, dt_ms)


def advance_pairs(pairs: Iterable[Pair], timers: Mapping[Pair, int], n_ticks: int, dt_ms: int) -> dict[Pair, int]:
    if n_ticks <= 0:
        return dict(timers)
    return {p: (timers[p] + n_ticks * dt_ms if p in timers else (n_ticks - 1) * dt_ms) for p in pairs}


def ticks_until_ripe(
    searchers: Iterable[DeviceId],
    adjacency: Adjacency,
    timers: Mapping[Pair, int],
    dt_ms: int,
    hold_ms: int,
) -> int | None:
    """Smallest n >= 1 such that the n-th step from now has a ripe pair."""
    return ticks_until_ripe_pairs(co_searching_pairs(searchers, adjacency), timers, dt_ms, hold_ms)


def ticks_until_ripe_pairs(pairs: Iterable[Pair], timers: Mapping[Pair, int], dt_ms: int, hold_ms: int) -> int | None:
    best = None
    fresh = 1 + max(0, -(-hold_ms // dt_ms))
    for p in pairs:
        t = timers.get(p)
        n = fresh if t is None else max(1, -(-(hold_ms - t) // dt_ms))
        if best is None or n < best:
            best = n
    return best


def reset_device(timers: Mapping[Pair, int], d: DeviceId) -> dict[Pair, int]:
    return {p: t for p, t in timers.items() if d not in p}


# ---------------------------------------------------------------------------
# tempo flood


def bfs_hops(source: DeviceId, adjacency: Mapping[DeviceId, Iterable[DeviceId]]) -> dict[DeviceId, int]:
    hops = {source: 0}
    q = deque([source])
    while q:
        u = q.popleft()
        for v in sorted(adjacency.get(u, ())):
            if v not in hops:
                hops[v] = hops[u] + 1
                q.append(v)
    return hops


def propagate_tempo(
    source: DeviceId,
    adjacency: Adjacency,
    params: RadioParams,
    now_ms: int = 0,
    rng: random.Random | None = None,
) -> list[tuple[DeviceId, int]]:
    """Hop-delayed flood of a tempo change from ``source``.

    Each link in the source's component survives independently with
    probability ``1 - loss_prob``; a device hears the tempo after
    ``latency * hops`` along the shortest surviving path.
    """
    component = bfs_hops(source, adjacency)
    if params.loss_prob > 0:
        rng = rng or random.Random(0)
        surviving: dict[DeviceId, set[DeviceId]] = {d: set() for d in component}
        for a in sorted(component):
            for b in sorted(adjacency.get(a, ())):
                if b > a and rng.random() >= params.loss_prob:
                    surviving[a].add(b)
                    surviving[b].add(a)
        hops = bfs_hops(source, surviving)
    else:
        hops = component
    lat = params.latency_ms
    return sorted(
        ((d, now_ms + lat * h) for d, h in hops.items() if d != source),
        key=lambda x: (x[1], x[0]),
    )


def eccentricity(source: DeviceId, adjacency: Adjacency) -> int:
    return max(bfs_hops(source, adjacency).values())


def disc_positions(devices: list[DeviceId], radius_m: float, rng: random.Random) -> dict[DeviceId, tuple[int, int]]:
    out = {}
    for d in devices:
        r = radius_m * math.sqrt(rng.random())
        th = 2 * math.pi * rng.random()
        out[d] = (int(round(r * math.cos(th) * 1000)), int(round(r * math.sin(th) * 1000)))
    return out


def grid_positions(devices: list[DeviceId], spacing_m: float) -> dict[DeviceId, tuple[int, int]]:
    cols = max(1, math.ceil(math.sqrt(len(devices))))
    step = int(round(spacing_m * 1000))
    return {d: ((i % cols) * step, (i // cols) * step) for i, d in enumerate(devices)}
