"""Slow reference implementations used to check the fast ones.

Each function here restates a rule as directly as possible (quadratic scans,
exhaustive enumeration, exact fractions) and shares no logic with the module it
checks. Tests and the acceptance suite compare the two.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

from .core import EventKind, EventRecord


def brute_adjacency(positions_mm: dict, powered, range_m: float) -> dict:
    """Neighbours by plain Euclidean distance, every pair checked."""
    live = [d for d in positions_mm if d in powered]
    out = {d: set() for d in live}
    for a in live:
        for b in live:
            if a != b and math.dist(positions_mm[a], positions_mm[b]) <= range_m * 1000:
                out[a].add(b)
    return out


def hop_distances(source, adjacency: dict) -> dict:
    """Hop counts by repeated relaxation (Bellman-Ford with unit weights)."""
    nodes = set(adjacency) | {v for vs in adjacency.values() for v in vs} | {source}
    dist = {n: math.inf for n in nodes}
    dist[source] = 0
    for _ in range(len(nodes)):
        for u in nodes:
            for v in adjacency.get(u, ()):
                if dist[u] + 1 < dist[v]:
                    dist[v] = dist[u] + 1
    return {n: int(d) for n, d in dist.items() if d != math.inf}


def greedy_outcomes(ripe_pairs) -> dict[frozenset, Fraction]:
    """Exact distribution of the commit set for one rendezvous tick.

    Walks every branch of the greedy rule: devices in ascending order, each free
    device choosing uniformly among its free ripe partners.
    """
    nbrs: dict = {}
    for a, b in ripe_pairs:
        nbrs.setdefault(a, set()).add(b)
        nbrs.setdefault(b, set()).add(a)
    order = sorted(nbrs)
    out: dict[frozenset, Fraction] = {}

    def walk(i: int, taken: frozenset, commits: frozenset, prob: Fraction) -> None:
        if i == len(order):
            out[commits] = out.get(commits, Fraction(0)) + prob
            return
        d = order[i]
        free = sorted(c for c in nbrs[d] if c not in taken)
        if d in taken or not free:
            walk(i + 1, taken, commits, prob)
            return
        for c in free:
            walk(i + 1, taken | {d, c}, commits | {(min(d, c), max(d, c))}, prob / len(free))

    walk(0, frozenset(), frozenset(), Fraction(1))
    return out


def expected_commits(ripe_pairs, device) -> tuple[Fraction, Fraction]:
    """(expected commits involving ``device``, expected commits) for one tick."""
    involving = total = Fraction(0)
    for commits, p in greedy_outcomes(ripe_pairs).items():
        total += p * len(commits)
        involving += p * sum(1 for c in commits if device in c)
    return involving, total


def ripe_pairs_at_commits(log: list[EventRecord], hold_ms: int, tick_ms: int, adjacent=lambda a, b: True):
    """For every instant with commits: (time, ripe pairs, committed pairs).

    Overlap is counted on the tick grid: a pair starts counting at the first
    tick at which both are searching, and restarts when either commits.
    """
    searching: dict = {}
    last_commit: dict = {}
    by_time: dict[int, list[EventRecord]] = {}
    for r in log:
        by_time.setdefault(r.time_ms, []).append(r)
    out = []
    for t in sorted(by_time):
        recs = by_time[t]
        for r in recs:
            if r.kind is EventKind.SEARCH_START:
                searching[r.device] = t
        commits = sorted({(min(r.device, r.get_int("partner")), max(r.device, r.get_int("partner")))
                          for r in recs if r.kind is EventKind.EXCHANGE})
        if commits:
            ripe = []
            for a, b in combinations(sorted(searching), 2):
                if not adjacent(a, b):
                    continue
                first_tick = -(-max(searching[a], searching[b]) // tick_ms) * tick_ms
                since = max(first_tick, last_commit.get(a, -1), last_commit.get(b, -1))
                if t - since >= hold_ms:
                    ripe.append((a, b))
            out.append((t, ripe, commits))
            for a, b in commits:
                last_commit[a] = last_commit[b] = t
        for r in recs:
            if r.kind in (EventKind.SEARCH_STOP, EventKind.POWER_OFF):
                searching.pop(r.device, None)
    return out


def possession_classes(log: list[EventRecord], picture) -> list[str]:
    """INITIAL_SPREAD / RE_RECEIVE per delivery of ``picture``, by rescanning the log each time."""
    first_on = {}
    for r in log:
        if r.kind is EventKind.POWER_ON and r.device not in first_on:
            first_on[r.device] = r
    classes = []
    for r in log:
        if r.kind is not EventKind.EXCHANGE or r.get_int("received_picture") != picture:
            continue
        had = r.device in first_on and str(picture) in first_on[r.device].get("owned", "").split(",")
        for q in log:
            if (q.kind is EventKind.EXCHANGE and q.time_ms < r.time_ms and q.device == r.device
                    and q.get_int("received_picture") == picture):
                had = True
        classes.append("RE_RECEIVE" if had else "INITIAL_SPREAD")
    return classes


def recount_stats(log: list[EventRecord], pictures) -> dict:
    """picture -> (deliveries, distinct receivers other than initial owners)."""
    out = {}
    for p in pictures:
        owners = set()
        seen_on = set()
        for r in log:
            if r.kind is EventKind.POWER_ON and r.device not in seen_on:
                seen_on.add(r.device)
                if str(p) in r.get("owned", "").split(","):
                    owners.add(r.device)
        n = 0
        who = set()
        for r in log:
            if r.kind is EventKind.EXCHANGE and r.get("received_picture") == str(p):
                n += 1
                if r.device not in owners:
                    who.add(r.device)
        out[p] = (n, len(who))
    return out


def recount_sends(log: list[EventRecord]) -> dict:
    """(sender, picture) -> sends, reading the sending side's own record."""
    out: dict = {}
    for r in log:
        if r.kind is EventKind.EXCHANGE:
            k = (r.device, r.get_int("sent_picture"))
            out[k] = out.get(k, 0) + 1
    return out
