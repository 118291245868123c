import random
from collections import Counter
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from merkki.core import GroupConfig, RadioParams
from merkki.oracles import brute_adjacency, greedy_outcomes, hop_distances
from merkki.radio import (
    WorldSnapshot,
    advance_pairs,
    bfs_hops,
    co_searching_pairs,
    connectivity,
    eccentricity,
    propagate_tempo,
    proximity_summary,
    rendezvous_step,
    ticks_until_ripe_pairs,
)

P = RadioParams()


def world(positions_m, powered=None):
    pos = {d: (int(x * 1000), int(y * 1000)) for d, (x, y) in positions_m.items()}
    return WorldSnapshot(pos, frozenset(pos if powered is None else powered))


def test_range_boundary():
    assert connectivity(world({1: (0, 0), 2: (49, 0)}), P) == {1: frozenset({2}), 2: frozenset({1})}
    assert connectivity(world({1: (0, 0), 2: (51, 0)}), P) == {1: frozenset(), 2: frozenset()}
    assert connectivity(world({1: (0, 0), 2: (30, 40)}), P)[1] == {2}  # exactly 50 m


def test_unpowered_devices_have_no_links():
    adj = connectivity(world({1: (0, 0), 2: (1, 0)}, powered={1}), P)
    assert adj == {1: frozenset()}


@given(st.dictionaries(st.integers(0, 30), st.tuples(st.integers(-100_000, 100_000), st.integers(-100_000, 100_000)),
                       max_size=12),
       st.sets(st.integers(0, 30)))
def test_connectivity_matches_brute_force(pos, powered):
    w = WorldSnapshot(pos, frozenset(powered))
    adj = connectivity(w, P)
    assert {d: set(n) for d, n in adj.items()} == brute_adjacency(pos, powered, P.range_m)
    for a, ns in adj.items():
        assert a not in ns
        assert all(a in adj[b] for b in ns)


def test_proximity_counts():
    groups = GroupConfig({1: "x", 2: "x", 3: "x", 4: "y"}, {})
    adj = {1: frozenset({2, 3, 4}), 2: frozenset({1}), 3: frozenset({1}), 4: frozenset({1})}
    s = proximity_summary(1, adj, groups)
    assert (s.strangers_in_range, s.peers_in_range) == (1, 2)
    assert proximity_summary(2, {2: frozenset()}, groups).peers_in_range == 0


def full(ids):
    return {a: frozenset(b for b in ids if b != a) for a in ids}


def test_two_searchers_commit_after_hold():
    adj, timers, rng = full([1, 2]), {}, random.Random(0)
    commits_at = None
    for tick in range(80):
        timers, commits = rendezvous_step({1, 2}, adj, timers, 100, rng, 5000)
        if commits:
            commits_at = tick
            assert commits == [(1, 2)]
            break
    # timer is created at 0 on the first tick and needs 50 more
    assert commits_at == 50


def test_single_searcher_never_commits():
    timers, rng = {}, random.Random(0)
    for _ in range(200):
        timers, commits = rendezvous_step({1}, full([1, 2]), timers, 100, rng, 5000)
        assert commits == []


def test_triangle_branches_are_half_half():
    out = greedy_outcomes([(1, 2), (1, 3), (2, 3)])
    assert out == {frozenset({(1, 2)}): Fraction(1, 2), frozenset({(1, 3)}): Fraction(1, 2)}


def test_triangle_sampling_matches_enumeration():
    ripe = {(1, 2): 5000, (1, 3): 5000, (2, 3): 5000}
    rng = random.Random(42)
    seen = Counter()
    for _ in range(4000):
        _, commits = rendezvous_step({1, 2, 3}, full([1, 2, 3]), ripe, 0, rng, 5000)
        assert len(commits) == 1
        seen[commits[0]] += 1
    assert set(seen) == {(1, 2), (1, 3)}
    assert abs(seen[(1, 2)] / 4000 - 0.5) < 0.03


def test_commit_resets_every_touching_timer():
    timers = {(1, 2): 5000, (1, 3): 100, (3, 4): 300}
    new, commits = rendezvous_step({1, 2, 3, 4}, full([1, 2, 3, 4]), timers, 100, random.Random(1), 5000)
    assert commits == [(1, 2)]
    assert new[(1, 3)] == 0 and new[(1, 2)] == 0 and new[(3, 4)] == 400


@st.composite
def searching_worlds(draw):
    ids = draw(st.lists(st.integers(1, 9), min_size=2, max_size=6, unique=True))
    edges = draw(st.sets(st.sampled_from([(a, b) for a in ids for b in ids if a < b])))
    adj = {d: frozenset({b for a, b in edges if a == d} | {a for a, b in edges if b == d}) for d in ids}
    searchers = set(draw(st.lists(st.sampled_from(ids), unique=True)))
    pairs = co_searching_pairs(searchers, adj)
    timers = {p: draw(st.integers(0, 40)) * 100 for p in pairs if draw(st.booleans())}
    return searchers, adj, timers


@settings(max_examples=200)
@given(searching_worlds(), st.integers(0, 60))
def test_bulk_advance_equals_single_steps(w, n):
    searchers, adj, timers = w
    pairs = co_searching_pairs(searchers, adj)
    ripe_in = ticks_until_ripe_pairs(pairs, timers, 100, 5000)
    n = n if ripe_in is None else min(n, ripe_in - 1)
    stepped = dict(timers)
    for _ in range(n):
        stepped, commits = rendezvous_step(searchers, adj, stepped, 100, random.Random(0), 5000)
        assert commits == []
    assert advance_pairs(pairs, timers, n, 100) == (stepped if n else dict(timers))
    if ripe_in is not None:
        # the first ripening happens on exactly the predicted step
        stepped = advance_pairs(pairs, timers, ripe_in - 1, 100)
        _, commits = rendezvous_step(searchers, adj, stepped, 100, random.Random(0), 5000)
        assert commits


def test_hop_delays_on_star_and_line():
    star = {0: frozenset({1, 2, 3}), 1: frozenset({0}), 2: frozenset({0}), 3: frozenset({0})}
    assert propagate_tempo(0, star, P, 1000) == [(1, 1100), (2, 1100), (3, 1100)]
    line = {1: frozenset({2}), 2: frozenset({1, 3}), 3: frozenset({2})}
    assert propagate_tempo(1, line, P, 0) == [(2, 100), (3, 200)]


def test_total_loss_reaches_nobody():
    star = {0: frozenset({1, 2}), 1: frozenset({0}), 2: frozenset({0})}
    assert propagate_tempo(0, star, RadioParams(loss_prob=1.0), 0, random.Random(3)) == []


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 9))
    edges = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))))
    adj = {d: set() for d in range(n)}
    for a, b in edges:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    return {d: frozenset(s) for d, s in adj.items()}


@given(graphs())
def test_bfs_matches_relaxation(adj):
    assert bfs_hops(0, adj) == hop_distances(0, adj)
    delays = dict(propagate_tempo(0, adj, P, 0))
    assert set(delays) == set(hop_distances(0, adj)) - {0}
    assert all(t <= P.latency_ms * eccentricity(0, adj) for t in delays.values())


@given(graphs(), st.floats(0, 1), st.integers(0, 10**6))
def test_lossy_delivery_never_beats_lossless(adj, loss, seed):
    lossless = dict(propagate_tempo(0, adj, P, 0))
    lossy = propagate_tempo(0, adj, RadioParams(loss_prob=loss), 0, random.Random(seed))
    for d, t in lossy:
        assert t >= lossless[d]
