import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from merkki.core import ChallengeLock, EventKind, Picture
from merkki.device import (
    DEFAULT_CONFIG,
    Gesture,
    GestureKind,
    Mode,
    Power,
    ProximitySummary,
    Tier,
    apply_tap_tempo,
    battery_step,
    check_invariants,
    commit_exchange,
    handle_gesture,
    new_device,
    on_proximity,
    outgoing_picture,
    power_on,
    tempo_from_taps,
)

G = GestureKind


def on(pictures=(3, 7, 9), t=0):
    s, _ = power_on(new_device(1, pictures), t)
    return s


def feed(s, *kinds, start=1, step=1):
    recs = []
    for i, k in enumerate(kinds):
        s, r = handle_gesture(s, Gesture(k, start + i * step))
        recs += r
    return s, recs


def test_tap_r_selects_next_picture():
    s, recs = feed(on(), G.TAP_R)
    assert s.selected == 7
    assert [r.kind for r in recs] == [EventKind.TAP_R, EventKind.PICTURE_SELECT]


def test_tap_r_on_single_picture_stays_put():
    s, _ = feed(on((3,)), G.TAP_R)
    assert s.selected == 3


def test_four_taps_on_three_pictures_lands_on_index_one():
    # 0 -> 1 -> 2 -> 0 -> 1
    s, _ = feed(on(), G.TAP_R, G.TAP_R, G.TAP_R, G.TAP_R)
    assert s.selected_index == 1


def test_push_a_turns_device_on():
    s, recs = handle_gesture(new_device(1, (1,)), Gesture(G.PUSH_A, 5))
    assert s.power is Power.ON and s.mode is Mode.DEFAULT
    assert [r.kind for r in recs] == [EventKind.PUSH_A, EventKind.POWER_ON, EventKind.BATTERY]


def test_hold_lr_toggles_power():
    s, _ = feed(on(), G.HOLD_LR)
    assert s.power is Power.OFF and s.mode is Mode.OFF
    s, _ = feed(s, G.HOLD_LR, start=10)
    assert s.power is Power.ON


def test_search_start_and_stop():
    s, recs = feed(on(), G.HOLD_R_START)
    assert s.mode is Mode.SEARCHING
    assert recs[-1].kind is EventKind.SEARCH_START and recs[-1].get_int("picture") == 3
    s, recs = feed(s, G.HOLD_R_END, start=50)
    assert s.mode is Mode.DEFAULT and recs[-1].kind is EventKind.SEARCH_STOP


def test_gestures_without_meaning_are_logged_only():
    s0, _ = feed(on(), G.HOLD_R_START)
    s1, recs = feed(s0, G.TAP_R, G.TAP_L, G.PUSH_B, start=10)
    assert [r.kind for r in recs] == [EventKind.TAP_R, EventKind.TAP_L, EventKind.PUSH_B]
    assert s1.selected_index == s0.selected_index and s1.mode is Mode.SEARCHING


def test_tap_l_cycles_animation_within_tier():
    s, _ = feed(on(), G.TAP_L, G.TAP_L, G.TAP_L)
    assert s.anim_index == 0  # three basic animations
    s, _ = on_proximity(s, ProximitySummary(1, 0), 10)
    s, _ = feed(s, G.TAP_L, G.TAP_L, start=20)
    assert s.tier is Tier.STRANGER and s.anim_index == 0  # two rainbow animations


def test_battery_display_expires():
    s, recs = feed(on(), G.PUSH_B)
    assert s.mode is Mode.BATTERY_DISPLAY and recs[-1].kind is EventKind.BATTERY
    s, _ = feed(s, G.TAP_R, start=1 + DEFAULT_CONFIG.battery_display_ms)
    assert s.mode is Mode.DEFAULT and s.selected == 7


def test_gesture_before_last_time_rejected():
    s, _ = feed(on(t=100), G.TAP_R, start=200)
    with pytest.raises(ValueError):
        handle_gesture(s, Gesture(G.TAP_R, 150))


@pytest.mark.parametrize("taps, bpm", [((0, 500), 120.0), ((0, 100), 300.0), ((0, 10_000), 30.0),
                                       ((0, 500, 1000, 1500), 120.0), ((0,), None)])
def test_tempo_from_taps(taps, bpm):
    assert tempo_from_taps(taps) == bpm


def test_beat_mode_sets_tempo():
    s, _ = feed(on(), G.HOLD_L_START)
    assert s.mode is Mode.BEAT_MODE
    s, recs = feed(s, G.TAP_L, G.TAP_L, start=1000, step=500)
    tempo = [r for r in recs if r.kind is EventKind.TEMPO_SET]
    assert len(tempo) == 1 and tempo[0].get("bpm") == "120.000"
    assert s.tempo_bpm == 120.0


def test_single_tap_sets_no_tempo():
    s, _ = feed(on(), G.HOLD_L_START)
    s, tempo = apply_tap_tempo(s, 1000)
    assert tempo is None


def test_beat_window_closes_after_ten_seconds():
    s, _ = feed(on(), G.HOLD_L_START)
    s, recs = feed(s, G.TAP_L, start=1 + 10_000)
    assert s.mode is Mode.DEFAULT
    assert [r.kind for r in recs] == [EventKind.TAP_L, EventKind.ANIM_SELECT]


@pytest.mark.parametrize("strangers, peers, tier", [(2, 1, Tier.STRANGER), (0, 0, Tier.NONE), (0, 3, Tier.PEER)])
def test_tier_precedence(strangers, peers, tier):
    s, rec = on_proximity(on(), ProximitySummary(strangers, peers), 5)
    assert s.tier is tier
    assert (rec is None) == (tier is Tier.NONE)


def test_tier_change_resets_animation():
    s, _ = feed(on(), G.TAP_L)
    s, rec = on_proximity(s, ProximitySummary(0, 1), 10)
    assert s.anim_index == 0 and rec.get("tier") == "PEER"


@pytest.mark.parametrize("owned, incoming, after, dup", [
    ((1, 2, 3), 9, (1, 2, 3, 9), False),
    ((1, 2, 3), 2, (1, 2, 3), True),
    ((), 5, (5,), False),
])
def test_commit_exchange(owned, incoming, after, dup):
    s = new_device(1, owned)
    s2, flag = commit_exchange(s, incoming)
    assert s2.owned == after and flag is dup
    assert s2.selected_index == s.selected_index


def test_outgoing_picture_and_locks():
    s, _ = feed(on((5,)), G.HOLD_R_START)
    assert outgoing_picture(s, 10, {}) == 5
    assert outgoing_picture(s, 10, {5: Picture(5, 1, ChallengeLock(None))}) is None
    timed = {5: Picture(5, 1, ChallengeLock(100))}
    assert outgoing_picture(s, 99, timed) is None
    assert outgoing_picture(s, 101, timed) == 5
    assert outgoing_picture(on((5,)), 10, {}) is None  # not searching


def test_battery_one_hour_closed_form():
    s = on()
    s, recs = battery_step(s, 3_600_000)
    # 2 mAh/h base plus 1 mAh/h for the basic tier
    assert s.battery_mah == pytest.approx(1000 - 3.0, abs=1e-9)
    assert recs == []


def test_battery_zero_step_is_identity():
    s = on()
    s2, recs = battery_step(s, 0)
    assert s2.battery_mah == s.battery_mah and recs == []


def test_battery_depletion_powers_off():
    s = dataclasses.replace(on(), battery_mah=0.001)
    s, recs = battery_step(s, 10**9)
    assert s.power is Power.OFF and s.battery_mah == 0
    assert [r.kind for r in recs][-1] is EventKind.POWER_OFF


gestures = st.lists(st.tuples(st.sampled_from(list(GestureKind)), st.integers(0, 4000)), max_size=60)
proximities = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=60)


@settings(max_examples=200)
@given(gestures, proximities, st.lists(st.integers(1, 9), max_size=4, unique=True), st.lists(st.integers(0, 9), max_size=10))
def test_random_streams_keep_invariants(gs, ps, pictures, incoming):
    s = new_device(1, pictures)
    t = 0
    battery = s.battery_mah
    owned = set(s.owned)
    for i, (kind, gap) in enumerate(gs):
        t += gap
        s, _ = battery_step(s, t - s.battery_ms)
        s, _ = handle_gesture(s, Gesture(kind, t))
        if i < len(ps):
            s, _ = on_proximity(s, ProximitySummary(*ps[i]), t)
        if i < len(incoming) and s.mode is Mode.SEARCHING:
            s, _ = commit_exchange(s, incoming[i])
        assert check_invariants(s) == []
        assert s.battery_mah <= battery
        assert owned <= set(s.owned)
        battery, owned = s.battery_mah, set(s.owned)
