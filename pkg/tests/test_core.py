import pytest
from hypothesis import given
from hypothesis import strategies as st

from merkki.core import (
    EXCHANGE_KEYS,
    Archetype,
    BehaviorSpec,
    ChallengeLock,
    DeviceSpec,
    EventKind,
    EventRecord,
    LogParseError,
    Picture,
    RadioParams,
    Scenario,
    format_time,
    parse_log,
    parse_time,
    serialize_log,
    validate_scenario,
)
from merkki.engine import run
from merkki.scenario import bundled_scenario

from strategies import logs


def tiny(devices, pictures, behaviors=None):
    return Scenario(RadioParams(), tuple(devices), tuple(pictures), (), behaviors or {})


def test_duplicate_device_id_reported():
    sc = tiny([DeviceSpec(0, "g", pictures=(1,)), DeviceSpec(0, "g", pictures=())], [Picture(1, 0)])
    assert validate_scenario(sc) == ["duplicate DeviceId 0"]


def test_unowned_picture_reported():
    sc = tiny([DeviceSpec(1, "g", pictures=())], [Picture(7, None)])
    assert validate_scenario(sc) == ["picture 7 unowned"]


def test_reference_scenario_validates_clean():
    sc = bundled_scenario("reference")
    assert validate_scenario(sc) == []
    assert len(sc.devices) == 15 and len(sc.pictures) == 25


def test_replication_scenario_has_three_pictures_each():
    sc = bundled_scenario("replication")
    assert validate_scenario(sc) == []
    assert {len(d.pictures) for d in sc.devices} == {3}


def test_spammer_needs_its_picture():
    sc = tiny([DeviceSpec(1, "g", pictures=(1,))], [Picture(1, 1)],
              {1: BehaviorSpec(Archetype.SPAMMER, spam_picture=2)})
    assert any("spam picture 2" in v for v in validate_scenario(sc))


def test_keeper_locks_must_exist():
    sc = tiny([DeviceSpec(1, "g", pictures=(1,))], [Picture(1, 1)],
              {1: BehaviorSpec(Archetype.CHALLENGE_KEEPER, locked=(1,))})
    assert any("has no lock" in v for v in validate_scenario(sc))


def test_radio_invariants():
    assert RadioParams().violations() == []
    assert RadioParams(range_m=0).violations()
    assert RadioParams(loss_prob=1.5).violations()
    assert RadioParams(hold_duration_s=0).violations()


def test_lock_boundary():
    lock = ChallengeLock(100)
    assert lock.is_locked(99) and not lock.is_locked(100) and not lock.is_locked(101)
    assert ChallengeLock(None).is_locked(10**12)


@given(st.integers(-10**12, 10**12))
def test_time_text_round_trip(ms):
    assert parse_time(format_time(ms)) == ms


@pytest.mark.parametrize("bad", ["1.5", "01.000", "1.0000", "", "x.000", "1,000"])
def test_time_rejects_non_canonical(bad):
    with pytest.raises(ValueError):
        parse_time(bad)


def test_record_payload_is_sorted_and_rendered():
    r = EventRecord.make(1500, 3, EventKind.EXCHANGE, sent_picture=4, partner=2,
                         received_picture=9, duplicate_flag=False)
    assert tuple(k for k, _ in r.payload) == EXCHANGE_KEYS
    assert r.to_line() == "1.500\t3\tEXCHANGE\tduplicate_flag=false\tpartner=2\treceived_picture=9\tsent_picture=4"


def test_kind_rank_breaks_ties():
    a = EventRecord.make(0, 1, EventKind.POWER_OFF)
    b = EventRecord.make(0, 1, EventKind.POWER_ON, owned=())
    assert sorted([a, b], key=EventRecord.sort_key) == [b, a]


def test_engine_log_round_trips_byte_for_byte():
    text = serialize_log(run(bundled_scenario("interception")))
    assert serialize_log(parse_log(text)) == text


@given(logs)
def test_random_log_round_trips(log):
    text = serialize_log(log)
    assert serialize_log(parse_log(text)) == text


@pytest.mark.parametrize("text, lineno", [
    ("0.000\t1\tPOWER_ON\n1.00\t1\tPOWER_OFF\n", 2),
    ("0.000\t1\tNOPE\n", 1),
    ("0.000\t1\tBATTERY\tmah=1\tbad\n", 1),
    ("0.000\t1\tBATTERY\tz=1\ta=2\n", 1),
    ("0.000\t1\tEXCHANGE\tpartner=2\n", 1),
    ("2.000\t1\tTAP_L\n1.000\t1\tTAP_L\n", 2),
    ("0.000\t1\tTAP_L", 1),
    ("0.000\t-1\tTAP_L\n", 1),
])
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(LogParseError) as e:
        parse_log(text)
    assert e.value.lineno == lineno


def test_mirror_records_in_engine_log():
    log = run(bundled_scenario("interception"))
    ex = [r for r in log if r.kind is EventKind.EXCHANGE]
    index = {(r.time_ms, r.device): r for r in ex}
    for r in ex:
        m = index[r.time_ms, r.get_int("partner")]
        assert m.get_int("partner") == r.device
        assert m.get_int("sent_picture") == r.get_int("received_picture")
        assert m.get_int("received_picture") == r.get_int("sent_picture")
