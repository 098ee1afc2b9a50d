import itertools

import pytest

from halcyon.context import (
    Availability,
    Device,
    Interval,
    Modality,
    ScenarioTimeline,
    State,
    TimelineError,
    UnknownPrincipal,
    available_devices,
    snapshot,
)


def person_x():
    tl = ScenarioTimeline()
    tl.add_principal("personX")
    tl.add_availability("personX", Interval(0, 120), Availability(State.BUSY, "meeting"))
    tl.add_availability("personX", Interval(121), Availability())
    return tl


def dev(did, prio, *mods, owner="p"):
    return Device(did, owner, frozenset(mods), prio)


def test_busy_in_meeting():
    snap = snapshot("personX", 50, person_x())
    assert snap.availability == Availability(State.BUSY, "meeting")


def test_free_after_meeting():
    assert snapshot("personX", 121, person_x()).availability.state is State.FREE


@pytest.mark.parametrize("tick, busy", [(120, True), (121, False)])
def test_closed_interval_boundaries(tick, busy):
    assert snapshot("personX", tick, person_x()).availability.busy is busy


def test_overlapping_intervals_rejected():
    tl = person_x()
    with pytest.raises(TimelineError):
        tl.add_availability("personX", Interval(120, 130), Availability())


def test_last_interval_extends_forever():
    tl = ScenarioTimeline()
    tl.add_principal("a")
    tl.add_availability("a", Interval(0, 10), Availability(State.BUSY, "driving"))
    assert snapshot("a", 500, tl).availability.activity == "driving"


def test_gap_defaults_to_free():
    tl = ScenarioTimeline()
    tl.add_principal("a")
    tl.add_availability("a", Interval(5, 10), Availability(State.BUSY, "driving"))
    assert not snapshot("a", 2, tl).availability.busy


def test_unknown_principal():
    with pytest.raises(UnknownPrincipal):
        snapshot("ghost", 0, person_x())


def test_busy_requires_activity():
    with pytest.raises(ValueError):
        Availability(State.BUSY, "")


def test_snapshot_is_referentially_transparent():
    tl = person_x()
    assert snapshot("personX", 77, tl) == snapshot("personX", 77, tl)


def test_driving_speaker_for_audio():
    tl = ScenarioTimeline()
    tl.add_principal("driver")
    tl.add_device(Device("speaker", "driver", frozenset({Modality.AUDIO}), 1))
    tl.add_device(Device("dashboard-screen", "driver", frozenset({Modality.VISUAL}), 1))
    snap = snapshot("driver", 0, tl)
    assert [d.device_id for d in available_devices(snap, Modality.AUDIO)] == ["speaker"]


def test_no_devices():
    tl = person_x()
    assert available_devices(snapshot("personX", 0, tl), Modality.AUDIO) == []


def test_device_presence_interval():
    tl = ScenarioTimeline()
    tl.add_principal("p")
    tl.add_device(Device("lamp", "p", frozenset({Modality.VISUAL}), 1, Interval(0, 9)))
    assert snapshot("p", 9, tl).present_devices
    assert snapshot("p", 10, tl).present_devices == ()


def test_priority_unique_per_owner_and_modality():
    tl = ScenarioTimeline()
    tl.add_principal("p")
    tl.add_device(dev("a", 1, Modality.AUDIO))
    tl.add_device(dev("b", 1, Modality.VISUAL))
    with pytest.raises(TimelineError):
        tl.add_device(dev("c", 1, Modality.AUDIO, Modality.HAPTIC))


def test_available_devices_order_matches_permutation_oracle():
    pool = [
        dev("phone", 2, Modality.AUDIO, Modality.VISUAL),
        dev("watch", 1, Modality.VISUAL, Modality.HAPTIC),
        dev("speaker", 3, Modality.AUDIO),
        dev("buzzer", 4, Modality.HAPTIC, Modality.AUDIO),
    ]
    for n in range(len(pool) + 1):
        for chosen in itertools.permutations(pool, n):
            tl = ScenarioTimeline()
            tl.add_principal("p")
            for d in chosen:
                tl.add_device(d)
            snap = snapshot("p", 0, tl)
            for m in Modality:
                got = available_devices(snap, m)
                supporting = [d for d in chosen if m in d.modalities]
                # oracle: the unique ordering whose priorities never decrease
                ordered = [
                    list(p)
                    for p in itertools.permutations(supporting)
                    if all(a.priority <= b.priority for a, b in zip(p, p[1:]))
                ]
                assert ordered == [got]
                assert set(got) <= set(snap.present_devices)
