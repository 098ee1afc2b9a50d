import itertools
from functools import cmp_to_key

import pytest
from hypothesis import given
from hypothesis import strategies as st

from halcyon.envelope import (
    EmptyAuthority,
    EmptyPayload,
    EmptyPrincipal,
    Envelope,
    InvertedWindow,
    Ordering,
    Urgency,
    ValidationError,
    ValidityWindow,
    compare_urgency,
    format_envelope,
    is_live,
    parse_envelope,
    validate,
)

from conftest import make_env

DECLARED_ORDER = ["low", "normal", "high", "critical"]


def test_fire_envelope_is_valid(fire_env):
    validate(fire_env)


def test_empty_authority_rejected():
    with pytest.raises(EmptyAuthority):
        validate(make_env(authority=()))


def test_empty_payload_rejected():
    with pytest.raises(EmptyPayload):
        validate(make_env(payload=""))


def test_inverted_window_rejected():
    with pytest.raises(InvertedWindow):
        validate(make_env(validity=ValidityWindow(10, 5)))


def test_empty_principal_rejected():
    with pytest.raises(EmptyPrincipal):
        validate(make_env(sender=""))


def test_sender_may_address_itself():
    validate(make_env(sender="personX", authority=("personX",)))


@pytest.mark.parametrize(
    "window, now, expected",
    [
        (ValidityWindow(0, 3600), 10, True),
        (ValidityWindow(0, 3600), 3601, False),
        (ValidityWindow(0, None), 10**9, True),
        (ValidityWindow(5, 9), 4, False),
        (ValidityWindow(5, 9), 9, True),
    ],
)
def test_is_live(window, now, expected):
    assert is_live(make_env(validity=window), now) is expected


def test_compare_examples():
    assert compare_urgency(Urgency.CRITICAL, Urgency.LOW) is Ordering.GREATER
    assert compare_urgency(Urgency.NORMAL, Urgency.NORMAL) is Ordering.EQUAL


def test_compare_matches_declared_order_on_all_pairs():
    # oracle: position in the declared list, independent of the IntEnum values
    for a, b in itertools.product(Urgency, repeat=2):
        ia, ib = DECLARED_ORDER.index(a.label), DECLARED_ORDER.index(b.label)
        expected = Ordering.LESS if ia < ib else Ordering.GREATER if ia > ib else Ordering.EQUAL
        assert compare_urgency(a, b) is expected


def test_compare_is_total_order():
    levels = list(Urgency)
    for a, b in itertools.product(levels, repeat=2):
        assert compare_urgency(a, b) == -compare_urgency(b, a)
    for a, b, c in itertools.product(levels, repeat=3):
        if compare_urgency(a, b) <= 0 and compare_urgency(b, c) <= 0:
            assert compare_urgency(a, c) <= 0


def test_sort_by_comparator():
    mixed = [Urgency.HIGH, Urgency.LOW, Urgency.CRITICAL, Urgency.NORMAL]
    assert sorted(mixed, key=cmp_to_key(compare_urgency)) == [
        Urgency.LOW,
        Urgency.NORMAL,
        Urgency.HIGH,
        Urgency.CRITICAL,
    ]


def test_text_form_exact(fire_env):
    assert format_envelope(fire_env) == (
        'msg=1 from=home auth=[personX] urg=critical valid=0..inf perishable=false payload="Fire at home"'
    )


ids = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789-_", min_size=0, max_size=6)


@st.composite
def envelopes(draw):
    lo = draw(st.integers(0, 100))
    hi = draw(st.one_of(st.none(), st.integers(0, 150)))
    return Envelope(
        msg_id=draw(st.integers(1, 10**6)),
        payload=draw(st.text(max_size=20)),
        sender=draw(ids),
        authority=frozenset(draw(st.lists(ids, max_size=3))),
        urgency=draw(st.sampled_from(list(Urgency))),
        validity=ValidityWindow(lo, hi),
        perishable=draw(st.booleans()),
    )


@given(envelopes())
def test_validate_rejects_exactly_invariant_violations(env):
    violated = (
        not env.authority
        or not env.payload
        or (env.validity.not_after is not None and env.validity.not_before > env.validity.not_after)
        or not env.sender
        or any(not p for p in env.authority)
    )
    if violated:
        with pytest.raises(ValidationError):
            validate(env)
    else:
        validate(env)


@given(envelopes(), st.integers(0, 300), st.integers(0, 300))
def test_liveness_never_returns_after_expiry(env, t1, t2):
    hi = env.validity.not_after
    if hi is not None and hi < t1 <= t2:
        assert not is_live(env, t1)
        assert not is_live(env, t2)


@given(envelopes())
def test_text_form_round_trip(env):
    if env.sender and env.authority and all(p for p in env.authority):
        assert parse_envelope(format_envelope(env)) == env
