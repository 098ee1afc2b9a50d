from pathlib import Path

import pytest

from halcyon.envelope import Envelope, Urgency, ValidityWindow

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "src" / "halcyon" / "scenarios"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def make_env(
    msg_id=1,
    payload="Fire at home",
    sender="home",
    authority=("personX",),
    urgency=Urgency.CRITICAL,
    validity=ValidityWindow(0, None),
    perishable=False,
):
    return Envelope(msg_id, payload, sender, frozenset(authority), urgency, validity, perishable)


@pytest.fixture
def fire_env():
    return make_env()


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
