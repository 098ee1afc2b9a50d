"""Sender-side path: package a payload with its three accompanying details
(destinations, sender identity, urgency) and put it on the transmit channel."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional

from .envelope import Envelope, Urgency, ValidityWindow, is_live, validate
from .grid import Channel, Grid, GridError, GridFrame


class ExpiredAtSource(GridError):
    pass


@dataclass(frozen=True)
class SendRequest:
    payload: str
    sender: str
    destinations: frozenset[str]
    urgency: Urgency
    validity: ValidityWindow = ValidityWindow()
    perishable: bool = False


class MessageIds:
    """Monotonic msg_id source; the only state the sender side keeps."""

    def __init__(self, start: int = 1) -> None:
        self._counter: Iterator[int] = itertools.count(start)
        self.last = start - 1

    def __next__(self) -> int:
        self.last = next(self._counter)
        return self.last


def compose(req: SendRequest, ids: MessageIds) -> Envelope:
    draft = Envelope(
        msg_id=0,
        payload=req.payload,
        sender=req.sender,
        authority=frozenset(req.destinations),
        urgency=req.urgency,
        validity=req.validity,
        perishable=req.perishable,
    )
    # validate before drawing an id so rejected requests leave no gaps
    validate(draft)
    return replace(draft, msg_id=next(ids))


def send(env: Envelope, grid: Grid, now: int) -> GridFrame:
    if not is_live(env, now):
        raise ExpiredAtSource(
            f"msg {env.msg_id} is outside its window {env.validity.render()} at tick {now}"
        )
    return grid.publish(env, Channel.TRANSMIT, now)


def dispatch(
    req: SendRequest,
    ids: MessageIds,
    grid: Grid,
    now: int,
    trace: Optional[Callable[[str], None]] = None,
) -> Envelope:
    """compose + send, logging the composed envelope."""
    env = compose(req, ids)
    if trace is not None:
        trace(f"tick={now} B {env.render()}")
    send(env, grid, now)
    return env
