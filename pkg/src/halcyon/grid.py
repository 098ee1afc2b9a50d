"""Simulated two-channel broadcast grid.

The grid is a dumb medium: it never looks at authority lists. Frames become
visible one tick after publication, and each subscriber keeps its own
acknowledgement state so a frame is handed out until that subscriber acks it.
Frames published on the transmit channel are bridged onto the receive
channel unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .envelope import Envelope, ValidationError, validate


class Channel(Enum):
    TRANSMIT = "TX"
    RECEIVE = "RX"


class GridError(Exception):
    pass


class InvalidEnvelope(GridError):
    pass


class DuplicateMessage(GridError):
    pass


class UnknownSubscriber(GridError, KeyError):
    pass


class NotDelivered(GridError):
    pass


@dataclass(frozen=True)
class GridFrame:
    envelope: Envelope
    published_at: int
    channel: Channel
    seq: int

    @property
    def msg_id(self) -> int:
        return self.envelope.msg_id


@dataclass
class _Cursor:
    # index of the next never-seen frame on the channel
    position: int = 0
    outstanding: dict[int, GridFrame] = field(default_factory=dict)
    acked: set[int] = field(default_factory=set)


class Grid:
    def __init__(self, trace: Optional[Callable[[str], None]] = None) -> None:
        self._frames: dict[Channel, list[GridFrame]] = {ch: [] for ch in Channel}
        self._cursors: dict[str, dict[Channel, _Cursor]] = {}
        self._msg_ids: set[int] = set()
        self._seq = 0
        self._trace = trace

    def register(self, subscriber: str) -> None:
        self._cursors.setdefault(subscriber, {ch: _Cursor() for ch in Channel})

    @property
    def subscribers(self) -> list[str]:
        return list(self._cursors)

    def frames(self, ch: Channel) -> list[GridFrame]:
        return list(self._frames[ch])

    def publish(self, env: Envelope, ch: Channel, now: int) -> GridFrame:
        try:
            validate(env)
        except ValidationError as exc:
            raise InvalidEnvelope(str(exc)) from exc
        if env.msg_id in self._msg_ids:
            raise DuplicateMessage(f"msg {env.msg_id} already published")
        self._msg_ids.add(env.msg_id)
        frame = self._append(env, ch, now)
        if self._trace is not None:
            self._trace(f"tick={now} grid publish msg={env.msg_id} ch={ch.value}")
        if ch is Channel.TRANSMIT:
            self._append(env, Channel.RECEIVE, now)
        return frame

    def _append(self, env: Envelope, ch: Channel, now: int) -> GridFrame:
        frames = self._frames[ch]
        if frames and frames[-1].published_at > now:
            raise GridError(f"publish at tick {now} precedes an earlier frame")
        self._seq += 1
        frame = GridFrame(env, now, ch, self._seq)
        frames.append(frame)
        return frame

    def _cursor(self, subscriber: str, ch: Channel) -> _Cursor:
        try:
            return self._cursors[subscriber][ch]
        except KeyError:
            raise UnknownSubscriber(subscriber) from None

    def poll(self, subscriber: str, ch: Channel, now: int) -> list[GridFrame]:
        """Every visible frame not yet acked by *subscriber*, oldest first."""
        cur = self._cursor(subscriber, ch)
        frames = self._frames[ch]
        while cur.position < len(frames) and frames[cur.position].published_at < now:
            frame = frames[cur.position]
            cur.outstanding[frame.seq] = frame
            cur.position += 1
        # outstanding is filled in seq order, which is (published_at, publish order)
        result = list(cur.outstanding.values())
        if result and self._trace is not None:
            self._trace(f"tick={now} grid poll sub={subscriber} n={len(result)}")
        return result

    def ack(self, subscriber: str, frame: GridFrame) -> None:
        cur = self._cursor(subscriber, frame.channel)
        if frame.seq in cur.acked:
            return
        if cur.outstanding.pop(frame.seq, None) is None:
            raise NotDelivered(f"frame {frame.seq} was never polled by {subscriber}")
        cur.acked.add(frame.seq)

    def has_pending(self, ch: Channel = Channel.RECEIVE) -> bool:
        frames = self._frames[ch]
        for subs in self._cursors.values():
            cur = subs[ch]
            if cur.outstanding or cur.position < len(frames):
                return True
        return False

    def backlog(self, subscriber: str, ch: Channel = Channel.RECEIVE) -> list[GridFrame]:
        """Frames *subscriber* has not acked, whether or not visible yet."""
        cur = self._cursor(subscriber, ch)
        return list(cur.outstanding.values()) + self._frames[ch][cur.position :]
